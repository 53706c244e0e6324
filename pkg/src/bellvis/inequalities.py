"""Bell expressions and closed-form critical visibilities.

Expressions are stored in probability form: a map from
``(parties, settings, outcomes)`` to a coefficient, where the key denotes the
marginal ``p(a_S = outcomes | x_S = settings)``.  The empty key ``((), (), ())``
is the constant term.  Correlator-form expressions are converted with
``<A_1 ... A_k> = sum_a (-1)^{|a|} p(a)`` (label 0 <-> eigenvalue +1, see
:mod:`bellvis.behavior`).

The iterative family used here satisfies ``C_N - 2 = (C_{N-1} - 2)(1 - A_N)``,
hence ``C_N - 2 = (C_2 - 2) * prod_k (1 - A_k)``.  With ``CHSH - 2 = 4 CH``
and ``1 - A_k = 2 p(a_k = 1)`` this gives the exact identity, on every
no-signaling behavior,

    C_N = 2 + 2**N * [CH^{(1,2)} prod_{k>=3} p(a_k = 1)].
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .behavior import Behavior, MeasurementSetting, Scenario

SQRT2 = math.sqrt(2.0)
N_CRIT_SEARCH_CAP = 10**4

Key = tuple  # (parties, settings, outcomes)


def _key_order(key):
    parties, settings, outcomes = key
    return (len(parties), parties, settings, outcomes)


@dataclass(frozen=True, eq=False)
class BellExpression:
    """Linear functional on marginal probabilities with a local bound."""

    scenario: Scenario
    terms: dict
    bound: float
    name: str = ""

    def __post_init__(self):
        clean = {}
        for (parties, settings, outcomes), c in self.terms.items():
            parties, settings, outcomes = tuple(parties), tuple(settings), tuple(outcomes)
            if not (len(parties) == len(settings) == len(outcomes)):
                raise ValueError("term key components must have equal length")
            if list(parties) != sorted(set(parties)):
                raise ValueError(f"parties must be strictly increasing: {parties}")
            for p, x in zip(parties, settings):
                if not 0 <= x < self.scenario.settings_per_party[p]:
                    raise ValueError(f"setting {x} out of range for party {p}")
            if abs(c) > 1e-14:
                clean[(parties, settings, outcomes)] = float(c)
        ordered = dict(sorted(clean.items(), key=lambda kv: _key_order(kv[0])))
        object.__setattr__(self, "terms", ordered)

    def same_terms(self, other, tol=1e-12) -> bool:
        if self.terms.keys() != other.terms.keys():
            return False
        return all(abs(self.terms[k] - other.terms[k]) <= tol for k in self.terms)

    def __add__(self, other):
        if other.scenario != self.scenario:
            raise ValueError("scenario mismatch")
        merged = dict(self.terms)
        for k, c in other.terms.items():
            merged[k] = merged.get(k, 0.0) + c
        return BellExpression(self.scenario, merged, self.bound + other.bound)

    def scaled(self, factor, bound=None):
        return BellExpression(
            self.scenario,
            {k: factor * c for k, c in self.terms.items()},
            factor * self.bound if bound is None else bound,
            self.name,
        )

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "settings_per_party": list(self.scenario.settings_per_party),
            "bound": self.bound,
            "terms": [
                {"parties": list(p), "settings": list(x), "outcomes": list(a), "coefficient": c}
                for (p, x, a), c in self.terms.items()
            ],
        }

    @classmethod
    def from_json(cls, obj) -> BellExpression:
        terms = {}
        for t in obj["terms"]:
            key = (tuple(t["parties"]), tuple(t["settings"]), tuple(t["outcomes"]))
            terms[key] = terms.get(key, 0.0) + float(t["coefficient"])
        return cls(Scenario(tuple(obj["settings_per_party"])), terms, float(obj["bound"]), obj.get("name", ""))


# ---------------------------------------------------------------------------
# correlator polynomials: {((party, setting), ...): coeff}, parties increasing


def _A(party, setting=0):
    return {((party, setting),): 1.0}


def _const(c):
    return {(): float(c)}


def _padd(*polys):
    out = {}
    for p in polys:
        for k, c in p.items():
            out[k] = out.get(k, 0.0) + c
    return {k: c for k, c in out.items() if abs(c) > 1e-14}


def _pscale(p, s):
    return {k: s * c for k, c in p.items()}


def _pmul(p, q):
    out = {}
    for k1, c1 in p.items():
        for k2, c2 in q.items():
            parties1 = {a for a, _ in k1}
            if any(a in parties1 for a, _ in k2):
                raise ValueError("product would repeat a party")
            k = tuple(sorted(k1 + k2))
            out[k] = out.get(k, 0.0) + c1 * c2
    return {k: c for k, c in out.items() if abs(c) > 1e-14}


def chsh_poly(i=0, j=1):
    """A_1 B_1 + A_1 B_2 + A_2 B_1 - A_2 B_2 with settings indexed from 0."""
    return _padd(
        _pmul(_A(i, 0), _A(j, 0)),
        _pmul(_A(i, 0), _A(j, 1)),
        _pmul(_A(i, 1), _A(j, 0)),
        _pscale(_pmul(_A(i, 1), _A(j, 1)), -1.0),
    )


def mermin_poly():
    """-A1 B1 C1 + A1 B2 C2 + A2 B2 C1 + A2 B1 C2 (settings indexed from 0)."""
    t = lambda a, b, c: _pmul(_pmul(_A(0, a), _A(1, b)), _A(2, c))
    return _padd(_pscale(t(0, 0, 0), -1.0), t(0, 1, 1), t(1, 1, 0), t(1, 0, 1))


def _iterate(seed, first, n):
    poly = seed
    for k in range(first, n):
        poly = _padd(_pmul(_padd(_const(1.0), _pscale(_A(k), -1.0)), poly), _pscale(_A(k), 2.0))
    return poly


def c_n_poly(n: int):
    """Correlator polynomial of C_n built by the recursion from CHSH."""
    if n < 2:
        raise ValueError("C_N needs n >= 2")
    return _iterate(chsh_poly(), 2, n)


def c_n_poly_explicit(n: int):
    """Closed expansion ``C_2 + (2 - C_2) * sum_T (-1)^{|T|+1} prod_T A``.

    ``T`` runs over non-empty subsets of parties 3..N.
    """
    c2 = chsh_poly()
    alt = {}
    rest = list(range(2, n))
    for r in range(1, len(rest) + 1):
        for subset in itertools.combinations(rest, r):
            mono = tuple((k, 0) for k in subset)
            alt[mono] = (-1.0) ** (r + 1)
    return _padd(c2, _pmul(_padd(_const(2.0), _pscale(c2, -1.0)), alt))


def m_n_poly(n: int):
    if n < 3:
        raise ValueError("M_N needs n >= 3")
    return _iterate(mermin_poly(), 3, n)


def correlators_to_expression(poly, scenario: Scenario, bound: float, name="") -> BellExpression:
    terms = {}
    for mono, c in poly.items():
        parties = tuple(p for p, _ in mono)
        settings = tuple(x for _, x in mono)
        for outs in itertools.product((0, 1), repeat=len(mono)):
            key = (parties, settings, outs)
            terms[key] = terms.get(key, 0.0) + c * (-1.0) ** sum(outs)
    return BellExpression(scenario, terms, bound, name)


def _c_scenario(n, k):
    return Scenario((2,) * k + (1,) * (n - k))


def build_C_N(n: int) -> BellExpression:
    """Iterative expression seeded with CHSH; local bound 2."""
    return correlators_to_expression(c_n_poly(n), _c_scenario(n, 2), 2.0, f"C_{n}")


def build_C_N_explicit(n: int) -> BellExpression:
    return correlators_to_expression(c_n_poly_explicit(n), _c_scenario(n, 2), 2.0, f"C_{n}")


def build_M_N(n: int) -> BellExpression:
    """Iterative expression seeded with the Mermin expression; local bound 2."""
    return correlators_to_expression(m_n_poly(n), _c_scenario(n, 3), 2.0, f"M_{n}")


# ---------------------------------------------------------------------------
# probability-form expressions


def _ch_terms(i, j, s1, s2, extra=()):
    """Clauser-Horne terms for parties i < j on settings (s1, s2).

    CH = p(11|s1 s1) + p(11|s1 s2) + p(11|s2 s1) - p(11|s2 s2) - p_i(1|s1) - p_j(1|s1),
    every term multiplied by the joint event 'each party in ``extra`` outputs
    1 on setting 0'.
    """

    def key(fixed):
        items = sorted(list(fixed) + [(k, 0, 1) for k in extra])
        return (tuple(p for p, _, _ in items), tuple(x for _, x, _ in items), tuple(a for _, _, a in items))

    return {
        key([(i, s1, 1), (j, s1, 1)]): 1.0,
        key([(i, s1, 1), (j, s2, 1)]): 1.0,
        key([(i, s2, 1), (j, s1, 1)]): 1.0,
        key([(i, s2, 1), (j, s2, 1)]): -1.0,
        key([(i, s1, 1)]): -1.0,
        key([(j, s1, 1)]): -1.0,
    }


def build_CH(settings=(0, 1)) -> BellExpression:
    s1, s2 = settings
    return BellExpression(Scenario((max(settings) + 1,) * 2), _ch_terms(0, 1, s1, s2), 0.0, "CH")


def build_CH_product(n: int) -> BellExpression:
    """CH^{(1,2)} prod_{k>=3} p(A_1^{(k)}) on the C_N scenario; local bound 0."""
    if n < 2:
        raise ValueError("n >= 2 required")
    terms = _ch_terms(0, 1, 0, 1, extra=tuple(range(2, n)))
    return BellExpression(_c_scenario(n, 2), terms, 0.0, f"CHprod_{n}")


def build_symmetrized_CH(n: int) -> BellExpression:
    """sum_{i<j} CH^{(i,j)} prod_{k != i,j} p(A_1^{(k)}); three settings each, bound 0.

    Setting 0 is the 'projection' setting, settings 1 and 2 enter CH.
    """
    if n < 3:
        raise ValueError("the symmetrized inequality needs n >= 3")
    terms = {}
    for i, j in itertools.combinations(range(n), 2):
        extra = tuple(k for k in range(n) if k not in (i, j))
        for key, c in _ch_terms(i, j, 1, 2, extra).items():
            terms[key] = terms.get(key, 0.0) + c
    return BellExpression(Scenario((3,) * n), terms, 0.0, f"symCH_{n}")


# ---------------------------------------------------------------------------
# evaluation


def _compatible(expr: BellExpression, sc: Scenario):
    if sc.n_parties != expr.scenario.n_parties or any(
        m_e > m_b for m_e, m_b in zip(expr.scenario.settings_per_party, sc.settings_per_party)
    ):
        raise ValueError(
            f"expression scenario {expr.scenario.settings_per_party} does not fit "
            f"behavior scenario {sc.settings_per_party}"
        )


def evaluate(expr: BellExpression, b: Behavior) -> float:
    """Apply the expression to a behavior's marginals.

    The behavior may offer more settings per party than the expression uses;
    marginals use the canonical completion (absent parties at setting 0).
    """
    _compatible(expr, b.scenario)
    cache = {}
    total = 0.0
    for (parties, settings, outcomes), c in expr.terms.items():
        if not parties:
            total += c
            continue
        m = cache.get((parties, settings))
        if m is None:
            m = cache[(parties, settings)] = b.marginal(parties, settings)
        total += c * float(m[outcomes])
    return total


def term_table(expr: BellExpression):
    """(masks, values, coeffs) for :func:`bellvis._kernels.strategy_scores`."""
    spp = expr.scenario.settings_per_party
    total = sum(spp)
    offsets = np.concatenate([[0], np.cumsum(spp)[:-1]])
    masks, values, coeffs = [], [], []
    for (parties, settings, outcomes), c in expr.terms.items():
        mask = val = 0
        for p, x, a in zip(parties, settings, outcomes):
            shift = total - 1 - (int(offsets[p]) + x)
            mask |= 1 << shift
            val |= a << shift
        masks.append(mask)
        values.append(val)
        coeffs.append(c)
    return np.array(masks, dtype=np.int64), np.array(values, dtype=np.int64), np.array(coeffs)


def local_max(expr: BellExpression, backend=None, cap=2**26):
    """Exact maximum over all deterministic strategies: ``(value, strategy_index)``."""
    n_strat = expr.scenario.n_strategies
    if n_strat > cap:
        raise ValueError(f"{n_strat} strategies exceed the enumeration cap {cap}")
    scores = _kernels.strategy_scores(*term_table(expr), n_strat, backend=backend)
    best = int(np.argmax(scores))
    return float(scores[best]), best


# ---------------------------------------------------------------------------
# closed-form critical visibilities


def vcrit_ghz(n: int) -> float:
    if n < 2:
        raise ValueError("n >= 2 required")
    return 2.0 ** (-(n - 1) / 2)


def _dicke_gain(n, e):
    return 2.0 ** (n - 1) * (SQRT2 - 1) / math.comb(n, e)


def vcrit_dicke(n: int, e: int) -> float:
    """Critical visibility of the Dicke state D_n^e for the C_N inequality."""
    if n < 3:
        raise ValueError("n >= 3 required")
    if not 1 <= e <= n - 1:
        raise ValueError(f"e must lie in [1, {n - 1}]")
    return 1.0 / (1.0 + _dicke_gain(n, e))


def vcrit_nm2_product(n: int) -> float:
    """|0...0>|GHZ_2> with the C_N inequality."""
    if n < 3:
        raise ValueError("n >= 3 required")
    return 1.0 / (1.0 + (SQRT2 - 1) * 2.0 ** (n - 2))


def vcrit_nm3_product(n: int) -> float:
    """|0...0>|GHZ_3> with the Mermin-seeded M_N inequality."""
    if n < 4:
        raise ValueError("n >= 4 required")
    return 8.0 / (8.0 + 2.0**n)


def nm2_product_crossover(cap: int = 64) -> int:
    """Smallest N from which |0..0>|GHZ_2> has a lower C_N visibility than GHZ_N.

    The gap ``2^{(N-1)/2} - 1 - (sqrt2 - 1) 2^{N-2}`` is a downward
    parabola in ``2^{(N-1)/2}``, so after the first negative value it stays
    negative; equals ``ceil(log2(12 + 8 sqrt2))``.
    """
    for n in range(3, cap + 1):
        if vcrit_nm2_product(n) < vcrit_ghz(n):
            return n
    raise RuntimeError("no crossover below cap")


def _dicke_beats_ghz(n, e):
    # 1/(1+g) < 2^{-(n-1)/2}  <=>  log(1+g) > (n-1)/2 log 2, in log space
    lg = (n - 1) * math.log(2) + math.log(SQRT2 - 1) - math.log(math.comb(n, e))
    lhs = lg + math.log1p(math.exp(-lg)) if lg > 0 else math.log1p(math.exp(lg))
    return lhs - (n - 1) / 2 * math.log(2) > 1e-12


def find_n_crit(e: int, cap: int = N_CRIT_SEARCH_CAP) -> int:
    """Smallest N from which on every D_N^e beats GHZ_N in critical visibility.

    For ``N > 3.42 e`` the ratio ``2^{(N-1)/2} / C(N, e)`` grows with N, so
    once it exceeds ``1 / (sqrt2 - 1)`` past that point the Dicke state wins
    for all larger N and the search can stop.
    """
    if e < 1:
        raise ValueError("e >= 1 required")
    last_fail = e
    settle = math.ceil(SQRT2 / (SQRT2 - 1) * e) + 1
    for n in range(e + 1, cap + 1):
        if not _dicke_beats_ghz(n, e):
            last_fail = n
            continue
        ratio_log = (n - 1) / 2 * math.log(2) + math.log(SQRT2 - 1) - math.log(math.comb(n, e))
        if n > settle and ratio_log > 0:
            return last_fail + 1
    raise RuntimeError(f"no crossover found for e={e} below N={cap}")


def dicke_quantum_value_C_N(n: int, e: int, v: float) -> float:
    """<C_N> on the noisy Dicke state with :func:`dicke_c_n_settings`."""
    if n < 2 or not 1 <= e <= n - 1:
        raise ValueError("need n >= 2 and 1 <= e <= n-1")
    if not 0.0 <= v <= 1.0:
        raise ValueError("v must lie in [0, 1]")
    return v * (2.0 + 2.0**n * (SQRT2 - 1) / math.comb(n, e))


# ---------------------------------------------------------------------------
# settings that realize the closed forms


def _xz(angle):
    return MeasurementSetting.along([math.sin(angle), 0.0, math.cos(angle)])


def chsh_settings_singlet_like():
    """Tsirelson settings for (|01> + |10>)/sqrt2 (parties 1, 2)."""
    return [[_xz(0.0), _xz(math.pi / 2)], [_xz(3 * math.pi / 4), _xz(-3 * math.pi / 4)]]


def chsh_settings_ghz2():
    """Tsirelson settings for (|00> + |11>)/sqrt2."""
    return [[_xz(0.0), _xz(math.pi / 2)], [_xz(math.pi / 4), _xz(-math.pi / 4)]]


def mermin_settings_ghz3():
    """Equatorial settings (-x, y) reaching M_3 = 4 on GHZ_3."""
    s = [MeasurementSetting.projective(math.pi / 2, math.pi), MeasurementSetting.projective(math.pi / 2, math.pi / 2)]
    return [list(s) for _ in range(3)]


def dicke_c_n_settings(n: int, e: int):
    """Settings for C_N on D_n^e over the scenario (2, 2, 1, ..., 1).

    Parties 3..N measure z; ``e - 1`` of them project onto ``|1>`` (label 1
    of ``+z``) and the rest onto ``|0>`` (label 1 of ``-z``), which leaves
    parties 1, 2 in ``(|01> + |10>)/sqrt2``.
    """
    out = chsh_settings_singlet_like()
    for k in range(2, n):
        out.append([MeasurementSetting.along("z" if k - 2 < e - 1 else "-z")])
    return out


def nm2_product_settings(n: int):
    """C_N settings for GHZ_2 on parties 1, 2 and |0> elsewhere."""
    return chsh_settings_ghz2() + [[MeasurementSetting.along("-z")] for _ in range(2, n)]


def nm3_product_settings(n: int):
    """M_N settings for GHZ_3 on parties 1..3 and |0> elsewhere."""
    return mermin_settings_ghz3() + [[MeasurementSetting.along("-z")] for _ in range(3, n)]
