"""Measurement settings, Bell scenarios and behaviors p(a | x).

Outcome labeling
----------------
A projective setting with Bloch direction ``n`` is the dichotomic observable
``A = n . sigma``.  Outcome label ``0`` is eigenvalue ``+1`` (projector
``(I + n.sigma)/2``) and label ``1`` is eigenvalue ``-1`` (projector
``(I - n.sigma)/2``).  Hence

    p(a = 1) = (1 - <A>) / 2,     <A_1 ... A_k> = sum_a (-1)^{|a|} p(a).

Correlator-form expressions (CHSH, Mermin, C_N) and probability-form ones
(CH) are converted with exactly these two identities.  Measuring ``z`` on
``|1>`` therefore gives label 1, so labels coincide with computational-basis
bits.

Layout
------
``Behavior.table`` has shape ``(n_joint_settings, 2**N)``.  Joint settings
are mixed-radix integers (party 1 most significant); joint outcomes are
N-bit integers (party 1 most significant bit).
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from functools import reduce

import numpy as np

from . import _kernels
from .states import PAULI, NoisyState, PureState


@dataclass(frozen=True)
class MeasurementSetting:
    """Projective qubit measurement along (theta, phi), or a constant outcome."""

    kind: str = "projective"
    theta: float = 0.0
    phi: float = 0.0
    outcome: int = 0

    def __post_init__(self):
        if self.kind not in ("projective", "constant"):
            raise ValueError(f"unknown setting kind {self.kind!r}")
        if self.kind == "constant" and self.outcome not in (0, 1):
            raise ValueError("constant outcome must be 0 or 1")

    @classmethod
    def projective(cls, theta, phi=0.0):
        return cls("projective", float(theta), float(phi))

    @classmethod
    def constant(cls, outcome):
        return cls("constant", outcome=int(outcome))

    @classmethod
    def along(cls, direction):
        """Setting whose label-0 projector points along ``direction``."""
        if isinstance(direction, str):
            sign = -1.0 if direction.startswith("-") else 1.0
            direction = sign * np.eye(3)["xyz".index(direction.lstrip("+-"))]
        n = np.asarray(direction, dtype=float)
        n = n / np.linalg.norm(n)
        theta = float(np.arccos(np.clip(n[2], -1.0, 1.0)))
        phi = float(np.arctan2(n[1], n[0])) if abs(np.sin(theta)) > 1e-15 else 0.0
        return cls("projective", theta, phi)

    @property
    def direction(self):
        if self.kind != "projective":
            return None
        st = np.sin(self.theta)
        return np.array([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)])

    def povm(self) -> np.ndarray:
        """(E_0, E_1) as an array of shape (2, 2, 2)."""
        if self.kind == "constant":
            out = np.zeros((2, 2, 2), dtype=complex)
            out[self.outcome] = np.eye(2)
            return out
        nx, ny, nz = self.direction
        ns = nx * PAULI["x"] + ny * PAULI["y"] + nz * PAULI["z"]
        return np.stack([(PAULI["I"] + ns) / 2, (PAULI["I"] - ns) / 2])

    def observable(self) -> np.ndarray:
        e = self.povm()
        return e[0] - e[1]

    def to_json(self):
        if self.kind == "constant":
            return {"kind": "constant", "outcome": self.outcome}
        return {"kind": "projective", "theta": self.theta, "phi": self.phi}

    @classmethod
    def from_json(cls, obj):
        if obj["kind"] == "constant":
            return cls.constant(obj["outcome"])
        return cls.projective(obj["theta"], obj["phi"])


@dataclass(frozen=True)
class Scenario:
    settings_per_party: tuple

    def __post_init__(self):
        spp = tuple(int(m) for m in self.settings_per_party)
        if len(spp) < 1 or any(m < 1 for m in spp):
            raise ValueError("each party needs at least one setting")
        object.__setattr__(self, "settings_per_party", spp)

    @classmethod
    def uniform(cls, n_parties, settings):
        return cls((settings,) * n_parties)

    @property
    def n_parties(self):
        return len(self.settings_per_party)

    @property
    def n_joint_settings(self):
        return int(np.prod(self.settings_per_party))

    @property
    def n_outcomes(self):
        return 2**self.n_parties

    @property
    def n_strategies(self):
        return 2 ** sum(self.settings_per_party)

    @property
    def cg_length(self):
        return int(np.prod([1 + m for m in self.settings_per_party]))

    def joint_settings(self):
        return itertools.product(*[range(m) for m in self.settings_per_party])

    def setting_index(self, xs):
        return int(np.ravel_multi_index(tuple(xs), self.settings_per_party))

    def cg_index(self, parties, settings):
        """Row of the Collins-Gisin vector for 'parties output 0 on settings'."""
        digits = [0] * self.n_parties
        for p, x in zip(parties, settings):
            digits[p] = 1 + x
        return int(np.ravel_multi_index(tuple(digits), tuple(1 + m for m in self.settings_per_party)))


@dataclass(frozen=True, eq=False)
class Behavior:
    scenario: Scenario
    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        shape = (self.scenario.n_joint_settings, self.scenario.n_outcomes)
        if t.shape != shape:
            t = t.reshape(shape)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def prob(self, outcomes, settings) -> float:
        a = int("".join(str(int(b)) for b in outcomes), 2)
        return float(self.table[self.scenario.setting_index(settings), a])

    def tensor(self) -> np.ndarray:
        """Table reshaped to axes (x_1..x_N, a_1..a_N)."""
        sc = self.scenario
        return self.table.reshape(sc.settings_per_party + (2,) * sc.n_parties)

    def marginal(self, parties, settings) -> np.ndarray:
        """p(a_S | x_S) with every other party at setting 0 (canonical completion).

        Returned array has one axis of length 2 per listed party.
        """
        sc = self.scenario
        n = sc.n_parties
        parties = list(parties)
        xs = [0] * n
        for p, x in zip(parties, settings):
            xs[p] = x
        t = self.tensor()[tuple(xs)]
        others = tuple(i for i in range(n) if i not in parties)
        t = t.sum(axis=others) if others else t
        order = sorted(range(len(parties)), key=lambda k: parties[k])
        return np.transpose(t, np.argsort(order)) if parties else t

    def normalization_error(self) -> float:
        return float(np.max(np.abs(self.table.sum(axis=1) - 1.0)))

    def signaling_error(self) -> float:
        """Largest deviation of any subset marginal across others' settings."""
        sc = self.scenario
        n = sc.n_parties
        t = self.tensor()
        worst = 0.0
        for r in range(1, n):
            for subset in itertools.combinations(range(n), r):
                others = tuple(i for i in range(n) if i not in subset)
                # sum out the other parties' outcomes
                marg = t.sum(axis=tuple(n + i for i in others))
                # marg axes: x_1..x_N, a_subset ; spread over others' settings
                spread = marg.max(axis=others) - marg.min(axis=others)
                worst = max(worst, float(spread.max()))
        return worst

    def collins_gisin(self) -> np.ndarray:
        """Vector of p(all of S output 0 | x_S) over (S, x_S), empty S first."""
        maps = []
        for m in self.scenario.settings_per_party:
            mi = np.zeros((1 + m, m, 2))
            mi[0, 0, :] = 1.0
            for x in range(m):
                mi[1 + x, x, 0] = 1.0
            maps.append(mi)
        n = self.scenario.n_parties
        letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
        xs, outs, rows = letters[:n], letters[n : 2 * n], letters[2 * n : 3 * n]
        spec = ",".join(rows[i] + xs[i] + outs[i] for i in range(n))
        spec = f"{xs}{outs},{spec}->{rows}"
        return np.einsum(spec, self.tensor(), *maps, optimize=True).reshape(-1)

    # -- export ----------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["setting_index", "outcome_index", "probability"])
        for x in range(self.table.shape[0]):
            for a in range(self.table.shape[1]):
                w.writerow([x, a, repr(float(self.table[x, a]))])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "settings_per_party": list(self.scenario.settings_per_party),
            "entries": [
                {"setting_index": x, "outcome_index": a, "probability": float(self.table[x, a])}
                for x in range(self.table.shape[0])
                for a in range(self.table.shape[1])
            ],
        }

    @classmethod
    def from_json(cls, obj) -> Behavior:
        sc = Scenario(tuple(obj["settings_per_party"]))
        t = np.zeros((sc.n_joint_settings, sc.n_outcomes))
        for e in obj["entries"]:
            t[e["setting_index"], e["outcome_index"]] = e["probability"]
        return cls(sc, t)


# ---------------------------------------------------------------------------
# construction from quantum states


def _check_settings(state, settings):
    if len(settings) != state.n_qubits:
        raise ValueError(f"{len(settings)} parties of settings for a {state.n_qubits}-qubit state")
    if any(len(s) < 1 for s in settings):
        raise ValueError("every party needs at least one setting")


def _mixed_tensor(state: NoisyState, ops):
    pure = _kernels.expectation_tensor(state.pure.amplitudes, ops)
    noise = reduce(np.multiply.outer, [np.trace(o, axis1=1, axis2=2).real / 2 for o in ops])
    v = state.visibility
    return v * pure + (1 - v) * noise


def joint_probabilities(state, settings) -> Behavior:
    """Full behavior of a noisy state for per-party lists of settings."""
    if isinstance(state, PureState):
        state = NoisyState(state, 1.0)
    _check_settings(state, settings)
    n = state.n_qubits
    ops = [np.concatenate([s.povm() for s in party]) for party in settings]
    t = _mixed_tensor(state, ops)
    spp = tuple(len(p) for p in settings)
    t = t.reshape(sum(((m, 2) for m in spp), ()))
    t = t.transpose(list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2)))
    return Behavior(Scenario(spp), t.reshape(int(np.prod(spp)), 2**n))


def collins_gisin_vector(state, settings) -> np.ndarray:
    """p(all of S output 0 | x_S) for every (S, x_S), straight from the state.

    Equals ``joint_probabilities(state, settings).collins_gisin()`` but skips
    the full table; this is the optimizer's hot path.
    """
    if isinstance(state, PureState):
        state = NoisyState(state, 1.0)
    _check_settings(state, settings)
    ops = [np.concatenate([np.eye(2)[None]] + [s.povm()[:1] for s in party]) for party in settings]
    return _mixed_tensor(state, ops).reshape(-1)


def uniform_behavior(scenario: Scenario) -> Behavior:
    t = np.full((scenario.n_joint_settings, scenario.n_outcomes), 1.0 / scenario.n_outcomes)
    return Behavior(scenario, t)


def correlation_component(state, directions) -> float:
    """Expectation of a tensor product of ``n . sigma`` / identity factors.

    ``directions`` has one entry per qubit: ``None`` for identity, an axis
    name such as ``"z"`` or ``"-z"``, or a Bloch 3-vector.
    """
    from .states import expectation

    if isinstance(state, PureState):
        state = NoisyState(state, 1.0)
    if len(directions) != state.n_qubits:
        raise ValueError("one direction per qubit required")
    return expectation(state, directions)


def dicke_z_correlation(n: int, e: int, k: int, v: float = 1.0) -> float:
    """Closed form of <sigma_z^{(x)k} (x) I^{(x)(n-k)}> on a noisy Dicke state.

    A basis state with ``j`` excitations among the first ``k`` qubits picks
    up sign ``(-1)^j``; there are ``C(k, j) C(n-k, e-j)`` of them.
    """
    from math import comb

    if k == 0:
        return 1.0
    total = sum((-1) ** j * comb(k, j) * comb(n - k, e - j) for j in range(min(k, e) + 1))
    return v * total / comb(n, e)
