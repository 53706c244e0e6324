"""Outer optimization of the critical visibility.

``optimize_settings`` minimizes the LP value ``v*`` (the largest visibility
that still admits a local model) over projective measurement directions with
multi-start Nelder-Mead.  When the state is invariant under exchanging some
parties, each restart first searches the subspace where exchangeable parties
share settings, then polishes in the full angle space.

``optimize_state_and_settings`` alternates between the settings search and a
search over state amplitudes (see-saw).

``check_pure_entangled_violation`` builds settings that violate the
symmetrized three-setting CH inequality: project all but two parties so that
the remaining pair is left entangled, make the pair's first measurement
constant, and choose the pair's CH settings from the correlation matrix of
the post-selected state.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .behavior import MeasurementSetting, Scenario, joint_probabilities
from .inequalities import build_symmetrized_CH, evaluate
from .local_polytope import VisibilityLP, VisibilityResult
from .states import (
    PAULI,
    PureState,
    bloch_vector,
    build_dicke,
    build_ghz,
    build_partially_product,
    concurrence,
    random_pure_state,
    symmetry_classes,
)

logger = logging.getLogger(__name__)

HINT_FAMILIES = ("xy-plane", "xz-plane", "paper-dicke", "xz-scan")
SCAN_POINTS = 12
AGREE_TOL = 1e-4
VIOLATION_TOL = 1e-9


@dataclass(frozen=True)
class OptimizationConfig:
    restarts: int = 20
    max_iterations: int = 400
    tolerance: float = 1e-6
    seed: int = 0
    hints: tuple = HINT_FAMILIES
    allow_large: bool = False
    tie_symmetric: bool = True
    simplex_step: float = 0.3
    workers: int = 1

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        unknown = set(self.hints) - set(HINT_FAMILIES)
        if unknown:
            raise ValueError(f"unknown hint families: {sorted(unknown)}")
        object.__setattr__(self, "hints", tuple(self.hints))

    def to_json(self):
        d = asdict(self)
        d["hints"] = list(self.hints)
        return d


@dataclass
class CriticalVisibilityEstimate:
    v_crit: float
    best_settings: list
    certificate: VisibilityResult
    restarts_agreeing: int
    restart_values: list = field(default_factory=list)
    start_labels: list = field(default_factory=list)
    converged: bool = True
    n_evaluations: int = 0

    @property
    def angles(self):
        return settings_to_angles(self.best_settings)

    def to_json(self, seed=None, config=None, include_functional=True):
        cert = self.certificate.to_json()
        if not include_functional:
            cert.pop("functional")
        out = {
            "v_crit": self.v_crit,
            "settings": [[s.to_json() for s in party] for party in self.best_settings],
            "certificate": cert,
            "restarts_agreeing": self.restarts_agreeing,
            "restart_values": self.restart_values,
            "start_labels": self.start_labels,
            "converged": self.converged,
            "n_evaluations": self.n_evaluations,
        }
        if seed is not None:
            out["seed"] = seed
        if config is not None:
            out["config"] = config.to_json()
        return out


# ---------------------------------------------------------------------------
# angle parameterization


def settings_from_angles(angles) -> list:
    angles = np.asarray(angles).reshape(-1, np.asarray(angles).shape[-2], 2)
    return [[MeasurementSetting.projective(t, p) for t, p in party] for party in angles]


def settings_to_angles(settings) -> np.ndarray:
    return np.array([[[s.theta, s.phi] for s in party] for party in settings])


def _packed_cg_ops(angles):
    """Packed (identity, label-0 projector per setting) operators for the kernel."""
    th, ph = angles[..., 0], angles[..., 1]
    nx, ny, nz = np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)
    n, m = th.shape
    packed = np.zeros((n, m + 1, 4), dtype=np.complex128)
    packed[:, 0, 0] = packed[:, 0, 3] = 1.0
    packed[:, 1:, 0] = (1 + nz) / 2
    packed[:, 1:, 1] = (nx + 1j * ny) / 2
    packed[:, 1:, 2] = (nx - 1j * ny) / 2
    packed[:, 1:, 3] = (1 - nz) / 2
    return packed, np.full(n, m + 1, dtype=np.int64)


def _contract(rho, packed, ks):
    if _kernels.BACKEND == "numba":
        return _kernels._contract_numba(rho, packed, ks)
    return _kernels._contract_numpy(rho, packed, ks)


class _Objective:
    """v*(settings) for a fixed pure state, reusing one warm-started LP."""

    def __init__(self, state: PureState, scenario: Scenario, allow_large=False, lp=None):
        m = set(scenario.settings_per_party)
        if len(m) != 1:
            raise ValueError("angle optimization needs the same number of settings for every party")
        self.m = m.pop()
        self.n = scenario.n_parties
        self.scenario = scenario
        self.lp = lp or VisibilityLP(scenario, allow_large=allow_large)
        self.set_state(state)

    def set_state(self, state: PureState):
        self.state = state
        self.rho = _kernels.interleaved_density(state.amplitudes)

    def value_of_angles(self, angles) -> float:
        packed, ks = _packed_cg_ops(np.asarray(angles).reshape(self.n, self.m, 2))
        return self.lp.solve(_contract(self.rho, packed, ks))

    def value_of_state_vector(self, vec, angles) -> float:
        nrm = np.linalg.norm(vec)
        if nrm < 1e-12:
            return 1.0
        rho = _kernels.interleaved_density(vec / nrm)
        packed, ks = _packed_cg_ops(np.asarray(angles).reshape(self.n, self.m, 2))
        return self.lp.solve(_contract(rho, packed, ks))


# ---------------------------------------------------------------------------
# hints


def _bloch_angles(vec):
    vec = np.asarray(vec, float)
    vec = vec / np.linalg.norm(vec)
    th = math.acos(max(-1.0, min(1.0, vec[2])))
    ph = math.atan2(vec[1], vec[0]) if abs(math.sin(th)) > 1e-12 else 0.0
    return th, ph


def _orthogonal(vec):
    vec = np.asarray(vec, float)
    trial = np.array([1.0, 0, 0]) if abs(vec[0]) < 0.9 else np.array([0, 0, 1.0])
    out = trial - (trial @ vec) * vec
    return out / np.linalg.norm(out)


def hint_angles(name: str, state: PureState, m: int = 2):
    """Angle array (N, 2, 2) for a named settings family, or None if not applicable.

    xy-plane
        Parties with a pure marginal measure against their Bloch vector (the
        label-1 projector fires on their local state); the remaining "core"
        parties measure in the equatorial plane at angles alpha, alpha + pi/2
        with alpha = 0 for an odd core and -pi/(4 * core) for an even one.
    xz-plane
        Every party measures -z and x.
    paper-dicke
        Parties 1, 2 use Tsirelson settings for (|01> + |10>)/sqrt2 in the
        x-z plane, the others -z and x.
    xz-scan
        Not a fixed family: every party gets the same two x-z plane settings,
        picked by a grid scan (see ``_xz_scan``); handled by the caller.
    """
    if m != 2:
        return None
    n = state.n_qubits
    out = np.zeros((n, 2, 2))
    if name == "xy-plane":
        blochs = [bloch_vector(state, i) for i in range(n)]
        pure = [np.linalg.norm(b) > 1 - 1e-9 for b in blochs]
        core = n - sum(pure)
        alpha = 0.0 if core % 2 else -math.pi / (4 * max(core, 1))
        for i in range(n):
            if pure[i]:
                out[i, 0] = _bloch_angles(-blochs[i])
                out[i, 1] = _bloch_angles(_orthogonal(blochs[i] / np.linalg.norm(blochs[i])))
            else:
                out[i, 0] = (math.pi / 2, alpha)
                out[i, 1] = (math.pi / 2, alpha + math.pi / 2)
        return out
    if name == "xz-scan":
        return None
    if name == "xz-plane":
        out[:, 0] = (math.pi, 0.0)
        out[:, 1] = (math.pi / 2, 0.0)
        return out
    if name == "paper-dicke":
        if n < 2:
            return None
        out[:, 0] = (math.pi, 0.0)
        out[:, 1] = (math.pi / 2, 0.0)
        out[0, 0] = (0.0, 0.0)
        out[0, 1] = (math.pi / 2, 0.0)
        out[1, 0] = (3 * math.pi / 4, 0.0)
        out[1, 1] = (3 * math.pi / 4, math.pi)
        return out
    raise ValueError(f"unknown hint family {name!r}")


# ---------------------------------------------------------------------------
# Nelder-Mead plumbing


def _nelder_mead(fun, x0, maxiter, step, fatol):
    x0 = np.asarray(x0, float)
    dim = x0.size
    simplex = np.vstack([x0] + [x0 + step * np.eye(dim)[i] for i in range(dim)])
    res = minimize(
        fun,
        x0,
        method="Nelder-Mead",
        options={
            "maxiter": maxiter,
            "maxfev": 4 * maxiter * max(dim, 1),
            "xatol": 1e-6,
            "fatol": fatol,
            "adaptive": dim > 6,
            "initial_simplex": simplex,
        },
    )
    return res.x, float(res.fun), res.status == 0, int(res.nfev)


def _tie_map(state: PureState, scenario: Scenario):
    classes = symmetry_classes(state)
    owner = np.zeros(scenario.n_parties, dtype=int)
    for c, members in enumerate(classes):
        owner[list(members)] = c
    return classes, owner


def _respects_ties(angles, classes, tol=1e-12):
    return all(np.max(np.abs(angles[list(c)] - angles[c[0]])) < tol for c in classes)


def _run_restart(obj: _Objective, start, classes, owner, cfg: OptimizationConfig, basis=None):
    """Returns (value, angles, converged, n_evals, LP basis at the result).

    ``basis`` is the optimal LP basis at ``start`` when known (hints); the LP
    restarts cold otherwise.  Either way the run does not depend on history.
    """
    n, m = obj.n, obj.m
    obj.lp.set_basis(basis)
    evals = 0
    converged = True
    x = np.asarray(start, float).reshape(n, m, 2)
    tied = cfg.tie_symmetric and len(classes) < n and _respects_ties(x, classes)
    if tied:
        reps = np.array([c[0] for c in classes])

        def tied_fun(y):
            return obj.value_of_angles(y.reshape(len(classes), m, 2)[owner])

        y, _, ok, k = _nelder_mead(tied_fun, x[reps].ravel(), cfg.max_iterations, cfg.simplex_step, cfg.tolerance)
        evals += k
        converged &= ok
        x = y.reshape(len(classes), m, 2)[owner]
    xf, val, ok, k = _nelder_mead(
        obj.value_of_angles,
        x.ravel(),
        cfg.max_iterations,
        cfg.simplex_step / 3 if tied else cfg.simplex_step,
        cfg.tolerance,
    )
    evals += k
    converged &= ok
    xf = xf.reshape(n, m, 2)
    obj.value_of_angles(xf)
    return val, xf, converged, evals + 1, obj.lp.basis()


def _random_start(rng, n, m, classes, owner, tie):
    if tie and len(classes) < n:
        base = np.stack(
            [rng.uniform(0, math.pi, (len(classes), m)), rng.uniform(0, 2 * math.pi, (len(classes), m))], -1
        )
        return base[owner]
    return np.stack([rng.uniform(0, math.pi, (n, m)), rng.uniform(0, 2 * math.pi, (n, m))], -1)


def _restart_worker(payload):
    amps, spp, cfg, start, basis = payload
    state = PureState(len(spp), amps)
    sc = Scenario(spp)
    obj = _Objective(state, sc, cfg.allow_large)
    classes, owner = _tie_map(state, sc)
    return _run_restart(obj, start, classes, owner, cfg, basis)


def _xz_scan(obj: _Objective, points=SCAN_POINTS):
    """Best identical x-z plane settings for all parties on a theta grid.

    theta and theta + pi differ only by an outcome relabeling and the two
    settings can be swapped, so unordered pairs on [0, pi) cover the grid.
    Rows alternate direction to keep consecutive LPs close for the warm start.
    """
    grid = np.linspace(0, math.pi, points, endpoint=False)
    best = (math.inf, None)
    x = np.zeros((obj.n, obj.m, 2))
    obj.lp.reset()
    for i in range(points - 1):
        cols = range(i + 1, points) if i % 2 == 0 else range(points - 1, i, -1)
        for j in cols:
            x[:, 0, 0], x[:, 1, 0] = grid[i], grid[j]
            val = obj.value_of_angles(x)
            if val < best[0] - 1e-12:
                best = (val, x.copy())
    return best[1]


def _plan_starts(obj: _Objective, state, cfg, classes, owner):
    n, m = obj.n, obj.m
    hinted = []
    for name in cfg.hints:
        if name == "xz-scan":
            h = _xz_scan(obj) if m == 2 else None
        else:
            h = hint_angles(name, state, m)
        if h is not None:
            obj.lp.reset()
            hinted.append((obj.value_of_angles(h), name, h, obj.lp.basis()))
    hinted.sort(key=lambda t: t[0])  # stable: ties keep family order
    starts, labels, bases = [], [], []
    for _, name, h, basis in hinted[: cfg.restarts]:
        starts.append(h)
        labels.append(name)
        bases.append(basis)
    r = 0
    while len(starts) < cfg.restarts:
        rng = np.random.default_rng([cfg.seed, r])
        starts.append(_random_start(rng, n, m, classes, owner, cfg.tie_symmetric))
        labels.append(f"random-{r}")
        bases.append(None)
        r += 1
    return starts, labels, bases, hinted


def optimize_settings(state: PureState, scenario: Scenario | None = None, cfg: OptimizationConfig | None = None):
    """Minimize the maximal local visibility over measurement directions."""
    cfg = cfg or OptimizationConfig()
    scenario = scenario or Scenario.uniform(state.n_qubits, 2)
    if scenario.n_parties != state.n_qubits:
        raise ValueError("scenario and state disagree on the number of parties")
    obj = _Objective(state, scenario, cfg.allow_large)
    classes, owner = _tie_map(state, scenario)
    starts, labels, bases, hinted = _plan_starts(obj, state, cfg, classes, owner)

    if cfg.workers > 1:
        payloads = [(state.amplitudes, scenario.settings_per_party, cfg, s, b) for s, b in zip(starts, bases)]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            runs = list(pool.map(_restart_worker, payloads))
    else:
        runs = [_run_restart(obj, s, classes, owner, cfg, b) for s, b in zip(starts, bases)]

    values = [r[0] for r in runs]
    best = int(np.argmin(values))  # first minimum -> lowest restart index
    best_angles, best_basis = runs[best][1], runs[best][4]
    hint_best = min((h[0] for h in hinted), default=math.inf)
    if hint_best < values[best]:  # cannot happen with NM, kept as a guard
        best_angles, best_basis = next((h[2], h[3]) for h in hinted if h[0] == hint_best)

    settings = settings_from_angles(best_angles)
    obj.lp.set_basis(best_basis)
    v = obj.value_of_angles(best_angles)
    cert = obj.lp.result(joint_probabilities(state, settings).table)
    agreeing = sum(abs(val - v) <= AGREE_TOL for val in values)
    logger.info("optimize_settings: v_crit=%.6f (%d/%d restarts agree)", v, agreeing, len(values))
    return CriticalVisibilityEstimate(
        v_crit=v,
        best_settings=settings,
        certificate=cert,
        restarts_agreeing=int(agreeing),
        restart_values=[float(x) for x in values],
        start_labels=labels,
        converged=all(r[2] for r in runs),
        n_evaluations=int(sum(r[3] for r in runs)) + len(hinted) + 1,
    )


# ---------------------------------------------------------------------------
# state + settings see-saw


def _state_to_params(state: PureState):
    return np.concatenate([state.amplitudes.real, state.amplitudes.imag])


def _params_to_vec(x):
    half = x.size // 2
    return x[:half] + 1j * x[half:]


def candidate_states(n: int):
    """Structured starting states: GHZ_n, |0..0>|GHZ_{n-k}>, W_n."""
    out = [("ghz", build_ghz(n))] if n >= 2 else []
    for k in range(1, n - 1):
        out.append((f"prod{k}-ghz{n - k}", build_partially_product(k, build_ghz(n - k))))
    if n >= 3:
        out.append(("w", build_dicke(n, 1)))
    return out


def optimize_state_and_settings(
    n: int,
    scenario: Scenario | None = None,
    cfg: OptimizationConfig | None = None,
    *,
    max_n: int = 5,
    rounds: int = 5,
    settings_restarts: int = 3,
):
    """See-saw over settings and pure states; returns (state, estimate)."""
    cfg = cfg or OptimizationConfig()
    if n > max_n:
        raise ValueError(f"state optimization limited to n <= {max_n} (raise max_n to override)")
    scenario = scenario or Scenario.uniform(n, 2)
    inner = OptimizationConfig(
        restarts=settings_restarts,
        max_iterations=cfg.max_iterations,
        tolerance=cfg.tolerance,
        seed=cfg.seed,
        hints=cfg.hints,
        allow_large=cfg.allow_large,
        tie_symmetric=cfg.tie_symmetric,
        simplex_step=cfg.simplex_step,
    )
    cands = candidate_states(n)
    r = 0
    while len(cands) < cfg.restarts:
        cands.append((f"random-{r}", random_pure_state(n, [cfg.seed, 10_000 + r])))
        r += 1

    best = None
    for label, state in cands:
        est = optimize_settings(state, scenario, inner)
        angles = est.angles
        val = est.v_crit
        obj = _Objective(state, scenario, cfg.allow_large)
        x_state = _state_to_params(state)
        for _ in range(rounds):
            obj.lp.reset()
            x_state, v_state, _, _ = _nelder_mead(
                lambda x, obj=obj, angles=angles: obj.value_of_state_vector(_params_to_vec(x), angles),
                x_state,
                cfg.max_iterations,
                0.1,
                cfg.tolerance,
            )
            obj.set_state(PureState.from_vector(_params_to_vec(x_state)))
            obj.lp.reset()
            xa, v_set, _, _ = _nelder_mead(obj.value_of_angles, angles.ravel(), cfg.max_iterations, 0.1, cfg.tolerance)
            angles = xa.reshape(angles.shape)
            new_val = min(v_state, v_set)
            improved = val - new_val
            val = min(val, new_val)
            if improved < cfg.tolerance:
                break
        state_final = PureState.from_vector(_params_to_vec(x_state))
        if best is None or val < best[0] - 1e-12:
            best = (val, state_final, angles, label)

    val, state, angles, label = best
    settings = settings_from_angles(angles)
    obj = _Objective(state, scenario, cfg.allow_large)
    v = obj.value_of_angles(angles)
    cert = obj.lp.result(joint_probabilities(state, settings).table)
    est = CriticalVisibilityEstimate(v, settings, cert, 1, [val], [label])
    return state, est


# ---------------------------------------------------------------------------
# universal violation by pure entangled states


@dataclass
class ProjectionResult:
    keep: tuple
    directions: dict  # measured party -> Bloch vector of the projected state
    post_state: np.ndarray
    probability: float
    concurrence: float
    failed: bool = False


@dataclass
class ViolationReport:
    violated: bool
    value: float
    pair: tuple | None
    settings: list | None
    concurrence: float
    probability: float
    branch_values: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "violated": self.violated,
            "value": self.value,
            "pair": list(self.pair) if self.pair else None,
            "concurrence": self.concurrence,
            "probability": self.probability,
            "settings": [[s.to_json() for s in p] for p in self.settings] if self.settings else None,
            "branch_values": {f"{i},{j}": v for (i, j), v in self.branch_values.items()},
        }


def _project(state: PureState, keep, angles):
    """Unnormalized state of ``keep`` after projecting the others on (theta, phi)."""
    n = state.n_qubits
    t = state.tensor()
    measured = [k for k in range(n) if k not in keep]
    # contract from the highest axis down so indices stay valid
    for k, (th, ph) in sorted(zip(measured, angles), key=lambda z: -z[0]):
        bra = np.array([math.cos(th / 2), np.exp(-1j * ph) * math.sin(th / 2)])
        t = np.tensordot(t, bra, axes=([k], [0]))
    return t.reshape(-1)


def max_entangling_projections(state: PureState, keep, cfg: OptimizationConfig | None = None) -> ProjectionResult:
    """Local projections on all parties but ``keep`` maximizing the pair's concurrence."""
    cfg = cfg or OptimizationConfig(restarts=8)
    n = state.n_qubits
    if n < 3:
        raise ValueError("need at least three qubits")
    keep = tuple(sorted(keep))
    measured = [k for k in range(n) if k not in keep]
    d = len(measured)

    def post(x):
        vec = _project(state, keep, x.reshape(d, 2))
        return vec, float(np.vdot(vec, vec).real)

    def neg_conc(x):
        vec, p = post(x)
        if p < 1e-12:
            return 0.0
        return -concurrence(vec / math.sqrt(p))

    fixed = [np.zeros((d, 2)), np.tile([math.pi, 0.0], (d, 1)), np.tile([math.pi / 2, 0.0], (d, 1))]
    starts = fixed[: cfg.restarts]
    r = 0
    while len(starts) < cfg.restarts:
        rng = np.random.default_rng([cfg.seed, 7919, *keep, r])
        starts.append(np.stack([np.arccos(rng.uniform(-1, 1, d)), rng.uniform(0, 2 * math.pi, d)], -1))
        r += 1

    best_x, best_c = None, -1.0
    for s in starts:
        x = s.ravel()
        f = neg_conc(x)
        if f > -(1 - 1e-12):  # already maximal: keep the start (and its probability)
            x, f, _, _ = _nelder_mead(neg_conc, x, cfg.max_iterations, 0.4, 1e-12)
        _, p = post(x)
        if p < 1e-12:
            continue
        if -f > best_c + 1e-12:
            best_x, best_c = x, -f
        if best_c > 1 - 1e-9:
            break

    if best_x is None:
        return ProjectionResult(keep, {}, np.zeros(4, complex), 0.0, 0.0, failed=True)
    vec, p = post(best_x)
    ang = best_x.reshape(d, 2)
    dirs = {
        k: np.array([math.sin(t) * math.cos(f), math.sin(t) * math.sin(f), math.cos(t)])
        for k, (t, f) in zip(measured, ang)
    }
    return ProjectionResult(keep, dirs, vec / math.sqrt(p), p, concurrence(vec / math.sqrt(p)))


def optimal_ch_directions(two_qubit):
    """Bloch directions (a2, a3, b2, b3) maximizing CH on a two-qubit pure state.

    From the SVD ``T = U S V^T`` of the correlation matrix: a2, a3 = u1, u2 and
    b2, b3 = cos t v1 +- sin t v2 with tan t = s2 / s1, giving
    CHSH = 2 sqrt(s1^2 + s2^2) and CH = (CHSH - 2) / 4.
    """
    psi = np.asarray(two_qubit, complex).reshape(4)
    paulis = [PAULI[a] for a in "xyz"]
    t = np.array([[np.vdot(psi, np.kron(p, q) @ psi).real for q in paulis] for p in paulis])
    u, s, vt = np.linalg.svd(t)
    ang = math.atan2(s[1], s[0])
    b2 = math.cos(ang) * vt[0] + math.sin(ang) * vt[1]
    b3 = math.cos(ang) * vt[0] - math.sin(ang) * vt[1]
    return u[:, 0], u[:, 1], b2, b3, float(2 * math.hypot(s[0], s[1]))


def symmetrized_ch_settings(n: int, proj: ProjectionResult):
    """Three settings per party realizing the construction for one kept pair."""
    i, j = proj.keep
    a2, a3, b2, b3, _ = optimal_ch_directions(proj.post_state)
    settings = []
    for k in range(n):
        if k == i:
            settings.append(
                [MeasurementSetting.constant(0), MeasurementSetting.along(a2), MeasurementSetting.along(a3)]
            )
        elif k == j:
            settings.append(
                [MeasurementSetting.constant(0), MeasurementSetting.along(b2), MeasurementSetting.along(b3)]
            )
        else:
            # label 1 of -m fires on (I + m.sigma)/2, the projected state
            settings.append(
                [
                    MeasurementSetting.along(-proj.directions[k]),
                    MeasurementSetting.along("z"),
                    MeasurementSetting.along("x"),
                ]
            )
    return settings


def check_pure_entangled_violation(state: PureState, cfg: OptimizationConfig | None = None) -> ViolationReport:
    """Search for a violation of the symmetrized CH inequality (local bound 0).

    Never claims locality: a non-violation only reports the best value found.
    """
    cfg = cfg or OptimizationConfig(restarts=8)
    n = state.n_qubits
    if n < 3:
        raise ValueError("need at least three qubits")
    expr = build_symmetrized_CH(n)
    best = ViolationReport(False, -math.inf, None, None, 0.0, 0.0)
    for pair in itertools.combinations(range(n), 2):
        proj = max_entangling_projections(state, pair, cfg)
        if proj.failed:
            continue
        settings = symmetrized_ch_settings(n, proj)
        value = evaluate(expr, joint_probabilities(state, settings))
        best.branch_values[pair] = value
        if value > best.value:
            best.value, best.pair, best.settings = value, pair, settings
            best.concurrence, best.probability = proj.concurrence, proj.probability
    best.violated = best.value > VIOLATION_TOL
    return best
