"""Local polytope membership and maximal local visibility by linear programming.

The LP is

    maximize v  s.t.  sum_s q_s D_s = v * P + (1 - v) * W,  q >= 0,  0 <= v <= 1,

where ``D_s`` are deterministic-strategy behaviors, ``P`` the quantum
behavior and ``W`` the noise behavior.  Two equivalent coordinate systems are
supported:

``"cg"``
    Collins-Gisin coordinates p(all of S output 0 | x_S).  Valid for
    no-signaling behaviors, which covers every quantum behavior.  The
    constraint matrix is a Kronecker product of tiny per-party blocks and the
    empty-subset row is exactly the normalization ``sum_s q_s = 1``.
``"full"``
    The raw table.  The last outcome row of each joint setting is dropped
    (it is implied by normalization) and ``sum_s q_s = 1`` is added.

Both map their dual solution back to a Bell functional on the full table.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import reduce

import highspy
import numpy as np
import scipy.sparse as sp

from .behavior import Behavior, Scenario, uniform_behavior

logger = logging.getLogger(__name__)

STRATEGY_CAP = 2**22
# Largest strategy count solved without an explicit opt-in (N = 6, two settings).
DESK_STRATEGY_LIMIT = 4**6

LP_FEAS_TOL = 1e-9


class ScenarioTooLarge(ValueError):
    """Strategy count beyond the configured cap (or desk limit without opt-in)."""


class LPSolverError(RuntimeError):
    """The LP solver returned a non-optimal status."""


def check_size(scenario: Scenario, cap=STRATEGY_CAP, allow_large=False):
    count = scenario.n_strategies
    if count > cap:
        raise ScenarioTooLarge(f"{count} deterministic strategies exceed the cap of {cap}")
    if count > DESK_STRATEGY_LIMIT and not allow_large:
        raise ScenarioTooLarge(
            f"{count} deterministic strategies exceed the desk limit of {DESK_STRATEGY_LIMIT}; "
            "pass allow_large=True (CLI: --allow-large) to solve anyway"
        )


# ---------------------------------------------------------------------------
# deterministic strategies


@dataclass(frozen=True)
class DeterministicStrategy:
    """Outcome per (party, setting); ``assignments[i][x]`` in {0, 1}."""

    assignments: tuple

    @property
    def index(self) -> int:
        bits = "".join(str(b) for party in self.assignments for b in party)
        return int(bits, 2) if bits else 0

    @classmethod
    def from_index(cls, index: int, scenario: Scenario):
        total = sum(scenario.settings_per_party)
        bits = format(index, f"0{total}b")
        out, pos = [], 0
        for m in scenario.settings_per_party:
            out.append(tuple(int(b) for b in bits[pos : pos + m]))
            pos += m
        return cls(tuple(out))


def enumerate_strategies(scenario: Scenario, cap=STRATEGY_CAP):
    """Yield every deterministic strategy once, in lexicographic bit order."""
    if scenario.n_strategies > cap:
        raise ScenarioTooLarge(f"{scenario.n_strategies} strategies exceed the cap of {cap}")
    for idx in range(scenario.n_strategies):
        yield DeterministicStrategy.from_index(idx, scenario)


def strategy_behavior(s: DeterministicStrategy, scenario: Scenario) -> Behavior:
    if [len(a) for a in s.assignments] != list(scenario.settings_per_party):
        raise ValueError("strategy does not match scenario")
    n = scenario.n_parties
    table = np.zeros((scenario.n_joint_settings, scenario.n_outcomes))
    for xi, xs in enumerate(scenario.joint_settings()):
        a = 0
        for i in range(n):
            a = (a << 1) | s.assignments[i][xs[i]]
        table[xi, a] = 1.0
    return Behavior(scenario, table)


def _local_cg_block(m):
    """Rows: [no constraint, setting 0 gives 0, ..., setting m-1 gives 0]."""
    cols = np.arange(2**m)
    blk = np.ones((1 + m, 2**m))
    for x in range(m):
        blk[1 + x] = ((cols >> (m - 1 - x)) & 1) == 0
    return blk


def _local_full_block(m):
    """Rows (x, a) interleaved: [strategy outputs a on setting x]."""
    cols = np.arange(2**m)
    blk = np.zeros((2 * m, 2**m))
    for x in range(m):
        bit = (cols >> (m - 1 - x)) & 1
        blk[2 * x] = bit == 0
        blk[2 * x + 1] = bit == 1
    return blk


def cg_strategy_matrix(scenario: Scenario) -> sp.csc_matrix:
    blocks = [sp.csr_matrix(_local_cg_block(m)) for m in scenario.settings_per_party]
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), blocks).tocsc()


def full_strategy_matrix(scenario: Scenario) -> sp.csc_matrix:
    """Rows in ``Behavior.table.ravel()`` order, one column per strategy."""
    spp = scenario.settings_per_party
    n = scenario.n_parties
    blocks = [sp.csr_matrix(_local_full_block(m)) for m in spp]
    inter = reduce(lambda a, b: sp.kron(a, b, format="csr"), blocks)
    shape = sum(((m, 2) for m in spp), ())
    perm = np.arange(inter.shape[0]).reshape(shape)
    perm = perm.transpose(list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))).reshape(-1)
    return inter[perm].tocsc()


def white_noise_cg(scenario: Scenario) -> np.ndarray:
    return reduce(np.kron, [np.r_[1.0, np.full(m, 0.5)] for m in scenario.settings_per_party])


def cg_to_table_functional(g, scenario: Scenario) -> np.ndarray:
    """Pull a CG-space functional back to the full table: f = M^T g."""
    spp = scenario.settings_per_party
    n = scenario.n_parties
    maps = []
    for m in spp:
        mi = np.zeros((1 + m, m, 2))
        mi[0, 0, :] = 1.0
        for x in range(m):
            mi[1 + x, x, 0] = 1.0
        maps.append(mi)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    xs, outs, rows = letters[:n], letters[n : 2 * n], letters[2 * n : 3 * n]
    spec = rows + "," + ",".join(rows[i] + xs[i] + outs[i] for i in range(n)) + "->" + xs + outs
    g = np.asarray(g).reshape(tuple(1 + m for m in spp))
    f = np.einsum(spec, g, *maps, optimize=True)
    return f.reshape(scenario.n_joint_settings, scenario.n_outcomes)


# ---------------------------------------------------------------------------
# LP core


@dataclass
class VisibilityResult:
    """Outcome of a maximal-local-visibility LP.

    ``certificate`` is a Bell functional on the full behavior table (same
    shape).  It satisfies ``certificate . D <= local_bound`` for every
    deterministic strategy and ``certificate . B(v) - local_bound`` changes
    sign at ``v_star`` (it is proportional to ``v - v_star``).
    """

    v_star: float
    weights: dict
    certificate: np.ndarray
    local_bound: float
    quantum_value: float
    noise_value: float
    scenario: Scenario
    formulation: str = "cg"
    degenerate: bool = False
    meta: dict = field(default_factory=dict)

    def functional_value(self, b: Behavior) -> float:
        return float(np.sum(self.certificate * b.table))

    def to_json(self) -> dict:
        return {
            "functional": [float(x) for x in self.certificate.ravel()],
            "local_bound": float(self.local_bound),
            "quantum_value": float(self.quantum_value),
            "v_star": float(self.v_star),
            "noise_value": float(self.noise_value),
            "settings_per_party": list(self.scenario.settings_per_party),
            "degenerate": bool(self.degenerate),
        }


def _highs(n_rows, a: sp.csc_matrix, cost, upper, rhs):
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("solver", "simplex")
    h.setOptionValue("primal_feasibility_tolerance", LP_FEAS_TOL)
    h.setOptionValue("dual_feasibility_tolerance", LP_FEAS_TOL)
    h.setOptionValue("threads", 1)
    n_col = a.shape[1]
    lp = highspy.HighsLp()
    lp.num_col_ = n_col
    lp.num_row_ = n_rows
    lp.col_cost_ = np.asarray(cost, float)
    lp.col_lower_ = np.zeros(n_col)
    lp.col_upper_ = np.asarray(upper, float)
    lp.row_lower_ = np.asarray(rhs, float)
    lp.row_upper_ = np.asarray(rhs, float)
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = a.indptr
    lp.a_matrix_.index_ = a.indices
    lp.a_matrix_.value_ = a.data
    lp.a_matrix_.num_col_ = n_col
    lp.a_matrix_.num_row_ = n_rows
    h.passModel(lp)
    return h


def _optimal(h) -> bool:
    return h.getModelStatus() == highspy.HighsModelStatus.kOptimal


class _ColumnLP:
    """One-shot model ``max v : R q + v (W - P) = W``; handles v* = 0 exactly."""

    def __init__(self, rows: sp.csc_matrix, noise, quantum):
        n_rows, n_strat = rows.shape
        a = sp.hstack([rows, sp.csc_matrix((noise - quantum).reshape(-1, 1))], format="csc")
        cost = np.zeros(n_strat + 1)
        cost[-1] = -1.0
        upper = np.full(n_strat + 1, highspy.kHighsInf)
        upper[-1] = 1.0
        self._h = _highs(n_rows, a, cost, upper, noise)
        self._h.run()
        if not _optimal(self._h):
            raise LPSolverError(
                f"HiGHS status: {self._h.modelStatusToString(self._h.getModelStatus())} (is the noise behavior local?)"
            )

    def primal(self):
        x = np.asarray(self._h.getSolution().col_value)
        return x[:-1], float(np.clip(x[-1], 0.0, 1.0)) + 0.0  # no -0.0

    def row_dual(self):
        return np.asarray(self._h.getSolution().row_dual, dtype=float)


class _LPCore:
    """Persistent HiGHS model of the visibility LP with the behavior in the RHS.

    With ``t = 1/v - 1`` and ``q' = q / v`` the problem
    ``max v : R q = v P + (1 - v) W, q >= 0`` becomes
    ``min t : R q' - t W = P, q', t >= 0``.  Only the right-hand side depends
    on the quantum behavior, so the previous optimal basis stays dual feasible
    and a warm-started dual simplex re-solve is cheap.

    If no ``v > 0`` is feasible (noise on the polytope boundary) the model is
    infeasible; that solve falls back to :class:`_ColumnLP`.
    """

    def __init__(self, rows: sp.csc_matrix, noise_rhs: np.ndarray):
        self.rows = rows.tocsc()
        self.noise = np.asarray(noise_rhs, dtype=float)
        n_rows, n_strat = self.rows.shape
        self.n_rows, self.n_strat = n_rows, n_strat
        a = sp.hstack([self.rows, sp.csc_matrix(-self.noise.reshape(-1, 1))], format="csc")
        cost = np.zeros(n_strat + 1)
        cost[-1] = 1.0
        self._h = _highs(n_rows, a, cost, np.full(n_strat + 1, highspy.kHighsInf), self.noise)
        self._quantum = None
        self._fallback = None

    def reset(self):
        self._h.clearSolver()

    def basis(self):
        """Current simplex basis as (column, row) status codes, or None."""
        b = self._h.getBasis()
        if self._fallback is not None or not b.valid:
            return None
        return (
            np.array([int(s) for s in b.col_status], dtype=np.int8),
            np.array([int(s) for s in b.row_status], dtype=np.int8),
        )

    def set_basis(self, basis):
        """Restart from a basis returned by :meth:`basis`; None means cold."""
        if basis is None:
            self.reset()
            return
        b = highspy.HighsBasis()
        b.col_status = [highspy.HighsBasisStatus(int(s)) for s in basis[0]]
        b.row_status = [highspy.HighsBasisStatus(int(s)) for s in basis[1]]
        b.valid = True
        self._h.setBasis(b)

    def solve(self, quantum_rhs) -> float:
        quantum_rhs = np.asarray(quantum_rhs, dtype=float)
        self._quantum = quantum_rhs
        self._fallback = None
        idx = np.arange(self.n_rows, dtype=np.int32)
        self._h.changeRowsBounds(self.n_rows, idx, quantum_rhs, quantum_rhs)
        self._h.run()
        if not _optimal(self._h):
            # a stale basis occasionally stalls; retry cold before giving up
            self._h.clearSolver()
            self._h.run()
        if not _optimal(self._h):
            status = self._h.getModelStatus()
            if status not in (highspy.HighsModelStatus.kInfeasible, highspy.HighsModelStatus.kUnboundedOrInfeasible):
                raise LPSolverError(f"HiGHS status: {self._h.modelStatusToString(status)}")
            self._fallback = _ColumnLP(self.rows, self.noise, quantum_rhs)
            return self._fallback.primal()[1]
        t = float(self._h.getInfo().objective_function_value)
        return float(np.clip(1.0 / (1.0 + max(t, 0.0)), 0.0, 1.0))

    def primal(self):
        """Strategy weights (summing to 1) and v."""
        if self._fallback is not None:
            return self._fallback.primal()
        x = np.asarray(self._h.getSolution().col_value)
        scale = 1.0 + max(float(x[-1]), 0.0)
        return x[:-1] / scale, float(np.clip(1.0 / scale, 0.0, 1.0))

    def dual_functional(self) -> np.ndarray:
        """Row functional g with ``max_s g.R_s`` as local bound and g.(P - W) > 0.

        At the optimum ``g.B(v) - max_s g.R_s`` is proportional to ``v - v*``.
        """
        if self._fallback is not None:
            g = self._fallback.row_dual()
        else:
            g = np.asarray(self._h.getSolution().row_dual, dtype=float)
        if g @ (self._quantum - self.noise) < 0:
            g = -g
        return g


def _weights_dict(q, tol=1e-12):
    nz = np.flatnonzero(q > tol)
    return {int(i): float(q[i]) for i in nz}


class VisibilityLP:
    """Reusable Collins-Gisin LP for one scenario and noise model.

    ``solve`` accepts Collins-Gisin vectors (see
    :func:`bellvis.behavior.collins_gisin_vector`) and warm-starts from the
    previous basis; ``result`` expands the last solve into a
    :class:`VisibilityResult`.
    """

    def __init__(self, scenario: Scenario, noise_cg=None, *, cap=STRATEGY_CAP, allow_large=False):
        check_size(scenario, cap, allow_large)
        self.scenario = scenario
        self.noise_cg = white_noise_cg(scenario) if noise_cg is None else np.asarray(noise_cg, float)
        self._core = _LPCore(cg_strategy_matrix(scenario), self.noise_cg)
        self.n_solves = 0

    def reset(self):
        self._core.reset()

    def basis(self):
        return self._core.basis()

    def set_basis(self, basis):
        self._core.set_basis(basis)

    def solve(self, quantum_cg) -> float:
        self.n_solves += 1
        return self._core.solve(quantum_cg)

    def result(self, quantum_table=None, noise_table=None) -> VisibilityResult:
        core = self._core
        q, v = core.primal()
        v = float(np.clip(v, 0.0, 1.0))
        g = core.dual_functional()
        scores = core.rows.T @ g
        local_bound = float(scores.max())
        f = cg_to_table_functional(g, self.scenario)
        qv = float(g @ core._quantum) if quantum_table is None else float(np.sum(f * quantum_table))
        nv = float(g @ core.noise) if noise_table is None else float(np.sum(f * noise_table))
        return VisibilityResult(
            v_star=v,
            weights=_weights_dict(q),
            certificate=f,
            local_bound=local_bound,
            quantum_value=qv,
            noise_value=nv,
            scenario=self.scenario,
            formulation="cg",
            degenerate=v >= 1.0 - 1e-9,
        )


def _solve_full(quantum: Behavior, noise: Behavior) -> VisibilityResult:
    sc = quantum.scenario
    d = full_strategy_matrix(sc)
    n_out = sc.n_outcomes
    keep = np.array([i for i in range(d.shape[0]) if i % n_out != n_out - 1])
    rows = sp.vstack([d[keep], sp.csr_matrix(np.ones((1, d.shape[1])))], format="csc")
    w = np.r_[noise.table.ravel()[keep], 1.0]
    p = np.r_[quantum.table.ravel()[keep], 1.0]
    core = _LPCore(rows, w)
    core.solve(p)
    q, v = core.primal()
    v = float(np.clip(v, 0.0, 1.0))
    g = core.dual_functional()
    f = np.zeros(d.shape[0])
    f[keep] = g[:-1]
    f = f.reshape(sc.n_joint_settings, n_out)
    f[0] += g[-1]
    local_bound = float((d.T @ f.ravel()).max())
    return VisibilityResult(
        v_star=v,
        weights=_weights_dict(q),
        certificate=f,
        local_bound=local_bound,
        quantum_value=float(np.sum(f * quantum.table)),
        noise_value=float(np.sum(f * noise.table)),
        scenario=sc,
        formulation="full",
        degenerate=v >= 1.0 - 1e-9,
    )


SIGNALING_TOL = 1e-9


def max_local_visibility(
    quantum: Behavior,
    noise: Behavior | None = None,
    *,
    formulation: str = "auto",
    cap: int = STRATEGY_CAP,
    allow_large: bool = False,
) -> VisibilityResult:
    """Largest v such that ``v * quantum + (1 - v) * noise`` is local.

    ``noise`` defaults to the uniform (white-noise) behavior.  With
    ``formulation="auto"`` the compact Collins-Gisin LP is used when both
    behaviors are no-signaling, the full-table LP otherwise.
    """
    sc = quantum.scenario
    noise = uniform_behavior(sc) if noise is None else noise
    if noise.scenario != sc:
        raise ValueError("quantum and noise behaviors live in different scenarios")
    check_size(sc, cap, allow_large)
    if formulation == "auto":
        ns = max(quantum.signaling_error(), noise.signaling_error()) <= SIGNALING_TOL
        formulation = "cg" if ns else "full"
    if formulation == "full":
        return _solve_full(quantum, noise)
    if formulation != "cg":
        raise ValueError(f"unknown formulation {formulation!r}")
    lp = VisibilityLP(sc, noise.collins_gisin(), cap=cap, allow_large=allow_large)
    lp.solve(quantum.collins_gisin())
    return lp.result(quantum.table, noise.table)


def is_local(b: Behavior, tol: float = 1e-8, **kwargs):
    """Membership test; returns ``(local, VisibilityResult)``.

    When not local, the result's ``certificate`` is a Bell functional with
    ``certificate . b > local_bound``.
    """
    res = max_local_visibility(b, **kwargs)
    return res.v_star >= 1.0 - tol, res
