import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from bellvis.behavior import (
    Behavior,
    MeasurementSetting,
    Scenario,
    joint_probabilities,
    uniform_behavior,
)
from bellvis.inequalities import chsh_settings_ghz2, mermin_settings_ghz3
from bellvis.local_polytope import (
    DESK_STRATEGY_LIMIT,
    DeterministicStrategy,
    LPSolverError,
    ScenarioTooLarge,
    VisibilityLP,
    check_size,
    enumerate_strategies,
    full_strategy_matrix,
    is_local,
    max_local_visibility,
    strategy_behavior,
)
from bellvis.states import build_ghz, build_w, random_pure_state


def oracle_vstar(quantum: Behavior, noise: Behavior, tol=1e-8):
    """Bisection on full-table feasibility, with strategy vectors built by hand."""
    sc = quantum.scenario
    cols = []
    for assign in itertools.product(*[itertools.product((0, 1), repeat=m) for m in sc.settings_per_party]):
        col = np.zeros((sc.n_joint_settings, sc.n_outcomes))
        for xi, xs in enumerate(itertools.product(*[range(m) for m in sc.settings_per_party])):
            a = int("".join(str(assign[k][x]) for k, x in enumerate(xs)), 2)
            col[xi, a] = 1.0
        cols.append(col.ravel())
    d = np.array(cols).T

    def feasible(v):
        target = v * quantum.table.ravel() + (1 - v) * noise.table.ravel()
        res = linprog(np.zeros(d.shape[1]), A_eq=d, b_eq=target, bounds=(0, None), method="highs")
        return res.status == 0

    lo, hi = 0.0, 1.0
    if feasible(1.0):
        return 1.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if feasible(mid) else (lo, mid)
    return lo


def random_settings(rng, spp):
    return [[MeasurementSetting.projective(*rng.uniform(0, np.pi * np.array([1, 2]))) for _ in range(m)] for m in spp]


def test_chsh_tsirelson():
    b = joint_probabilities(build_ghz(2), chsh_settings_ghz2())
    for form in ("cg", "full"):
        assert max_local_visibility(b, formulation=form).v_star == pytest.approx(2**-0.5, abs=1e-8)


def test_mermin_ghz3():
    b = joint_probabilities(build_ghz(3), mermin_settings_ghz3())
    assert max_local_visibility(b).v_star == pytest.approx(0.5, abs=1e-8)


@pytest.mark.parametrize("seed,spp", [(0, (2, 2)), (1, (2, 3)), (2, (2, 2, 2)), (3, (3, 2, 1)), (4, (2, 2, 2))])
def test_against_linprog_oracle(seed, spp):
    rng = np.random.default_rng(seed)
    st = random_pure_state(len(spp), seed)
    b = joint_probabilities(st, random_settings(rng, spp))
    noise = uniform_behavior(b.scenario)
    want = oracle_vstar(b, noise)
    got_cg = max_local_visibility(b, formulation="cg").v_star
    got_full = max_local_visibility(b, formulation="full").v_star
    assert got_cg == pytest.approx(want, abs=1e-6)
    assert got_full == pytest.approx(want, abs=1e-6)


def _local_mixture(sc, rng, k=6):
    strats = list(enumerate_strategies(sc))
    w = rng.dirichlet(np.ones(k))
    return Behavior(
        sc, sum(wi * strategy_behavior(strats[i], sc).table for wi, i in zip(w, rng.choice(len(strats), k)))
    )


def test_non_white_noise_and_signaling_target():
    rng = np.random.default_rng(9)
    b = joint_probabilities(build_ghz(2), chsh_settings_ghz2())
    noise = _local_mixture(b.scenario, rng)
    want = oracle_vstar(b, noise)
    assert max_local_visibility(b, noise, formulation="full").v_star == pytest.approx(want, abs=1e-6)
    assert max_local_visibility(b, noise, formulation="cg").v_star == pytest.approx(want, abs=1e-6)
    # a signaling target forces the full-table formulation
    t = rng.random((4, 4))
    target = Behavior(b.scenario, t / t.sum(axis=1, keepdims=True))
    res = max_local_visibility(target, noise)
    assert res.formulation == "full"
    assert res.v_star == pytest.approx(oracle_vstar(target, noise), abs=1e-6)


def test_nonlocal_noise_is_solver_error():
    b = joint_probabilities(build_ghz(2), chsh_settings_ghz2())
    with pytest.raises(LPSolverError):
        max_local_visibility(b, b)


def test_certificate_sign_change():
    st = build_w(3)
    sett = [[MeasurementSetting.projective(np.pi, 0), MeasurementSetting.projective(np.pi / 2, 0)]] * 3
    b = joint_probabilities(st, sett)
    res = max_local_visibility(b)
    v = res.v_star
    assert 0 < v < 1
    noise = uniform_behavior(b.scenario)

    def gap(x):
        mix = Behavior(b.scenario, x * b.table + (1 - x) * noise.table)
        return res.functional_value(mix) - res.local_bound

    assert abs(gap(v)) <= 1e-6
    assert gap(min(1.0, v + 1e-3)) > 0
    assert gap(v - 1e-3) < 0
    assert res.quantum_value > res.local_bound >= res.noise_value - 1e-9


def test_certificate_bound_is_max_over_strategies():
    b = joint_probabilities(build_ghz(3), mermin_settings_ghz3())
    res = max_local_visibility(b)
    sc = b.scenario
    vals = [res.functional_value(strategy_behavior(s, sc)) for s in enumerate_strategies(sc)]
    assert max(vals) == pytest.approx(res.local_bound, abs=1e-9)


def test_vertex_soundness():
    sc = Scenario((2, 2, 2))
    for s in enumerate_strategies(sc):
        local, _ = is_local(strategy_behavior(s, sc))
        assert local, s


def test_convex_mixture_is_local():
    assert is_local(_local_mixture(Scenario((2, 3)), np.random.default_rng(0)))[0]


def test_strategy_index_roundtrip():
    sc = Scenario((2, 3, 1))
    for i in (0, 5, 37, 63):
        s = DeterministicStrategy.from_index(i, sc)
        assert s.index == i
    assert sum(1 for _ in enumerate_strategies(sc)) == sc.n_strategies


def test_full_strategy_matrix_columns_are_behaviors():
    sc = Scenario((2, 2))
    d = full_strategy_matrix(sc).toarray()
    for j, s in enumerate(enumerate_strategies(sc)):
        np.testing.assert_array_equal(d[:, j], strategy_behavior(s, sc).table.ravel())


def test_size_gates():
    with pytest.raises(ScenarioTooLarge):
        check_size(Scenario.uniform(7, 2))
    check_size(Scenario.uniform(7, 2), allow_large=True)
    with pytest.raises(ScenarioTooLarge):
        check_size(Scenario.uniform(12, 2), allow_large=True)
    assert Scenario.uniform(6, 2).n_strategies == DESK_STRATEGY_LIMIT


def test_warm_start_independent_of_history():
    sc = Scenario.uniform(3, 2)
    lp = VisibilityLP(sc)
    rng = np.random.default_rng(1)
    sts = [random_pure_state(3, k) for k in range(4)]
    cg = [joint_probabilities(s, random_settings(rng, (2, 2, 2))).collins_gisin() for s in sts]
    forward = [lp.solve(c) for c in cg]
    fresh = [VisibilityLP(sc).solve(c) for c in cg]
    np.testing.assert_allclose(forward, fresh, atol=1e-9)


def test_basis_round_trip():
    sc = Scenario.uniform(4, 2)
    lp = VisibilityLP(sc)
    rng = np.random.default_rng(2)
    a, b = (
        joint_probabilities(random_pure_state(4, k), random_settings(rng, (2,) * 4)).collins_gisin() for k in (5, 6)
    )
    va = lp.solve(a)
    saved = lp.basis()
    lp.solve(b)
    lp.set_basis(saved)
    assert lp.solve(a) == va
    assert lp._core._h.getInfo().simplex_iteration_count == 0
    assert VisibilityLP(sc).solve(a) == pytest.approx(va, abs=1e-9)
    lp.set_basis(None)  # cold
    assert lp.solve(a) == pytest.approx(va, abs=1e-9)


def test_scenario_mismatch():
    b = joint_probabilities(build_ghz(2), chsh_settings_ghz2())
    with pytest.raises(ValueError):
        max_local_visibility(b, uniform_behavior(Scenario((2, 3))))
    with pytest.raises(ValueError):
        max_local_visibility(b, formulation="dual")


def test_result_json():
    b = joint_probabilities(build_ghz(2), chsh_settings_ghz2())
    d = max_local_visibility(b).to_json()
    assert set(d) >= {"functional", "local_bound", "quantum_value", "v_star"}
    assert len(d["functional"]) == 16


def test_boundary_noise_zero_visibility():
    # noise at a polytope vertex: no admixture of the Tsirelson behavior stays local
    b = joint_probabilities(build_ghz(2), chsh_settings_ghz2())
    vertex = strategy_behavior(DeterministicStrategy(((0, 0), (0, 0))), b.scenario)
    want = oracle_vstar(b, vertex)
    for form in ("cg", "full"):
        res = max_local_visibility(b, vertex, formulation=form)
        assert res.v_star == pytest.approx(want, abs=1e-6)
        assert sum(res.weights.values()) == pytest.approx(1.0, abs=1e-9)
