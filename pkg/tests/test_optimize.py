import math

import numpy as np
import pytest

from bellvis.behavior import Scenario, joint_probabilities
from bellvis.inequalities import (
    build_symmetrized_CH,
    evaluate,
    vcrit_ghz,
    vcrit_nm2_product,
)
from bellvis.local_polytope import max_local_visibility
from bellvis.optimize import (
    OptimizationConfig,
    _Objective,
    check_pure_entangled_violation,
    hint_angles,
    max_entangling_projections,
    optimal_ch_directions,
    optimize_settings,
    optimize_state_and_settings,
    settings_from_angles,
    settings_to_angles,
)
from bellvis.states import (
    bloch_vector,
    build_ghz,
    build_partially_product,
    build_w,
    party_purities,
    product_state,
    random_product_state,
    random_pure_state,
)

FAST = OptimizationConfig(restarts=2, max_iterations=150, seed=3)


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizationConfig(restarts=0)
    with pytest.raises(ValueError):
        OptimizationConfig(tolerance=0)
    with pytest.raises(ValueError):
        OptimizationConfig(hints=("nope",))


def test_ghz3_xy_hint():
    est = optimize_settings(build_ghz(3), cfg=OptimizationConfig(restarts=1, hints=("xy-plane",), max_iterations=50))
    assert est.v_crit == pytest.approx(0.5, abs=5e-4)


def test_w3():
    assert optimize_settings(build_w(3), cfg=FAST).v_crit == pytest.approx(0.6442, abs=1e-3)


def test_zero_ghz3():
    assert optimize_settings(build_partially_product(1, build_ghz(3)), cfg=FAST).v_crit == pytest.approx(
        1 / 3, abs=1e-3
    )


def test_estimate_matches_lp_at_best_settings():
    st = random_pure_state(3, 11)
    est = optimize_settings(st, cfg=FAST)
    direct = max_local_visibility(joint_probabilities(st, est.best_settings))
    assert est.v_crit == pytest.approx(direct.v_star, abs=1e-7)
    assert est.certificate.v_star == pytest.approx(est.v_crit, abs=1e-7)
    assert 1 <= est.restarts_agreeing <= FAST.restarts


def test_not_worse_than_any_hint():
    st = build_partially_product(1, build_ghz(2))
    est = optimize_settings(st, cfg=FAST)
    obj = _Objective(st, Scenario.uniform(3, 2))
    for name in ("xy-plane", "xz-plane", "paper-dicke"):
        assert est.v_crit <= obj.value_of_angles(hint_angles(name, st)) + 1e-9


def test_upper_bounded_by_closed_forms():
    st = build_partially_product(1, build_ghz(2))
    est = optimize_settings(st, cfg=FAST)
    assert est.v_crit <= vcrit_nm2_product(3) + 1e-4
    assert optimize_settings(build_ghz(4), cfg=FAST).v_crit <= vcrit_ghz(4) + 1e-4


def test_determinism():
    st = random_pure_state(3, 2)
    a = optimize_settings(st, cfg=FAST)
    b = optimize_settings(st, cfg=FAST)
    assert a.v_crit == b.v_crit
    assert a.restart_values == b.restart_values
    np.testing.assert_array_equal(a.angles, b.angles)


def test_parallel_restarts_match_serial():
    st = random_pure_state(3, 4)
    cfg = OptimizationConfig(restarts=3, max_iterations=80, seed=1, hints=())
    serial = optimize_settings(st, cfg=cfg)
    par = optimize_settings(st, cfg=OptimizationConfig(restarts=3, max_iterations=80, seed=1, hints=(), workers=2))
    assert par.restart_values == pytest.approx(serial.restart_values, abs=1e-9)


def test_json_payload():
    est = optimize_settings(build_ghz(2), cfg=OptimizationConfig(restarts=1, max_iterations=20))
    d = est.to_json(seed=5, config=FAST)
    assert set(d) >= {"v_crit", "settings", "certificate", "restarts_agreeing", "seed", "config"}
    assert d["seed"] == 5 and d["config"]["restarts"] == 2


def test_angle_roundtrip():
    ang = np.random.default_rng(0).uniform(0, 3, (3, 2, 2))
    np.testing.assert_allclose(settings_to_angles(settings_from_angles(ang)), ang)


def test_party_count_mismatch():
    with pytest.raises(ValueError):
        optimize_settings(build_ghz(3), Scenario.uniform(2, 2), FAST)


def test_state_and_settings_n2():
    _, est = optimize_state_and_settings(2, cfg=OptimizationConfig(restarts=2, max_iterations=100, seed=0), rounds=2)
    assert est.v_crit == pytest.approx(2**-0.5, abs=2e-3)


def test_state_and_settings_n3_is_ghz_like():
    cfg = OptimizationConfig(restarts=3, max_iterations=120, seed=0)
    st, est = optimize_state_and_settings(3, cfg=cfg, rounds=2, settings_restarts=2)
    assert est.v_crit == pytest.approx(0.5, abs=2e-3)
    # GHZ-class invariant: all single-qubit marginals maximally mixed
    np.testing.assert_allclose(party_purities(st), 0.5, atol=2e-2)


def test_state_and_settings_size_gate():
    with pytest.raises(ValueError):
        optimize_state_and_settings(6)


# --- universal violation ----------------------------------------------------


def test_projection_ghz3():
    p = max_entangling_projections(build_ghz(3), (0, 1))
    assert p.concurrence == pytest.approx(1.0, abs=1e-6)
    assert np.linalg.norm(p.post_state) == pytest.approx(1.0, abs=1e-12)


def test_projection_zero_ghz2():
    p = max_entangling_projections(build_partially_product(1, build_ghz(2)), (1, 2))
    assert p.concurrence == pytest.approx(1.0, abs=1e-9)
    assert p.probability == pytest.approx(1.0, abs=1e-9)


def test_projection_w3():
    p = max_entangling_projections(build_w(3), (0, 1))
    assert p.concurrence == pytest.approx(1.0, abs=1e-6)
    assert p.probability == pytest.approx(2 / 3, abs=1e-6)
    np.testing.assert_allclose(p.directions[2], [0, 0, 1], atol=1e-3)  # projector |0>


def test_projection_probability_is_prenormalization_norm():
    st = random_pure_state(4, 8)
    p = max_entangling_projections(st, (1, 3))
    from bellvis.optimize import _project

    ang = [(math.acos(np.clip(d[2], -1, 1)), math.atan2(d[1], d[0])) for _, d in sorted(p.directions.items())]
    vec = _project(st, (1, 3), ang)
    assert np.vdot(vec, vec).real == pytest.approx(p.probability, abs=1e-10)


def test_optimal_ch_directions_reach_horodecki_value():
    rng = np.random.default_rng(2)
    for _ in range(5):
        psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        psi /= np.linalg.norm(psi)
        c = 2 * abs(psi[0] * psi[3] - psi[1] * psi[2])
        *_, chsh = optimal_ch_directions(psi)
        assert chsh == pytest.approx(2 * math.sqrt(1 + c**2), abs=1e-9)


def test_ghz3_violation_value():
    rep = check_pure_entangled_violation(build_ghz(3))
    assert rep.violated
    # projection probability 1/2 times the maximal CH value (sqrt2 - 1)/2
    assert rep.value == pytest.approx(0.5 * (math.sqrt(2) - 1) / 2, abs=1e-6)
    b = joint_probabilities(build_ghz(3), rep.settings)
    assert evaluate(build_symmetrized_CH(3), b) == pytest.approx(rep.value, abs=1e-12)


def test_product_states_never_violate():
    assert not check_pure_entangled_violation(product_state([[1, 0]] * 3)).violated
    for seed in range(3):
        rep = check_pure_entangled_violation(random_product_state(3, seed))
        assert not rep.violated and rep.value <= 1e-9


def test_violation_needs_three_qubits():
    with pytest.raises(ValueError):
        check_pure_entangled_violation(build_ghz(2))


def test_bloch_of_projection_target():
    # the projective setting on a measured party fires label 1 on the projected state
    st = random_pure_state(3, 21)
    rep = check_pure_entangled_violation(st)
    i, j = rep.pair
    k = ({0, 1, 2} - {i, j}).pop()
    proj = max_entangling_projections(st, (i, j))
    np.testing.assert_allclose(-rep.settings[k][0].direction, proj.directions[k], atol=1e-9)
    assert bloch_vector(st, k).shape == (3,)
