import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellvis.behavior import (
    Behavior,
    MeasurementSetting,
    Scenario,
    collins_gisin_vector,
    correlation_component,
    dicke_z_correlation,
    joint_probabilities,
    uniform_behavior,
)
from bellvis.states import PAULI, NoisyState, build_dicke, build_ghz, random_pure_state

angle = st.floats(0, 2 * np.pi, allow_nan=False)


@st.composite
def state_and_settings(draw):
    n = draw(st.integers(2, 4))
    m = draw(st.integers(1, 3))
    seed = draw(st.integers(0, 10**6))
    settings = []
    for _ in range(n):
        party = []
        for _ in range(m):
            if draw(st.integers(0, 9)) == 0:
                party.append(MeasurementSetting.constant(draw(st.integers(0, 1))))
            else:
                party.append(MeasurementSetting.projective(draw(angle), draw(angle)))
        settings.append(party)
    v = draw(st.floats(0, 1))
    return NoisyState(random_pure_state(n, seed), v), settings


@settings(max_examples=200, deadline=None)
@given(state_and_settings())
def test_normalization_and_no_signaling(case):
    state, sett = case
    b = joint_probabilities(state, sett)
    assert b.table.min() >= -1e-12
    assert b.normalization_error() <= 1e-9
    assert b.signaling_error() <= 1e-9


@settings(max_examples=60, deadline=None)
@given(state_and_settings())
def test_affine_in_visibility(case):
    state, sett = case
    p1 = joint_probabilities(NoisyState(state.pure, 1.0), sett).table
    p0 = joint_probabilities(NoisyState(state.pure, 0.0), sett).table
    pv = joint_probabilities(state, sett).table
    v = state.visibility
    np.testing.assert_allclose(pv, v * p1 + (1 - v) * p0, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(state_and_settings())
def test_collins_gisin_fast_path(case):
    state, sett = case
    np.testing.assert_allclose(
        collins_gisin_vector(state, sett), joint_probabilities(state, sett).collins_gisin(), atol=1e-12
    )


def test_single_qubit_born_rule():
    b = joint_probabilities(build_ghz(2), [[MeasurementSetting.along("z")], [MeasurementSetting.along("z")]])
    np.testing.assert_allclose(b.table[0], [0.5, 0, 0, 0.5], atol=1e-12)
    b = joint_probabilities(build_ghz(2), [[MeasurementSetting.along("-z")], [MeasurementSetting.along("z")]])
    np.testing.assert_allclose(b.table[0], [0, 0.5, 0.5, 0], atol=1e-12)


def test_labeling_convention():
    # label 0 <-> +1 eigenvalue, so p(1) = (1 - <A>)/2 and <A> = p(0) - p(1)
    s = MeasurementSetting.projective(0.7, 1.1)
    e0, e1 = s.povm()
    np.testing.assert_allclose(e0 - e1, s.observable())
    np.testing.assert_allclose(s.observable(), sum(c * PAULI[a] for c, a in zip(s.direction, "xyz")), atol=1e-12)
    c = MeasurementSetting.constant(0)
    np.testing.assert_allclose(c.povm()[0], np.eye(2))


def test_correlator_from_behavior_matches_expectation():
    st_ = random_pure_state(3, 5)
    dirs = [np.array([0.3, -0.5, 0.8]), np.array([1.0, 0, 0]), np.array([0, 0.6, -0.8])]
    sett = [[MeasurementSetting.along(d)] for d in dirs]
    b = joint_probabilities(st_, sett)
    signs = np.array([(-1) ** a.bit_count() for a in range(8)])
    unit = [d / np.linalg.norm(d) for d in dirs]
    assert float(b.table[0] @ signs) == pytest.approx(correlation_component(st_, unit), abs=1e-12)


def test_marginal_and_prob():
    b = joint_probabilities(build_ghz(3), [[MeasurementSetting.along("z"), MeasurementSetting.along("x")]] * 3)
    assert b.prob((0, 0, 0), (0, 0, 0)) == pytest.approx(0.5)
    np.testing.assert_allclose(b.marginal([2], [1]), [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(b.marginal([0, 2], [0, 0]), [[0.5, 0], [0, 0.5]], atol=1e-12)
    assert b.tensor().shape == (2, 2, 2, 2, 2, 2)


def test_uniform_behavior_is_noise():
    sc = Scenario.uniform(3, 2)
    sett = [[MeasurementSetting.projective(0.3, 0.1), MeasurementSetting.projective(1.3, 2)]] * 3
    np.testing.assert_allclose(
        joint_probabilities(NoisyState(build_ghz(3), 0.0), sett).table, uniform_behavior(sc).table, atol=1e-15
    )


@pytest.mark.parametrize("n,e", [(4, 1), (5, 2), (6, 3)])
def test_dicke_z_correlation(n, e):
    st_ = build_dicke(n, e)
    for k in range(n + 1):
        dirs = ["z"] * k + [None] * (n - k)
        want = correlation_component(NoisyState(st_, 0.6), dirs)
        assert dicke_z_correlation(n, e, k, 0.6) == pytest.approx(want, abs=1e-12)


def test_csv_json_roundtrip():
    b = joint_probabilities(random_pure_state(2, 1), [[MeasurementSetting.projective(0.2, 0.4)] * 2] * 2)
    again = Behavior.from_json(b.to_json())
    np.testing.assert_array_equal(b.table, again.table)
    lines = b.to_csv().splitlines()
    assert lines[0] == "setting_index,outcome_index,probability"
    assert len(lines) == 1 + b.table.size


def test_scenario_indexing():
    sc = Scenario((2, 3, 1))
    assert sc.n_joint_settings == 6
    assert sc.n_strategies == 2**6
    assert sc.cg_length == 3 * 4 * 2
    assert [sc.setting_index(x) for x in itertools.product(range(2), range(3), range(1))] == list(range(6))


def test_settings_mismatch_raises():
    with pytest.raises(ValueError):
        joint_probabilities(build_ghz(3), [[MeasurementSetting.along("z")]] * 2)
