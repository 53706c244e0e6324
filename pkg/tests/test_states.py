import json
from math import comb

import numpy as np
import pytest

from bellvis.states import (
    NoisyState,
    PureState,
    bloch_vector,
    build_dicke,
    build_ghz,
    build_partially_product,
    build_w,
    concurrence,
    expectation,
    load_state,
    party_purities,
    permute_parties,
    product_state,
    random_product_state,
    random_pure_state,
    save_state,
    site_operator,
    state_from_json,
    state_to_json,
    symmetry_classes,
)


def test_ghz_amplitudes():
    s = build_ghz(3)
    assert s.amplitudes[0] == pytest.approx(2**-0.5)
    assert s.amplitudes[7] == pytest.approx(2**-0.5)
    assert np.count_nonzero(s.amplitudes) == 2


@pytest.mark.parametrize("n,e", [(3, 1), (4, 2), (5, 3), (6, 1)])
def test_dicke_support(n, e):
    s = build_dicke(n, e)
    nz = np.flatnonzero(np.abs(s.amplitudes) > 0)
    assert len(nz) == comb(n, e)
    assert all(int(i).bit_count() == e for i in nz)
    assert np.linalg.norm(s.amplitudes) == pytest.approx(1.0, abs=1e-14)


def test_w_is_dicke_one():
    np.testing.assert_array_equal(build_w(4).amplitudes, build_dicke(4, 1).amplitudes)


@pytest.mark.parametrize("bad", [0, 3])
def test_dicke_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        build_dicke(3, bad)


def test_pure_state_validation():
    with pytest.raises(ValueError):
        PureState(2, [1, 0, 0])
    with pytest.raises(ValueError):
        PureState(1, [1, 1])
    with pytest.raises(ValueError):
        build_ghz(1)


def test_amplitudes_read_only():
    s = build_ghz(2)
    with pytest.raises(ValueError):
        s.amplitudes[0] = 0


def test_noisy_state_visibility_range():
    with pytest.raises(ValueError):
        NoisyState(build_ghz(2), 1.5)


def test_partially_product_layout():
    s = build_partially_product(2, build_ghz(2))
    assert s.n_qubits == 4
    assert abs(s.amplitudes[0b0000]) == pytest.approx(2**-0.5)
    assert abs(s.amplitudes[0b0011]) == pytest.approx(2**-0.5)
    np.testing.assert_allclose(party_purities(s), [1, 1, 0.5, 0.5], atol=1e-12)


def test_random_state_reproducible_and_normalized():
    a, b = random_pure_state(4, 7), random_pure_state(4, 7)
    np.testing.assert_array_equal(a.amplitudes, b.amplitudes)
    assert not np.allclose(a.amplitudes, random_pure_state(4, 8).amplitudes)
    assert np.linalg.norm(a.amplitudes) == pytest.approx(1.0, abs=1e-12)


def test_expectation_affine_in_visibility():
    s = build_ghz(3)
    assert expectation(NoisyState(s, 1.0), ["x", "x", "x"]) == pytest.approx(1.0)
    assert expectation(NoisyState(s, 0.3), ["x", "x", "x"]) == pytest.approx(0.3)
    assert expectation(NoisyState(s, 0.3), ["z", "z", None]) == pytest.approx(0.3)
    assert expectation(NoisyState(s, 0.3), [None, None, None]) == pytest.approx(1.0)


def test_site_operator_forms():
    np.testing.assert_allclose(site_operator("-z"), -np.diag([1, -1]))
    np.testing.assert_allclose(site_operator([0, 0, 1]), np.diag([1, -1]))
    with pytest.raises(ValueError):
        site_operator("q")


def test_permute_parties():
    s = build_partially_product(1, build_ghz(2))  # |0>|GHZ_2>
    p = permute_parties(s, [1, 2, 0])  # |GHZ_2>|0>
    assert abs(p.amplitudes[0b000]) == pytest.approx(2**-0.5)
    assert abs(p.amplitudes[0b110]) == pytest.approx(2**-0.5)


def test_bloch_and_concurrence():
    s = product_state([[1, 0], [1, 1]])
    np.testing.assert_allclose(bloch_vector(s, 0), [0, 0, 1], atol=1e-12)
    np.testing.assert_allclose(bloch_vector(s, 1), [1, 0, 0], atol=1e-12)
    assert concurrence(s.amplitudes) == pytest.approx(0.0, abs=1e-12)
    assert concurrence(build_ghz(2).amplitudes) == pytest.approx(1.0)


def test_symmetry_classes():
    assert symmetry_classes(build_w(4)) == [(0, 1, 2, 3)]
    assert symmetry_classes(build_partially_product(2, build_ghz(3))) == [(0, 1), (2, 3, 4)]
    assert len(symmetry_classes(random_product_state(3, 0))) == 3


def test_json_roundtrip(tmp_path):
    s = random_pure_state(3, 1)
    path = tmp_path / "s.json"
    save_state(s, path)
    np.testing.assert_allclose(load_state(path).amplitudes, s.amplitudes, atol=1e-15)
    obj = json.loads(path.read_text())
    assert obj["n"] == 3 and len(obj["amplitudes"]) == 8


def test_json_rejects_bad_files():
    with pytest.raises(ValueError):
        state_from_json({"n": 2, "amplitudes": [[1, 0]]})
    with pytest.raises(ValueError):
        state_from_json({"n": 1, "amplitudes": [[1, 0], [1, 0]]})  # not normalized
    with pytest.raises(ValueError):
        state_from_json({"amplitudes": []})
    assert state_to_json(build_ghz(2))["n"] == 2
