import itertools
import json
import re

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pulseqa.errors import InputError
from pulseqa.model import (
    AnnealSpec,
    PulseSchedule,
    SpinGlassInstance,
    derive_seed,
    ds_hamiltonian,
    generate_instance,
    multiqubit_h,
    pulse_window,
    rng_from_seed,
    single_qubit_h,
    target_energy,
    x_sum,
)
from pulseqa.numcore import SIGMA_X, SIGMA_Z


def test_window_edges_closed():
    p = PulseSchedule(t_c=3.0, t_d=2.0, c=0.4)
    assert pulse_window(3.0, p) == 1.0
    assert pulse_window(5.0, p) == 0.0
    assert pulse_window(2.0, p) == 1.0
    assert pulse_window(4.0, p) == 1.0
    assert pulse_window(np.nextafter(4.0, 5.0), p) == 0.0
    assert np.array_equal(pulse_window(np.array([1.0, 2.0, 3.0, 4.5]), p), [0, 1, 1, 0])
    assert pulse_window(1.0, None) == 0.0


def test_pulse_validation():
    with pytest.raises(InputError):
        PulseSchedule(1.0, -0.1, 0.2)
    with pytest.raises(InputError):
        PulseSchedule(float("nan"), 1.0, 0.2)
    assert not PulseSchedule(1.0, 0.0, 0.5).active
    assert not PulseSchedule(1.0, 1.0, 0.0).active


def test_single_qubit_examples():
    spec = AnnealSpec(SpinGlassInstance.single(0.7), 10.0)
    assert np.array_equal(single_qubit_h(0.0, 0.7, spec), SIGMA_X)
    assert np.allclose(single_qubit_h(10.0, 0.7, spec), 0.7 * SIGMA_Z, atol=0)
    pulsed = spec.with_pulse(PulseSchedule(5.0, 2.0, 0.3))
    expected = (0.35 + 0.3) * SIGMA_Z + 0.5 * SIGMA_X
    assert np.allclose(single_qubit_h(5.0, 0.7, pulsed), expected, atol=1e-15)
    with pytest.raises(InputError):
        single_qubit_h(10.5, 0.7, spec)
    with pytest.raises(InputError):
        multiqubit_h(-0.1, spec)


def test_reduction_to_single_qubit(rng):
    for _ in range(100):
        eps = rng.normal()
        t_f = rng.uniform(0.5, 20)
        t = rng.uniform(0, t_f)
        pulse = PulseSchedule(rng.uniform(0, t_f), rng.uniform(0, t_f), rng.normal())
        spec = AnnealSpec(SpinGlassInstance.single(eps), t_f, pulse)
        assert np.array_equal(multiqubit_h(t, spec), single_qubit_h(t, eps, spec))


def _brute_energy(inst, bits):
    spin = [1 if b == 0 else -1 for b in bits]
    e = sum(inst.eps[i] * spin[i] for i in range(inst.n))
    return e + sum(v * spin[i] * spin[j] for i, j, v in inst.couplings)


@pytest.mark.parametrize("n", [1, 2, 4, 6])
def test_diagonal_oracle(n):
    inst = generate_instance(n, 1000 + n)
    spec = AnnealSpec(inst, 7.0, PulseSchedule(2.0, 1.0, 0.5))
    h = multiqubit_h(7.0, spec)
    oracle = [_brute_energy(inst, bits) for bits in itertools.product((0, 1), repeat=n)]
    assert np.max(np.abs(h - np.diag(oracle))) <= 1e-12
    via_target = [target_energy(inst, "".join(map(str, b))) for b in itertools.product((0, 1), repeat=n)]
    assert np.max(np.abs(np.array(via_target) - oracle)) <= 1e-12
    assert np.isclose(min(via_target), np.linalg.eigvalsh(h)[0], atol=1e-12)


def test_hamiltonian_real_symmetric(rng):
    inst = generate_instance(4, 9)
    spec = AnnealSpec(inst, 5.0, PulseSchedule(2.5, 1.0, -0.4))
    for t in rng.uniform(0, 5, 20):
        h = multiqubit_h(t, spec)
        assert h.dtype == np.float64
        assert np.array_equal(h, h.T)


def test_pulse_term_commutes_with_target():
    inst = generate_instance(5, 3)
    hz = np.diag(inst.z_sum)
    ht = np.diag(inst.diagonal)
    assert np.array_equal(hz @ ht, ht @ hz)


def test_x_sum_and_ds_hamiltonian():
    xs = x_sum(3)
    assert np.allclose(np.linalg.eigvalsh(xs), sorted([3 - 2 * bin(k).count("1") for k in range(8)]))
    one = np.kron(np.kron(SIGMA_X, np.eye(2)), np.eye(2)) + np.kron(np.kron(np.eye(2), SIGMA_X), np.eye(2)) \
        + np.kron(np.eye(4), SIGMA_X)
    assert np.array_equal(xs, one)
    inst = generate_instance(3, 4)
    spec = AnnealSpec(inst, 1.0)
    fd = multiqubit_h(0.6, spec) - multiqubit_h(0.4, spec)
    assert np.allclose(fd / 0.2, ds_hamiltonian(inst), atol=1e-12)


def test_target_energy_examples():
    inst = SpinGlassInstance(2, (1.0, -1.0), ((0, 1, 0.5),))
    assert target_energy(inst, "00") == 0.5
    zero = SpinGlassInstance(3, (0.0, 0.0, 0.0), ((0, 1, 0.0),))
    assert all(target_energy(zero, z) == 0 for z in ("000", "101", "111"))
    with pytest.raises(InputError):
        target_energy(inst, "0")
    with pytest.raises(InputError):
        target_energy(inst, "02")


def test_generation_is_deterministic():
    a, b = generate_instance(6, 42), generate_instance(6, 42)
    assert a == b
    assert a.to_dict() == b.to_dict()
    assert generate_instance(6, 43) != a
    assert len(a.couplings) == 15
    assert [c[:2] for c in a.couplings] == sorted(c[:2] for c in a.couplings)
    with pytest.raises(InputError):
        generate_instance(0, 1)


def test_generation_draw_order():
    inst = generate_instance(3, 11)
    draws = rng_from_seed(11).standard_normal(6)
    assert inst.eps == tuple(draws[:3])
    assert [v for _, _, v in inst.couplings] == list(draws[3:])


def test_normal_deviates_clt_bounds():
    values = rng_from_seed(7).standard_normal(100_000)
    assert abs(values.mean()) < 4 / np.sqrt(1e5)
    assert abs(values.var() - 1) < 0.05
    pooled = np.concatenate([generate_instance(12, derive_seed(5, k)).eps for k in range(2000)])
    assert abs(pooled.mean()) < 4 / np.sqrt(pooled.size)
    assert abs(pooled.var() - 1) < 0.05


def test_derived_seeds_distinct():
    seeds = [derive_seed(2024, k) for k in range(10_000)]
    assert len(set(seeds)) == len(seeds)
    assert all(0 <= s < 2 ** 63 for s in seeds)
    assert derive_seed(1, 0) != derive_seed(2, 0)


def test_instance_validation():
    with pytest.raises(InputError):
        SpinGlassInstance(2, (1.0,))
    with pytest.raises(InputError):
        SpinGlassInstance(2, (1.0, 2.0), ((1, 0, 0.3),))
    with pytest.raises(InputError):
        SpinGlassInstance(2, (1.0, 2.0), ((0, 1, 0.3), (0, 1, 0.2)))
    with pytest.raises(InputError):
        SpinGlassInstance(13, (0.0,) * 13)
    with pytest.raises(InputError):
        AnnealSpec(SpinGlassInstance.single(1.0), 0.0)
    inst = SpinGlassInstance(3, (0.0, 0.0, 0.0), ((1, 2, 1.0), (0, 2, 2.0)))
    assert inst.couplings == ((0, 2, 2.0), (1, 2, 1.0))


def test_json_roundtrip(tmp_path):
    inst = generate_instance(5, 77)
    path = tmp_path / "inst.json"
    inst.save(path)
    data = json.loads(path.read_text())
    assert list(data) == ["n", "seed", "eps", "J"]
    assert SpinGlassInstance.load(path) == inst


@pytest.mark.parametrize("patch, where", [
    ({"n": "5"}, "$.n"),
    ({"eps": [0.1, "x"]}, "$.eps[1]"),
    ({"J": [[0, 1, 0.5], [0, 1]]}, "$.J[1]"),
    ({"J": [[0, 1, True]]}, "$.J[0]"),
    ({"extra": 1}, "$"),
])
def test_json_schema_errors(patch, where):
    data = {"n": 2, "seed": 0, "eps": [0.1, 0.2], "J": [[0, 1, 0.5]]}
    data.update(patch)
    with pytest.raises(InputError, match="^" + re.escape(where)):
        SpinGlassInstance.from_dict(data)


def test_json_missing_key_and_bad_file(tmp_path):
    with pytest.raises(InputError, match=r"\$\.J"):
        SpinGlassInstance.from_dict({"n": 1, "seed": 0, "eps": [0.1]})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InputError):
        SpinGlassInstance.load(bad)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2 ** 63 - 1))
def test_diagonal_matches_target_energy(n, seed):
    inst = generate_instance(n, seed)
    k = seed % (1 << n)
    bits = format(k, f"0{n}b")
    assert abs(inst.diagonal[k] - target_energy(inst, bits)) <= 1e-12
