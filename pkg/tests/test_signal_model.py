import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from onebitcs import (
    InvalidParameterError,
    ShapeError,
    derive_seed,
    gen_sensing_matrix,
    gen_sparse_signal,
    make_instance,
    measure,
)
from onebitcs.signal_model import Instance, quantize

# P(N(0, 5) < -0.5), from scipy.integrate.quad over the standard normal pdf
FLIP_RATE_HALF_SIGMA5 = 0.41153163687906075


def test_sparse_signal_reference_size():
    x = gen_sparse_signal(128, 16, seed=3)
    assert np.count_nonzero(x.values) == 16
    assert np.count_nonzero(x.values == 0.0) == 112
    assert sorted(x.support) == list(np.flatnonzero(x.values))


def test_sparse_signal_full_support():
    x = gen_sparse_signal(4, 4, seed=11)
    assert list(x.support) == [0, 1, 2, 3]
    assert np.all(x.values != 0)


@pytest.mark.parametrize("n,k", [(10, 0), (10, 11), (0, 0)])
def test_sparse_signal_rejects_bad_sparsity(n, k):
    with pytest.raises(InvalidParameterError):
        gen_sparse_signal(n, k, seed=0)


def test_sparse_amplitudes_unit_variance():
    vals = np.concatenate([gen_sparse_signal(1000, 10, s).values for s in range(10_000)])
    nz = vals[vals != 0]
    assert nz.size == 100_000
    # sd of the sample variance is sqrt(2/1e5) ~ 0.0045
    assert 0.9 <= nz.var() <= 1.1


def test_support_uniform():
    counts = np.zeros(4)
    for s in range(10_000):
        counts[gen_sparse_signal(4, 1, s).support[0]] += 1
    np.testing.assert_allclose(counts / 10_000, 0.25, atol=0.02)


def test_sensing_matrix_shape_and_determinism():
    a = gen_sensing_matrix(160, 128, seed=5)
    b = gen_sensing_matrix(160, 128, seed=5)
    assert a.shape == (160, 128)
    assert np.all(np.isfinite(a))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, gen_sensing_matrix(160, 128, seed=6))


def test_sensing_matrix_zero_mean():
    phi = gen_sensing_matrix(2000, 1, seed=1)
    assert abs(phi.mean()) <= 0.07


@pytest.mark.parametrize("m,n", [(0, 4), (4, 0)])
def test_sensing_matrix_rejects_empty(m, n):
    with pytest.raises(InvalidParameterError):
        gen_sensing_matrix(m, n, seed=0)


def test_measure_identity():
    y = measure(np.eye(2), np.array([3.0, -1.0]), 0.0, seed=0)
    assert y.tolist() == [1.0, -1.0]


def test_measure_scale_invariant_noiseless(rng):
    phi = rng.standard_normal((50, 20))
    x = rng.standard_normal(20)
    y = measure(phi, x, 0.0, seed=1)
    for c in (1e-6, 0.3, 7.0, 1e5):
        assert np.array_equal(measure(phi, c * x, 0.0, seed=99), y)


def test_measure_flip_rate_matches_gaussian_tail():
    phi = np.ones((10_000, 1))
    y = measure(phi, np.array([0.5]), 5.0, seed=2024)
    assert abs(np.mean(y == -1.0) - FLIP_RATE_HALF_SIGMA5) <= 0.02


def test_measure_shape_errors():
    with pytest.raises(ShapeError):
        measure(np.ones((3, 4)), np.ones(3), 0.0, seed=0)
    with pytest.raises(InvalidParameterError):
        measure(np.ones((3, 4)), np.ones(4), -1.0, seed=0)


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=50))
def test_quantizer_codomain(values):
    q = quantize(np.array(values))
    assert set(np.unique(q)) <= {-1.0, 1.0}


def test_sign_of_zero_is_plus_one():
    assert measure(np.zeros((3, 2)), np.ones(2), 0.0, seed=0).tolist() == [1.0, 1.0, 1.0]


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.floats(0, 10), st.integers(0, 2**64 - 1))
def test_instances_are_pure_in_seed(n, m, sigma2, seed):
    k = max(1, n // 3)
    a = make_instance(n, k, m, sigma2, seed)
    b = make_instance(n, k, m, sigma2, seed)
    assert np.array_equal(a.phi, b.phi)
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.y, b.y)


def test_derive_seed_distinguishes_float_keys():
    assert derive_seed(1, 160, 0.5, 3) == derive_seed(1, 160, 0.5, 3)
    assert derive_seed(1, 160, 0.5, 3) != derive_seed(1, 160, 0.5000000001, 3)
    assert derive_seed(1, 160, 0.5, 3) != derive_seed(1, 160, 0.5, 4)
    assert 0 <= derive_seed(7) < 2**64


def test_instance_roundtrip(tmp_path):
    inst = make_instance(12, 3, 9, 0.7, seed=42)
    path = tmp_path / "inst.npz"
    inst.save(path)
    back = Instance.load(path)
    assert (back.n, back.k, back.m, back.sigma2, back.seed) == (12, 3, 9, 0.7, 42)
    assert np.array_equal(back.phi, inst.phi)
    assert np.array_equal(back.x, inst.x)
    assert np.array_equal(back.y, inst.y)
