import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from onebitcs import (
    DomainError,
    InvalidParameterError,
    OneSided,
    ShapeError,
    SoftParams,
    biht_descent_direction,
    one_sided,
    scr_gradient,
    scr_objective,
    soft_inconsistency,
    soft_sign,
)
from onebitcs.objectives import biht_objective

finite = st.floats(-1e3, 1e3, allow_nan=False)
steep = st.floats(0.01, 50)


def central_diff(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


class TestSoftSign:
    def test_zero(self):
        for a in (0.1, 1.0, 5.0, 80.0):
            assert soft_sign(0.0, a) == 0.0

    def test_log3(self):
        assert soft_sign(math.log(3), 1.0) == pytest.approx(0.5, abs=1e-15)

    def test_saturates_without_overflow(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert soft_sign(200.0, 5.0) == 1.0
            assert soft_sign(-200.0, 5.0) == -1.0
            assert soft_inconsistency(-1e4, 5.0) == 2.0

    def test_matches_high_precision(self, rng):
        mpmath.mp.dps = 40
        for t, a in zip(rng.uniform(-30, 30, 200), rng.uniform(0.1, 8, 200)):
            exact = (mpmath.exp(a * mpmath.mpf(t)) - 1) / (mpmath.exp(a * mpmath.mpf(t)) + 1)
            assert soft_sign(t, a) == pytest.approx(float(exact), rel=1e-14, abs=1e-300)

    def test_rejects_bad_inputs(self):
        with pytest.raises(DomainError):
            soft_sign(float("nan"), 1.0)
        with pytest.raises(InvalidParameterError):
            soft_sign(1.0, 0.0)
        with pytest.raises(InvalidParameterError):
            soft_inconsistency(1.0, -2.0)

    @given(finite, steep)
    def test_odd(self, t, a):
        assert soft_sign(-t, a) == -soft_sign(t, a)

    @given(finite, steep)
    def test_range(self, t, a):
        assert -1.0 <= soft_sign(t, a) <= 1.0


class TestSoftInconsistency:
    def test_values(self):
        assert soft_inconsistency(0.0, 3.0) == 1.0
        assert soft_inconsistency(math.log(3), 1.0) == pytest.approx(0.5, abs=1e-15)

    @given(finite, steep)
    def test_complement(self, t, a):
        assert soft_inconsistency(t, a) + soft_inconsistency(-t, a) == pytest.approx(2.0, abs=1e-15)

    def test_strictly_decreasing(self):
        t = np.linspace(-5, 5, 1001)
        assert np.all(np.diff(soft_inconsistency(t, 1.5)) < 0)

    def test_small_values_keep_relative_precision(self):
        mpmath.mp.dps = 40
        exact = 2 / (mpmath.exp(mpmath.mpf(60)) + 1)
        assert soft_inconsistency(30.0, 2.0) == pytest.approx(float(exact), rel=1e-13)

    @given(st.sampled_from([-1.0, 1.0]), finite, steep)
    def test_equivalence_identity(self, y, t, a):
        assert abs(abs(y - soft_sign(t, a)) - soft_inconsistency(y * t, a)) <= 1e-12


class TestOneSided:
    def test_examples(self):
        assert one_sided(3.7, "l1") == 0
        assert one_sided(-2.0, OneSided.L1) == 2
        assert one_sided(-2.0, OneSided.L2) == 4
        assert one_sided(0.0, "l2") == 0

    @given(st.floats(1e-9, 1e3), st.floats(1e-9, 1e3), st.sampled_from([0.5, 1.0, 5.0]))
    def test_structural_contrast(self, u, v, a):
        u, v = sorted((u, v))
        # strictness is only resolvable in float64 for separated pairs
        assume(v - u > 1e-6 * v and a * v < 600)
        assert one_sided(u, "l1") == one_sided(v, "l1") == 0
        assert soft_inconsistency(u, a) > soft_inconsistency(v, a) > 0


class TestSoftParams:
    @pytest.mark.parametrize("a,p", [(0, 1), (-1, 2), (float("inf"), 1), (1, 0), (1, 1.5), (1, -2)])
    def test_rejects(self, a, p):
        with pytest.raises(InvalidParameterError):
            SoftParams(a, p)

    def test_integer_valued_float_order(self):
        assert SoftParams(2, 4.0).p == 4


class TestScrObjective:
    def test_zero_vector(self, rng):
        phi = rng.standard_normal((7, 5))
        y = np.where(rng.standard_normal(7) > 0, 1.0, -1.0)
        for p in (1, 2, 4):
            val = scr_objective(np.zeros(5), phi, y, SoftParams(2.0, p))
            assert val.value == 7.0
            assert val.per_term.sum() == val.value

    def test_saturated_consistent(self, rng):
        phi = rng.standard_normal((20, 6))
        x = rng.standard_normal(6)
        y = np.sign(phi @ x)
        assert scr_objective(1e6 * x, phi, y, SoftParams(3.0, 1)).value < 1e-12

    def test_equals_soft_sign_form(self, rng):
        for _ in range(1000):
            m, n = rng.integers(1, 20, size=2)
            phi = rng.standard_normal((m, n))
            x = rng.standard_normal(n)
            y = np.where(rng.standard_normal(m) > 0, 1.0, -1.0)
            params = SoftParams(rng.uniform(0.1, 10), int(rng.choice([1, 2, 4])))
            direct = np.sum(np.abs(y - soft_sign(phi @ x, params.a)) ** params.p)
            got = scr_objective(x, phi, y, params).value
            assert abs(got - direct) <= 1e-12 * max(1.0, abs(direct))

    def test_depends_only_on_margins(self, rng):
        phi = rng.standard_normal((12, 5))
        x = rng.standard_normal(5)
        y = np.where(rng.standard_normal(12) > 0, 1.0, -1.0)
        flip = np.where(rng.standard_normal(12) > 0, 1.0, -1.0)
        p = SoftParams(2.0, 2)
        assert scr_objective(x, phi, y, p).value == pytest.approx(
            scr_objective(x, flip[:, None] * phi, flip * y, p).value, rel=1e-15)

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            scr_objective(np.ones(3), np.ones((2, 4)), np.ones(2), SoftParams(1, 1))


class TestScrGradient:
    @pytest.mark.parametrize("a", [1.0, 2.0, 5.0])
    @pytest.mark.parametrize("p", [1, 2, 4])
    def test_finite_differences(self, rng, a, p):
        params = SoftParams(a, p)
        for _ in range(10):
            phi = rng.standard_normal((8, 16))
            y = np.where(rng.standard_normal(8) > 0, 1.0, -1.0)
            x = rng.standard_normal(16) / 4
            g = scr_gradient(x, phi, y, params)
            fd = central_diff(lambda z: scr_objective(z, phi, y, params).value, x)
            assert np.linalg.norm(fd - g) <= 1e-5 * np.linalg.norm(g)

    def test_vanishes_when_saturated(self, rng):
        phi = rng.standard_normal((30, 10))
        x = rng.standard_normal(10)
        y = np.sign(phi @ x)
        g = scr_gradient(1e4 * x, phi, y, SoftParams(5.0, 2))
        assert np.linalg.norm(g) <= 1e-8

    def test_scalar_derivative_identity(self, rng):
        # oracle: 50-digit central difference of 2 / (e^{at} + 1)
        mpmath.mp.dps = 50
        h = mpmath.mpf("1e-20")
        for t, a in zip(rng.uniform(-4, 4, 100), rng.uniform(0.2, 6, 100)):
            G = lambda s: 2 / (mpmath.exp(a * s) + 1)
            fd = float((G(mpmath.mpf(t) + h) - G(mpmath.mpf(t) - h)) / (2 * h))
            g = soft_inconsistency(t, a)
            assert -(a / 2) * g * (2 - g) == pytest.approx(fd, rel=1e-6)

    def test_corrective_weight_vanishes_far_from_consistency(self):
        # g^p (2 - g) -> 0 as the margin goes to -inf: strongly inconsistent
        # rows stop pulling, unlike BIHT-l1 whose pull is constant
        for p in (1, 2, 4):
            t = np.array([-1.0, -10.0, -40.0])
            w = soft_inconsistency(t, 5.0) ** p * soft_inconsistency(-t, 5.0)
            assert w[0] > w[1] > w[2] > 0 and w[2] < 1e-80


class TestBihtDirection:
    @pytest.mark.parametrize("flavor", ["l1", "l2"])
    def test_consistent_gives_zero(self, rng, flavor):
        phi = rng.standard_normal((25, 8))
        x = rng.standard_normal(8)
        y = np.sign(phi @ x)
        assert np.all(biht_descent_direction(x, phi, y, flavor) == 0)

    def test_single_row_l2(self):
        # objective min(-2x, 0)^2 at x=2 is 16 with derivative -8*(-1)... checked numerically
        phi, y, x = np.array([[1.0]]), np.array([-1.0]), np.array([2.0])
        f = lambda z: biht_objective(z, phi, y, "l2").value
        fd = central_diff(f, x)
        np.testing.assert_allclose(-2 * biht_descent_direction(x, phi, y, "l2"), fd, rtol=1e-8)
        assert biht_descent_direction(x, phi, y, "l2")[0] == -2.0

    def test_l2_matches_negative_half_gradient(self, rng):
        phi = rng.standard_normal((15, 6))
        y = np.where(rng.standard_normal(15) > 0, 1.0, -1.0)
        x = rng.standard_normal(6)
        fd = central_diff(lambda z: biht_objective(z, phi, y, "l2").value, x)
        np.testing.assert_allclose(biht_descent_direction(x, phi, y, "l2"), -fd / 2, rtol=1e-6, atol=1e-8)

    def test_l1_is_negative_subgradient(self, rng):
        phi = rng.standard_normal((15, 6))
        y = np.where(rng.standard_normal(15) > 0, 1.0, -1.0)
        x = rng.standard_normal(6)
        fd = central_diff(lambda z: biht_objective(z, phi, y, "l1").value, x)
        np.testing.assert_allclose(biht_descent_direction(x, phi, y, "l1"), -fd, rtol=1e-6, atol=1e-8)

    def test_l1_scale_invariant(self, rng):
        phi = rng.standard_normal((15, 6))
        y = np.where(rng.standard_normal(15) > 0, 1.0, -1.0)
        x = rng.standard_normal(6)
        d = biht_descent_direction(x, phi, y, "l1")
        for c in (1e-3, 2.0, 1e4):
            assert np.array_equal(biht_descent_direction(c * x, phi, y, "l1"), d)

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            biht_descent_direction(np.ones(2), np.ones((3, 3)), np.ones(3), "l1")
