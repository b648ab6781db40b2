import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chi2, norm

from hdindep.limits import (
    LimitLaw,
    NumericalError,
    chi2_1_tail,
    convolution_cdf,
    convolution_sf,
    convolution_upper_quantile,
    gumbel_cdf,
    intermediate_cdf,
    intermediate_lambda,
    intermediate_sf,
    intermediate_upper_quantile,
    normal_cdf,
    normal_tail,
)
from hdindep.normalization import extreme_shift

mpmath.mp.dps = 40


def mp_normal_tail(z):
    return mpmath.erfc(mpmath.mpf(z) / mpmath.sqrt(2)) / 2


def test_normal_examples():
    assert normal_cdf(0.0) == 0.5
    assert abs(normal_cdf(1.959964) - 0.975) < 1e-6
    assert abs(normal_tail(10.0) - 7.6199e-24) < 1e-27


@pytest.mark.parametrize("z", [0.5, 3.0, 8.0, 15.0, 30.0])
def test_normal_tail_relative_accuracy(z):
    ref = mp_normal_tail(z)
    assert abs(normal_tail(z) - float(ref)) <= 1e-12 * float(ref)


def test_chi2_examples():
    assert chi2_1_tail(0.0) == 1.0
    assert abs(chi2_1_tail(3.841459) - 0.05) < 1e-6
    assert chi2_1_tail(20.0) < chi2_1_tail(19.0)
    with pytest.raises(ValueError):
        chi2_1_tail(-0.1)


def test_chi2_normal_identity(rng):
    x = rng.uniform(0, 100, 100)
    np.testing.assert_allclose(chi2_1_tail(x), 2 * normal_tail(np.sqrt(x)), rtol=1e-13)


def test_intermediate_examples():
    assert intermediate_cdf(200.0, 200) > 1 - 1e-9
    shift = extreme_shift(200)
    expected = math.exp(-(200**2 - 200) / 2 * float(mpmath.erfc(mpmath.sqrt(mpmath.mpf(shift) / 2))))
    assert intermediate_cdf(0.0, 200) == pytest.approx(expected, rel=1e-12)
    assert abs(intermediate_cdf(0.0, 200) - gumbel_cdf(0.0)) < 0.02
    # clamped argument below the shift
    assert intermediate_cdf(-shift - 5.0, 10) == pytest.approx(math.exp(-45.0))
    with pytest.raises(ValueError):
        intermediate_cdf(0.0, 1)


@pytest.mark.parametrize("p", [50, 200, 1000])
def test_intermediate_monotone(p):
    ys = np.linspace(-10, 20, 1000)
    f = intermediate_cdf(ys, p)
    assert np.all(np.diff(f) >= 0)
    assert np.all((0 <= f) & (f <= 1))
    np.testing.assert_allclose(intermediate_sf(ys, p), 1 - f, atol=1e-15)


def test_intermediate_quantile_round_trip():
    for p in (50, 200, 1000):
        for alpha in (0.01, 0.05, 0.5):
            y = intermediate_upper_quantile(alpha, p)
            assert intermediate_sf(y, p) == pytest.approx(alpha, rel=1e-10)


def test_gumbel_examples():
    ref = mpmath.exp(-1 / mpmath.sqrt(8 * mpmath.pi))
    assert abs(gumbel_cdf(0.0) - float(ref)) < 1e-10
    assert abs(gumbel_cdf(0.0) - 0.81917) < 1e-5
    assert gumbel_cdf(500.0) == 1.0


def test_intermediate_approaches_gumbel():
    ys = np.linspace(-5, 15, 2001)
    gaps = [np.abs(gumbel_cdf(ys) - intermediate_cdf(ys, p)).max() for p in (10**3, 10**4, 10**5)]
    assert gaps[1] < 0.05
    assert gaps[0] > gaps[1] > gaps[2]


@pytest.mark.parametrize("p", [50, 200, 1000])
def test_convolution_node_convergence(p):
    cs = np.linspace(-5, 25, 61)
    assert np.abs(convolution_cdf(cs, p, 64) - convolution_cdf(cs, p, 128)).max() < 1e-8
    h = convolution_cdf(cs, p)
    assert np.all(np.diff(h) >= 0)
    np.testing.assert_allclose(convolution_sf(cs, p), 1 - h, atol=1e-12)
    with pytest.raises(ValueError):
        convolution_cdf(0.0, p, nodes=32)


def test_convolution_quantile_ordering():
    c = [convolution_upper_quantile(a, 200) for a in (0.01, 0.05, 0.10)]
    assert c[0] > c[1] > c[2]
    assert abs(convolution_cdf(c[1], 200) - 0.95) < 1e-6


def _intermediate_draws(u, p):
    """Inverse-transform draws from the intermediate law."""
    lam = -np.log(u)
    tail = 2 * lam / (p * p - p)
    return np.where(tail >= 1, 0.0, chi2.isf(np.minimum(tail, 1.0), 1)) - extreme_shift(p)


def test_convolution_quantile_monte_carlo():
    p, alpha, B = 200, 0.05, 10**6
    c = convolution_upper_quantile(alpha, p)
    rng = np.random.default_rng(7)
    z = rng.standard_normal(B)
    g = _intermediate_draws(rng.random(B), p)
    freq = np.mean(z + g >= c)
    assert abs(freq - alpha) <= 3 * math.sqrt(alpha * (1 - alpha) / B)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_convolution_shift_oracle(s):
    """A normal F centred at y* with scale s gives a closed-form quantile."""
    y_star = 3.0
    q = convolution_upper_quantile(0.05, 200, cdf=lambda y: norm.cdf((y - y_star) / s))
    assert q == pytest.approx(y_star + norm.isf(0.05) * math.sqrt(1 + s * s), abs=1e-4)


def test_convolution_bracket_failure():
    with pytest.raises(NumericalError):
        convolution_upper_quantile(0.05, 200, cdf=lambda y: norm.cdf(y - 500.0))
    with pytest.raises(ValueError):
        convolution_upper_quantile(1.5, 200)


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_cdfs_monotone(a, b):
    lo, hi = sorted((a, b))
    for law in (LimitLaw("normal"), LimitLaw("gumbel"), LimitLaw("intermediate", 100)):
        assert 0 <= law.cdf(lo) <= law.cdf(hi) <= 1


@pytest.mark.parametrize("kind,p", [("normal", None), ("gumbel", None), ("intermediate", 200), ("convolution", 200)])
def test_limit_law_quantiles(kind, p):
    law = LimitLaw(kind, p)
    for alpha in (0.01, 0.05, 0.2):
        q = law.upper_quantile(alpha)
        assert law.sf(q) == pytest.approx(alpha, abs=1e-6)


def test_limit_law_validation():
    with pytest.raises(ValueError):
        LimitLaw("cauchy")
    with pytest.raises(ValueError):
        LimitLaw("intermediate")
    assert intermediate_lambda(1e6, 50) == 0.0
