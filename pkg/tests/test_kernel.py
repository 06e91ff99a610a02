import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import gamma
from scipy.stats import levy_stable

from fracheat import DomainError
from fracheat import kernel as K
from fracheat.kernel import ParabolicPoint as P

ALPHAS = [1.2, 1.5, 1.8, 2.0]
alphas = st.sampled_from(ALPHAS)


def gauss(t, x):
    return math.exp(-x * x / (4 * t)) / math.sqrt(4 * math.pi * t)


def test_validate_alpha_rejects_outside_domain():
    for bad in (1.0, 0.5, 2.5, float("nan")):
        with pytest.raises(DomainError):
            K.validate_alpha(bad)
    assert K.validate_alpha(2) == 2.0


def test_parabolic_point_requires_nonnegative_time():
    with pytest.raises(DomainError):
        P(-0.1, 0.0)


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
@pytest.mark.parametrize("t,x", [(1.0, 0.0), (0.5, 1.3), (2.0, 4.0), (0.1, 0.05), (3.0, 25.0)])
def test_green_kernel_matches_stable_density(alpha, t, x):
    # independent oracle: symmetric alpha-stable density with scale t^(1/alpha)
    ref = levy_stable.pdf(x, alpha, 0.0, scale=t ** (1 / alpha))
    assert K.green_kernel(alpha, t, x) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("t", [0.05, 1.0, 7.0])
@pytest.mark.parametrize("x", [0.0, 0.3, 2.0, 5.0])
def test_alpha2_quadrature_matches_gaussian(t, x):
    assert abs(K.green_kernel_quadrature(2.0, t, x) - gauss(t, x)) <= 1e-8
    assert K.green_kernel(2.0, t, x) == pytest.approx(gauss(t, x), rel=1e-14)


def test_green_kernel_array_and_errors():
    xs = np.array([[0.0, 1.0], [2.0, -1.0]])
    out = K.green_kernel(1.5, 1.0, xs)
    assert out.shape == xs.shape
    assert out[0, 1] == pytest.approx(out[1, 1])
    with pytest.raises(DomainError):
        K.green_kernel(1.5, 0.0, 1.0)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_kernel_at_origin_closed_form(alpha):
    assert K.kernel_at_origin(alpha) == pytest.approx(gamma(1 + 1 / alpha) / math.pi, rel=1e-12)


@given(alphas, st.floats(0.05, 5.0), st.floats(-6.0, 6.0))
def test_scaling_identity(alpha, t, x):
    assert K.scaling_residual(alpha, t, x) <= 1e-10


@given(alphas, st.floats(0.1, 3.0), st.floats(-3.0, 3.0))
def test_kernel_symmetric_positive_and_maximal_at_origin(alpha, t, x):
    g = K.green_kernel(alpha, t, x)
    assert g > 0
    assert g == pytest.approx(K.green_kernel(alpha, t, -x), rel=1e-12)
    assert g <= K.green_kernel(alpha, t, 0.0) * (1 + 1e-12)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_semigroup_and_unit_mass(alpha):
    assert K.semigroup_integral(alpha, 0.4, 0.9, 0.7) == pytest.approx(K.green_kernel(alpha, 1.3, 0.7), rel=1e-8)
    assert K.unit_mass_integral(alpha, 0.7) == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("alpha", [1.5, 2.0])
def test_kernel_mass_outside_window(alpha):
    t, w = 1.0, 2.0
    inner = integrate.quad(lambda y: K.green_kernel(alpha, t, y), -w, w, limit=200)[0]
    assert K.kernel_mass(alpha, t, w) == pytest.approx(1.0 - inner, abs=1e-9)
    with pytest.raises(DomainError):
        K.kernel_mass(alpha, 1.0, 0.0)


@pytest.mark.parametrize("alpha", [1.2, 1.5, 2.0])
def test_tail_constant_bounds_kernel(alpha):
    k = K.tail_constant(alpha)
    xs = np.array([0.0, 0.5, 1.0, 3.0, 17.0, 120.0, 600.0])
    assert np.all(K.green_kernel(alpha, 1.0, xs) * (1 + xs ** (1 + alpha)) <= k * (1 + 1e-12))


def test_kernel_profile_mass_and_tail_bound():
    prof = K.kernel_profile(1.5, 30.0, 4001)
    assert prof.values.shape == (4001,)
    assert np.allclose(prof.values, prof.values[::-1])
    assert abs(prof.mass - 1.0) <= prof.tail_bound + 1e-4
    with pytest.raises(ValueError):
        prof.values[0] = 1.0


@pytest.mark.parametrize("alpha", ALPHAS)
def test_squared_mass_constant_formula(alpha):
    expected = 2 ** (-1 / alpha) * gamma(1 + 1 / alpha) / math.pi * alpha / (alpha - 1)
    assert K.squared_mass_constant(alpha) == pytest.approx(expected, rel=1e-12)


def test_c2_is_inverse_sqrt_2pi():
    assert abs(K.squared_mass_constant(2.0) - 1 / math.sqrt(2 * math.pi)) <= 1e-10


@pytest.mark.parametrize("alpha", [1.5, 2.0])
def test_squared_mass_against_space_time_double_quadrature(alpha):
    a, b, t = 0.2, 0.7, 1.0

    def inner(r):
        s = t - r
        width = 40 * s ** (1 / alpha)
        return 2 * integrate.quad(lambda x: K.green_kernel(alpha, s, x) ** 2, 0, width, limit=200)[0]

    ref = integrate.quad(inner, a, b, epsabs=1e-12, epsrel=1e-9)[0]
    assert K.squared_mass_integral(alpha, a, b, t) == pytest.approx(ref, rel=1e-6)
    assert K.squared_mass_closed_form(alpha, a, b, t) == pytest.approx(ref, rel=1e-6)


def test_squared_mass_domain():
    with pytest.raises(DomainError):
        K.squared_mass_integral(1.5, 0.5, 0.2, 1.0)
    assert K.squared_mass_integral(1.5, 0.3, 0.3, 1.0) == 0.0


def test_delta_metric():
    a = 1.5
    d = K.delta_metric(a, P(1.0, 0.0), P(0.5, 2.0))
    assert d == pytest.approx(0.5 ** (1 / 6) + 2.0 ** 0.25)
    assert K.delta_metric(a, P(0.3, 0.1), P(0.3, 0.1)) == 0.0


@pytest.mark.parametrize("alpha", ALPHAS)
@pytest.mark.parametrize("s,t", [(1e-6, 1.0), (0.3, 1.0), (0.9, 1.0), (1.0, 2.5)])
def test_covariance_same_position_closed_form(alpha, s, t):
    # cov(v(t,x), v(s,x)) = int_0^s G(t+s-2r, 0) dr in closed form
    g = (alpha - 1) / alpha
    ref = K.kernel_at_origin(alpha) / (2 * g) * ((t + s) ** g - (t - s) ** g)
    assert K.covariance_exact(alpha, P(t, 0.4), P(s, 0.4)) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("alpha", [1.3, 1.5, 2.0])
@pytest.mark.parametrize("h", [0.05, 0.5, 2.0])
def test_covariance_same_time_space_quadrature(alpha, h):
    t = 0.8
    ref = integrate.quad(lambda tau: K.green_kernel(alpha, 2 * tau, h) if tau > 0 else 0.0, 0, t,
                         epsabs=1e-13, epsrel=1e-10, limit=200)[0]
    assert K.covariance_exact(alpha, P(t, 0.0), P(t, h)) == pytest.approx(ref, rel=1e-7)


@given(alphas, st.floats(0.05, 2.0), st.floats(0.0, 1.0), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_increment_variance_routes_agree(alpha, t, frac, x, y):
    pt, ps = P(t, x), P(t * frac, y)
    a = K.increment_variance_exact(alpha, pt, ps)
    b = K.g_diff_sq_integral(alpha, pt, ps)
    assert a == pytest.approx(b, rel=1e-7, abs=1e-12)
    c = K.squared_mass_constant(alpha)
    g = (alpha - 1) / alpha
    assert -1e-12 <= a <= 2 * c * (t**g + (t * frac) ** g) + 1e-12


def test_increment_variance_order_and_zero():
    with pytest.raises(DomainError):
        K.increment_variance_exact(1.5, P(0.2, 0), P(0.5, 0))
    assert K.increment_variance_exact(1.5, P(0.5, 1.0), P(0.5, 1.0)) == 0.0


@pytest.mark.parametrize("alpha", [1.2, 1.5, 2.0])
def test_zeta_minimum_matches_brute_force(alpha):
    zm = K.zeta_min(alpha)
    xs = np.concatenate([np.linspace(0, 1, 200_001), np.linspace(1, 100, 200_001)])
    assert abs(zm.value - K.zeta(alpha, xs).min()) <= 1e-6
    assert zm.value > 0


@given(alphas, st.floats(0.0, 1e4))
def test_zeta_above_minimum(alpha, x):
    assert K.zeta(alpha, x) >= K.zeta_min(alpha).value - 1e-12


def test_zeta_domain():
    with pytest.raises(DomainError):
        K.zeta(1.5, -1.0)


@given(st.floats(0.1, 5.0), st.floats(0.01, 3.0))
def test_psi_closed_forms(a, rho):
    assert K.psi(a, 1.0, rho) == pytest.approx(math.log((rho + a) / rho), rel=1e-9)
    assert K.psi(a, 2.0, rho) == pytest.approx(math.atan(a / math.sqrt(rho)) / math.sqrt(rho), rel=1e-9)


@given(st.floats(0.1, 5.0), st.floats(0.2, 3.0), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_psi_monotone_in_rho(a, nu, r1, r2):
    lo, hi = sorted((r1, r2))
    assert K.psi(a, nu, lo) >= K.psi(a, nu, hi) * (1 - 1e-12)


def test_psi_domain():
    with pytest.raises(DomainError):
        K.psi(1.0, 1.0, 0.0)
