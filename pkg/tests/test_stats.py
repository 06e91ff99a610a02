import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from fracheat import DomainError
from fracheat import kernel as K
from fracheat.kernel import ParabolicPoint as P
from fracheat.stats import (Ensemble, PairDensity, default_lags, exact_gaussian_pair_density, expected_holder_slope,
                            fit_bound_constant, gaussian_bound_check, gaussian_envelope, gaussian_pair_covariance,
                            holder_fit, increment_moments, kde_density, kde_density_pair, kde_evaluate,
                            matched_polynomial_constant, normal_pdf_1d, polynomial_bound_check, polynomial_dominates,
                            polynomial_envelope, silverman_bandwidth)


def fbm_paths(n_paths, n_steps, step, hurst, rng):
    """Exact fractional Brownian motion by Cholesky, starting at 0."""
    t = step * np.arange(1, n_steps + 1)
    cov = 0.5 * (t[:, None] ** (2 * hurst) + t[None, :] ** (2 * hurst) - np.abs(t[:, None] - t[None, :]) ** (2 * hurst))
    chol = np.linalg.cholesky(cov + 1e-13 * np.eye(n_steps))
    x = rng.standard_normal((n_paths, n_steps)) @ chol.T
    return np.concatenate([np.zeros((n_paths, 1)), x], axis=1)


def test_expected_slopes():
    assert expected_holder_slope(2.0, "time") == pytest.approx(0.5)
    assert expected_holder_slope(2.0, "space") == pytest.approx(1.0)
    assert expected_holder_slope(1.5, "time", p=4) == pytest.approx(4 * 0.5 / 3)
    with pytest.raises(DomainError):
        expected_holder_slope(2.0, "diagonal")


def test_default_lags_span():
    lags = default_lags(4)
    assert lags[0] == 4 and lags[-1] == 400 and lags.size >= 5


@pytest.mark.parametrize("hurst", [0.25, 0.5])
def test_holder_fit_recovers_fbm_exponent_in_time(hurst):
    rng = np.random.default_rng(1)
    paths = fbm_paths(64, 600, 1e-3, hurst, rng)  # (n, nt)
    vals = np.broadcast_to(paths[:, :, None, None], (64, 601, 3, 1))
    ens = Ensemble(1e-3 * np.arange(601), np.arange(3.0), vals, 1e-3, 1.0)
    fit = holder_fit(ens, "time", lags=default_lags(4))
    assert fit.slope == pytest.approx(2 * hurst, abs=0.05)
    assert fit.r2 > 0.98


def test_holder_fit_space_brownian():
    rng = np.random.default_rng(2)
    inc = rng.standard_normal((40, 1, 2048, 2)) * math.sqrt(1e-3)
    vals = np.cumsum(inc, axis=2)
    ens = Ensemble(np.array([1.0]), 1e-3 * np.arange(2048), vals, 0.1, 1e-3)
    fit = holder_fit(ens, "space", alpha=2.0)
    assert fit.slope == pytest.approx(1.0, abs=0.03)
    assert fit.expected == 1.0
    assert set(fit.to_dict()) >= {"slope", "stderr", "lags", "moments"}


def test_holder_fit_validation():
    ens = Ensemble(np.arange(50.0), np.arange(4.0), np.zeros((3, 50, 4, 1)), 1.0, 1.0)
    with pytest.raises(DomainError):
        holder_fit(ens, "time")  # cannot span two decades
    with pytest.raises(DomainError):
        holder_fit(ens, "time", lags=[1, 2, 3, 4, 5])
    with pytest.raises(DomainError):
        holder_fit(ens, "sideways")
    bad = Ensemble(np.array([0.0, 1.0, 3.0]), np.arange(4.0), np.zeros((3, 3, 4, 1)), 1.0, 1.0)
    with pytest.raises(DomainError):
        holder_fit(bad, "time")


def test_increment_moments_brownian():
    rng = np.random.default_rng(3)
    inc = rng.standard_normal((4000, 10, 1, 1)) * math.sqrt(0.1)
    vals = np.concatenate([np.zeros((4000, 1, 1, 1)), np.cumsum(inc, axis=1)], axis=1)
    ens = Ensemble(0.1 * np.arange(11), np.array([0.0]), vals, 0.1, 1.0)
    (m,) = increment_moments(ens, [(P(1.0, 0.0), P(0.3, 0.0))])
    assert abs(m.mean - 0.7) < 4 * m.stderr
    (m4,) = increment_moments(ens, [(P(1.0, 0.0), P(0.3, 0.0))], p=4)
    assert abs(m4.mean - 3 * 0.49) < 4 * m4.stderr
    with pytest.raises(DomainError):
        increment_moments(ens, [(P(0.55, 0.0), P(0.3, 0.0))])
    with pytest.raises(DomainError):
        increment_moments(ens, [])
    small = Ensemble(ens.t, ens.x, vals[:50], 0.1, 1.0)
    with pytest.raises(DomainError):
        increment_moments(small, [(P(1.0, 0.0), P(0.3, 0.0))])


# --- KDE -------------------------------------------------------------------


def test_kde_matches_scipy_gaussian_kde_in_1d():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(3000) * 1.7 + 0.4
    h = silverman_bandwidth(x[:, None])
    ref = sps.gaussian_kde(x, bw_method="silverman")
    assert h[0] == pytest.approx(math.sqrt(ref.covariance[0, 0]), rel=1e-12)
    z = np.linspace(-5, 5, 41)
    assert np.allclose(kde_evaluate(x[:, None], z[:, None]), ref(z), rtol=1e-10, atol=1e-14)
    est = kde_density(x, axes=[z])
    assert np.allclose(est.values, ref(z), rtol=1e-10, atol=1e-14)


def test_kde_normal_accuracy_and_mass():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(20_000)
    est = kde_density(x)
    z = est.axes[0]
    assert np.max(np.abs(est.values - normal_pdf_1d(z, 1.0))) < 0.02
    assert est.integral() == pytest.approx(1.0, abs=1e-3)


def test_kde_2d_grid_agrees_with_pointwise():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((2000, 2))
    ax = [np.linspace(-3, 3, 9), np.linspace(-2, 2, 7)]
    est = kde_density(x, axes=ax)
    assert est.values.shape == (9, 7)
    assert np.allclose(est.values.ravel(), kde_evaluate(x, est.points), rtol=1e-10)


def test_kde_pair_and_limits():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((1500, 2))
    est = kde_density_pair(a, a + 0.1 * rng.standard_normal((1500, 2)), n_grid=5)
    assert est.values.shape == (5, 5, 5, 5)
    with pytest.raises(DomainError):
        kde_density_pair(rng.standard_normal((1500, 3)), rng.standard_normal((1500, 3)))
    with pytest.raises(DomainError):
        kde_density(rng.standard_normal(500))


# --- exact pair densities and envelopes -------------------------------------


def test_pair_covariance_matches_kernel():
    S = gaussian_pair_covariance(2.0, P(0.5, 0.0), P(0.6, 0.0))
    c = K.squared_mass_constant(2.0)
    assert S[0, 0] == pytest.approx(c * 0.5**0.5)
    assert S[1, 1] == pytest.approx(c * 0.6**0.5)
    assert S[0, 1] == pytest.approx(K.covariance_exact(2.0, P(0.6, 0.0), P(0.5, 0.0)))
    assert np.all(np.linalg.eigvalsh(S) > 0)


@pytest.mark.parametrize("d", [1, 2])
def test_exact_pair_density_normalised(d):
    z = np.linspace(-3, 3, 61 if d == 1 else 25)
    pd = exact_gaussian_pair_density(2.0, P(0.5, 0.0), P(0.6, 0.3), z, d)
    vals = pd.values.reshape((z.size,) * (2 * d))
    for _ in range(2 * d):
        vals = np.trapezoid(vals, z, axis=-1)
    assert float(vals) == pytest.approx(1.0, abs=2e-3 if d == 1 else 2e-2)
    with pytest.raises(DomainError):
        exact_gaussian_pair_density(2.0, P(0.5, 0.0), P(0.5, 0.0), z)
    with pytest.raises(DomainError):
        exact_gaussian_pair_density(2.0, P(0.5, 0.0), P(0.6, 0.0), z, 3)


@given(st.floats(0.1, 5.0), st.floats(0.05, 3.0))
def test_fit_bound_constant_is_tight(scale, delta):
    w = np.linspace(0, 3, 50)
    values = gaussian_envelope(1.0 + scale, delta, w, 1) * 0.999
    c = fit_bound_constant(values, lambda c: gaussian_envelope(c, delta, w, 1))
    assert np.all(values <= gaussian_envelope(c, delta, w, 1))
    assert c >= 1.0
    if c > 1.0:
        assert not np.all(values <= gaussian_envelope(c * (1 - 1e-6), delta, w, 1))


def test_fit_bound_constant_floor_and_infinite():
    w = np.linspace(0, 1, 10)
    assert fit_bound_constant(np.zeros(10), lambda c: gaussian_envelope(c, 1.0, w, 1)) == 1.0
    assert fit_bound_constant(np.full(10, np.inf), lambda c: gaussian_envelope(c, 1.0, w, 1), c_max=1e6) == math.inf


@given(st.floats(1.0, 50.0), st.sampled_from([0.5, 1.0, 2.0, 6.0]), st.sampled_from([1, 2]))
def test_matched_polynomial_dominates(c, p, d):
    w = np.concatenate([np.linspace(0, 20, 400), np.geomspace(20, 1e3, 50)])
    assert polynomial_dominates(c, p, d, 0.7, w)
    assert matched_polynomial_constant(c, p, d) >= c


def test_polynomial_envelope_shape():
    w = np.array([0.0, 0.5, 1.0, 2.0])
    v = polynomial_envelope(2.0, 1.0, w, 1, 4.0)
    assert v[0] == v[1] == v[2] == 2.0
    assert v[3] == pytest.approx(2.0 * 0.25)


def test_bound_checks_on_exact_pairs():
    pairs = [(P(0.5, 0.0), P(0.6, 0.0)), (P(0.5, 1.0), P(0.55, 1.0)), (P(0.3, -1.0), P(0.5, -1.0))]
    z = np.linspace(-2.5, 2.5, 50)
    dens = [exact_gaussian_pair_density(2.0, a, b, z) for a, b in pairs]
    g = gaussian_bound_check(dens, 2.0)
    assert g.holds and g.stable and all(c > 1.0 for c in g.constants)
    pb = polynomial_bound_check(dens, 2.0, p=2.0)
    assert pb.holds
    assert g.to_dict()["grid_points"] == 2500
    same = PairDensity(P(0.5, 0.0), P(0.5, 0.0), dens[0].points, dens[0].values, 1)
    with pytest.raises(DomainError):
        gaussian_bound_check([same], 2.0)
