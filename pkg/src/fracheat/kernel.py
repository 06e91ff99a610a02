"""Fractional heat kernel and the quadrature identities built on it.

The kernel is

    G_alpha(t, x) = (1 / pi) * int_0^inf cos(lam * x) exp(-t lam^alpha) dlam,

the density of a symmetric alpha-stable law at time ``t``. All functions
here are pure and safe to call concurrently; per-alpha constants are
memoised with :func:`functools.lru_cache`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

from .errors import DomainError, NumericError

# exp(-t * LAM_MAX**alpha) < 1e-16 beyond the truncation point
_LOG_CUTOFF = math.log(1e16)


def validate_alpha(alpha: float) -> float:
    """Return ``alpha`` as float after checking ``1 < alpha <= 2``."""
    a = float(alpha)
    if not (1.0 < a <= 2.0) or not math.isfinite(a):
        raise DomainError(f"alpha must lie in (1, 2], got {alpha!r}")
    return a


@dataclass(frozen=True)
class ParabolicPoint:
    """Space-time point ``(t, x)`` with ``t >= 0``."""

    t: float
    x: float

    def __post_init__(self):
        if not (math.isfinite(self.t) and math.isfinite(self.x)):
            raise DomainError("ParabolicPoint coordinates must be finite")
        if self.t < 0:
            raise DomainError(f"time must be non-negative, got {self.t}")


def _quad(func, a, b, *, tol_abs, tol_rel=1e-12, limit=400, **kw):
    """Wrap ``scipy.integrate.quad`` and turn poor convergence into errors."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(func, a, b, epsabs=tol_abs, epsrel=tol_rel, limit=limit, **kw)
    if not math.isfinite(val) or err > max(1e-7 * abs(val), 1e3 * tol_abs):
        raise NumericError(f"quadrature did not converge (error estimate {err:.3g})", achieved=err)
    return val


def _fourier_cutoff(alpha: float, t: float) -> float:
    return (_LOG_CUTOFF / t) ** (1.0 / alpha)


def _green_scalar(alpha: float, t: float, x: float) -> float:
    if alpha == 2.0:
        return math.exp(-x * x / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)
    lam_max = _fourier_cutoff(alpha, t)
    tol = 1e-14 * lam_max
    ax = abs(x)

    def f(lam):
        return math.exp(-t * lam**alpha)

    if ax == 0.0:
        val = _quad(f, 0.0, lam_max, tol_abs=tol)
    else:
        val = _quad(f, 0.0, lam_max, tol_abs=tol, weight="cos", wvar=ax)
    return val / math.pi


def green_kernel(alpha: float, t: float, x):
    """Evaluate the fractional heat kernel ``G_alpha(t, x)``.

    Parameters
    ----------
    alpha : float
        Stability index in (1, 2].
    t : float
        Time, strictly positive.
    x : float or array_like
        Space coordinate(s).

    Returns
    -------
    float or ndarray
        Kernel values. For ``alpha == 2`` the Gaussian closed form is used,
        otherwise a cosine-weighted Gauss-Kronrod quadrature of the Fourier
        integral truncated where ``exp(-t lam^alpha) < 1e-16``.
    """
    alpha = validate_alpha(alpha)
    t = float(t)
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    if np.ndim(x) == 0:
        return _green_scalar(alpha, t, float(x))
    xs = np.asarray(x, dtype=float)
    out = np.array([_green_scalar(alpha, t, v) for v in xs.ravel()])
    return out.reshape(xs.shape)


def green_kernel_quadrature(alpha: float, t: float, x: float) -> float:
    """Quadrature path for any alpha, including 2 (used to cross-check the closed form)."""
    alpha = validate_alpha(alpha)
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    lam_max = _fourier_cutoff(alpha, t)
    tol = 1e-15 * lam_max
    f = lambda lam: math.exp(-t * lam**alpha)  # noqa: E731
    if x == 0:
        return _quad(f, 0.0, lam_max, tol_abs=tol) / math.pi
    return _quad(f, 0.0, lam_max, tol_abs=tol, weight="cos", wvar=abs(x)) / math.pi


@lru_cache(maxsize=None)
def kernel_at_origin(alpha: float) -> float:
    """``G_alpha(1, 0)``, computed once per alpha by quadrature."""
    alpha = validate_alpha(alpha)
    return green_kernel_quadrature(alpha, 1.0, 0.0)


def kernel_mass(alpha: float, t: float, half_width: float) -> float:
    """Mass of ``G_alpha(t, .)`` outside ``[-half_width, half_width]``.

    Uses ``1 - mass = (2/pi) int_0^inf sin(lam w) (1 - exp(-t lam^alpha)) / lam dlam``,
    which avoids cancellation when the deficit is small.
    """
    alpha = validate_alpha(alpha)
    if not (t > 0 and half_width > 0):
        raise DomainError("t and half_width must be positive")
    if alpha == 2.0:
        return float(special.erfc(half_width / (2.0 * math.sqrt(t))))

    def f(lam):
        return -math.expm1(-t * lam**alpha) / lam if lam > 0 else 0.0

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, 0.0, np.inf, weight="sin", wvar=half_width, limlst=200)
    if not math.isfinite(val) or err > 1e-6:
        raise NumericError("tail-mass quadrature did not converge", achieved=err)
    return max(0.0, 2.0 * val / math.pi)


@lru_cache(maxsize=None)
def tail_constant(alpha: float) -> float:
    """Fitted ``K_alpha = sup_x G_alpha(1, x) (1 + |x|^(1+alpha))``.

    The supremum is taken over a dense grid on [0, 200] together with the
    large-|x| limit ``Gamma(1+alpha) sin(pi alpha / 2) / pi`` for alpha < 2.
    """
    alpha = validate_alpha(alpha)
    xs = np.unique(np.concatenate([np.linspace(0.0, 10.0, 201), np.geomspace(10.0, 200.0, 60)]))
    vals = green_kernel(alpha, 1.0, xs) * (1.0 + xs ** (1.0 + alpha))
    k = float(vals.max())
    if alpha < 2.0:
        k = max(k, math.gamma(1.0 + alpha) * math.sin(math.pi * alpha / 2.0) / math.pi)
    return k


@dataclass(frozen=True)
class KernelProfile:
    """Samples of ``G_alpha(1, .)`` on a uniform symmetric grid."""

    alpha: float
    half_width: float
    n: int
    x: np.ndarray
    values: np.ndarray
    mass: float
    tail_bound: float


def kernel_profile(alpha: float, L: float, n: int) -> KernelProfile:
    """Tabulate ``G_alpha(1, x)`` on ``n`` uniform nodes of ``[-L, L]``.

    The returned ``tail_bound = 2 K_alpha / (alpha L^alpha)`` bounds the mass
    lost outside the window.
    """
    alpha = validate_alpha(alpha)
    if not L > 0:
        raise DomainError("L must be positive")
    if n < 16:
        raise DomainError("n must be at least 16")
    x = np.linspace(-L, L, n)
    half = (n + 1) // 2
    right = green_kernel(alpha, 1.0, x[n - half:])
    values = np.concatenate([right[::-1][: n - half], right]) if n % 2 == 0 else np.concatenate([right[::-1][:-1], right])
    values.setflags(write=False)
    x.setflags(write=False)
    mass = float(np.trapezoid(values, x))
    tail_bound = 2.0 * tail_constant(alpha) / (alpha * L**alpha)
    return KernelProfile(alpha, float(L), int(n), x, values, mass, tail_bound)


@lru_cache(maxsize=None)
def squared_mass_constant(alpha: float) -> float:
    """``c_alpha = 2^(-1/alpha) G_alpha(1, 0) alpha / (alpha - 1)``.

    Makes ``int_a^b int G_alpha(t-r, x-v)^2 dv dr = c_alpha ((t-a)^g - (t-b)^g)``
    exact, with ``g = (alpha - 1) / alpha``.
    """
    alpha = validate_alpha(alpha)
    return 2.0 ** (-1.0 / alpha) * kernel_at_origin(alpha) * alpha / (alpha - 1.0)


def squared_mass_closed_form(alpha: float, a: float, b: float, t: float) -> float:
    """Closed form ``c_alpha ((t-a)^g - (t-b)^g)``."""
    g = (alpha - 1.0) / alpha
    return squared_mass_constant(alpha) * ((t - a) ** g - (t - b) ** g)


def squared_mass_integral(alpha: float, a: float, b: float, t: float) -> float:
    """Quadrature of ``int_a^b int_R G_alpha(t-r, x-v)^2 dv dr``.

    The inner space integral equals ``G_alpha(2(t-r), 0)`` by the semigroup
    property; the outer integral is done by adaptive quadrature with every
    integrand value itself a Fourier quadrature.
    """
    alpha = validate_alpha(alpha)
    if not (0.0 <= a <= b <= t):
        raise DomainError(f"need 0 <= a <= b <= t, got a={a}, b={b}, t={t}")
    if a == b:
        return 0.0

    def f(tau):
        return _green_scalar(alpha, 2.0 * tau, 0.0) if tau > 0 else 0.0

    lo, hi = t - b, t - a
    # substitute tau = u^k to remove the tau^(-1/alpha) endpoint singularity
    k = alpha / (alpha - 1.0)
    g = lambda u: f(u**k) * k * u ** (k - 1.0)  # noqa: E731
    scale = hi ** (1.0 - 1.0 / alpha)
    return _quad(g, lo ** (1.0 / k), hi ** (1.0 / k), tol_abs=1e-14 * scale, tol_rel=1e-11)


def delta_metric(alpha: float, p1: ParabolicPoint, p2: ParabolicPoint) -> float:
    """Parabolic distance ``|t-s|^((alpha-1)/(2 alpha)) + |x-y|^((alpha-1)/2)``."""
    alpha = validate_alpha(alpha)
    return abs(p1.t - p2.t) ** ((alpha - 1.0) / (2.0 * alpha)) + abs(p1.x - p2.x) ** ((alpha - 1.0) / 2.0)


def _ordered(p_t: ParabolicPoint, p_s: ParabolicPoint):
    if p_s.t > p_t.t:
        raise DomainError(f"need s <= t, got s={p_s.t} > t={p_t.t}")
    return p_t.t, p_s.t, abs(p_t.x - p_s.x)


def increment_variance_exact(alpha: float, p_t: ParabolicPoint, p_s: ParabolicPoint) -> float:
    """``E|v(t,x) - v(s,y)|^2`` for the additive Gaussian field, ``s <= t``.

    Computed as ``I1 + I2`` with ``I1 = c_alpha (t-s)^g`` and

        I2 = (1/pi) int_0^inf (1 - e^{-2 s mu}) / (2 mu) |1 - e^{-(t-s) mu} e^{i lam dx}|^2 dlam,

    ``mu = lam^alpha``. The slowly decaying ``mu^-1`` tail beyond the point
    where ``e^{-2 s mu}`` is negligible is integrated analytically and the
    oscillatory parts use QAWO/QAWF cosine quadrature.
    """
    alpha = validate_alpha(alpha)
    t, s, dx = _ordered(p_t, p_s)
    h = t - s
    if h == 0.0 and dx == 0.0:
        return 0.0
    i1 = squared_mass_constant(alpha) * h ** ((alpha - 1.0) / alpha) if h > 0 else 0.0
    if s == 0.0:
        return i1

    lam0 = (20.0 / s) ** (1.0 / alpha)  # e^{-2 s mu} = e^{-40} beyond lam0
    tail = lam0 ** (1.0 - alpha) / (alpha - 1.0)  # int_lam0^inf mu^-1
    scale = s ** ((alpha - 1.0) / alpha)
    tol = 1e-14 * scale

    def damp(lam):
        mu = lam**alpha
        return s if mu == 0.0 else -math.expm1(-2.0 * s * mu) / (2.0 * mu)

    def a_(lam):
        return math.exp(-h * lam**alpha)

    # [0, lam0]: (1-E)/(2mu) * (1 + a^2) - 2 (1-E)/(2mu) * a cos(lam dx)
    # breakpoints at the scales of E and a keep narrow features visible to the quadrature
    lam_a = min(lam0, (40.0 / h) ** (1.0 / alpha)) if h > 0 else lam0
    cuts = sorted({0.0, min(lam0, s ** (-1.0 / alpha)), lam_a, lam0})
    p1 = _piecewise(lambda l: damp(l), cuts, tol) + _piecewise(lambda l: damp(l) * a_(l) ** 2,
                                                               [c for c in cuts if c <= lam_a], tol)
    kw = {"weight": "cos", "wvar": dx} if dx > 0 else {}
    p2 = _piecewise(lambda l: 2.0 * damp(l) * a_(l), [c for c in cuts if c <= lam_a], tol, **kw)

    # [lam0, inf): (1 + a^2)/(2 mu) - a cos(lam dx)/mu, with E dropped
    if h == 0.0:
        t1 = tail
        t2 = _cos_power_tail(alpha, lam0, dx) if dx > 0 else tail
    else:
        lam1 = max(lam0, (40.0 / h) ** (1.0 / alpha))  # a < e^{-40} beyond lam1
        t1 = 0.5 * tail
        t2 = 0.0
        if lam1 > lam0:
            t1 += _quad(lambda l: a_(l) ** 2 / (2.0 * l**alpha), lam0, lam1, tol_abs=tol)
            kw = {"weight": "cos", "wvar": dx} if dx > 0 else {}
            t2 = _quad(lambda l: a_(l) / l**alpha, lam0, lam1, tol_abs=tol, limit=2000, **kw)
    i2 = (p1 - p2 + t1 - t2) / math.pi
    return i1 + max(i2, 0.0)


def _piecewise(f, cuts, tol, **kw) -> float:
    return sum(_quad(f, a, b, tol_abs=tol, **kw) for a, b in zip(cuts[:-1], cuts[1:]) if b > a)


def _cos_power_tail(alpha: float, lam0: float, omega: float) -> float:
    """``int_lam0^inf cos(omega lam) lam^-alpha dlam`` for ``1 < alpha <= 2``.

    Uses ``int_0^inf (cos u - 1) u^-alpha du = pi / (2 Gamma(alpha) cos(pi alpha / 2))``
    and integrates the remaining finite piece by quadrature.
    """
    A = omega * lam0
    reg = math.pi / (2.0 * math.gamma(alpha) * math.cos(math.pi * alpha / 2.0))
    tol = 1e-15
    head = lambda u: -2.0 * math.sin(0.5 * u) ** 2 * u ** (-alpha)  # noqa: E731
    if A <= 1.0:
        inner = reg - _quad(head, 0.0, A, tol_abs=tol) + A ** (1.0 - alpha) / (alpha - 1.0)
    else:
        mid = _quad(lambda u: u ** (-alpha), 1.0, A, tol_abs=tol, weight="cos", wvar=1.0, limit=2000)
        inner = reg - _quad(head, 0.0, 1.0, tol_abs=tol) - mid + 1.0 / (alpha - 1.0)
    return omega ** (alpha - 1.0) * inner


def covariance_exact(alpha: float, p1: ParabolicPoint, p2: ParabolicPoint) -> float:
    """Covariance of the additive Gaussian field at two points."""
    alpha = validate_alpha(alpha)
    if p2.t > p1.t:
        p1, p2 = p2, p1
    c = squared_mass_constant(alpha)
    g = (alpha - 1.0) / alpha
    d = increment_variance_exact(alpha, p1, p2)
    return 0.5 * (c * p1.t**g + c * p2.t**g - d)


def g_diff_sq_integral(alpha: float, p_t: ParabolicPoint, p_s: ParabolicPoint) -> float:
    """``int_0^t int_R (1_{r<t} G(t-r, x-v) - 1_{r<s} G(s-r, y-v))^2 dv dr``.

    Evaluated in the time domain: the space integral of each product of
    kernels collapses by the semigroup property, leaving

        int_0^h G(2 tau, 0) dtau
        + int_0^s [G(2(h+tau), 0) + G(2 tau, 0) - 2 G(h + 2 tau, dx)] dtau,

    with ``h = t - s``. This path is independent of the Fourier computation
    in :func:`increment_variance_exact`, and both must agree.
    """
    alpha = validate_alpha(alpha)
    t, s, dx = _ordered(p_t, p_s)
    h = t - s
    if h == 0.0 and dx == 0.0:
        return 0.0
    first = squared_mass_integral(alpha, s, t, t) if h > 0 else 0.0
    if s == 0.0:
        return first

    def f(tau):
        if tau <= 0.0:
            return 0.0
        diag = _green_scalar(alpha, 2.0 * (h + tau), 0.0) + _green_scalar(alpha, 2.0 * tau, 0.0)
        return diag - 2.0 * _green_scalar(alpha, h + 2.0 * tau, dx)

    # tau = u^k removes the tau^(-1/alpha) singularity of the diagonal term at 0
    k = alpha / (alpha - 1.0)
    g = lambda u: f(u**k) * k * u ** (k - 1.0)  # noqa: E731
    scale = s ** ((alpha - 1.0) / alpha)
    second = _quad(g, 0.0, s ** (1.0 / k), tol_abs=1e-13 * scale, tol_rel=1e-10, limit=200)
    return first + second


def zeta(alpha: float, x):
    """``(x+1)^g - x^g + min(x, 1)^g`` with ``g = (alpha-1)/alpha``."""
    alpha = validate_alpha(alpha)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("zeta requires x >= 0")
    g = (alpha - 1.0) / alpha
    out = (x + 1.0) ** g - x**g + np.minimum(x, 1.0) ** g
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ZetaMinimum:
    """Global minimum of ``zeta`` over ``[0, inf)``."""

    alpha: float
    value: float
    argmin: float
    search_max: float


@lru_cache(maxsize=None)
def zeta_min(alpha: float, search_max: float = 100.0) -> ZetaMinimum:
    """Minimise ``zeta`` over ``[0, inf)``.

    ``zeta`` rises on [0, 1] and falls back towards its limit 1 on
    ``[1, inf)``, so it is not unimodal; each branch is searched separately
    with a bounded Brent/golden-section search (``xatol=1e-10``) and the
    result is compared with the endpoint values and the limit at infinity.
    """
    alpha = validate_alpha(alpha)
    cands = [(zeta(alpha, 0.0), 0.0), (zeta(alpha, 1.0), 1.0), (zeta(alpha, search_max), search_max)]
    for lo, hi in ((0.0, 1.0), (1.0, search_max)):
        res = optimize.minimize_scalar(
            lambda x: zeta(alpha, x), bounds=(lo, hi), method="bounded", options={"xatol": 1e-10}
        )
        cands.append((float(res.fun), float(res.x)))
    val, arg = min(cands)
    if 1.0 < val:
        val, arg = 1.0, math.inf
    if not val > 0:
        raise NumericError("zeta minimum is not positive", achieved=val)
    return ZetaMinimum(alpha, float(val), float(arg), float(search_max))


def psi(a: float, nu: float, rho: float) -> float:
    """``Psi_{a,nu}(rho) = int_0^a dx / (rho + x^nu)`` by adaptive quadrature."""
    if not (a > 0 and nu > 0 and rho > 0):
        raise DomainError("psi requires positive arguments")
    return _quad(lambda x: 1.0 / (rho + x**nu), 0.0, a, tol_abs=1e-14 * a / rho, tol_rel=1e-12)


def semigroup_integral(alpha: float, t: float, s: float, x: float) -> float:
    """``int_R G_alpha(t, x - y) G_alpha(s, y) dy`` by adaptive quadrature.

    Should equal ``G_alpha(t + s, x)``.
    """
    alpha = validate_alpha(alpha)
    if not (t > 0 and s > 0):
        raise DomainError("t and s must be positive")

    def f(y):
        return _green_scalar(alpha, t, x - y) * _green_scalar(alpha, s, y)

    scale = (t + s) ** (-1.0 / alpha)
    parts = [(-np.inf, min(0.0, x)), (min(0.0, x), max(0.0, x)), (max(0.0, x), np.inf)]
    return sum(_quad(f, a, b, tol_abs=1e-13 * scale, tol_rel=1e-10) for a, b in parts if a < b)


def unit_mass_integral(alpha: float, t: float) -> float:
    """``int_R G_alpha(t, x) dx`` by quadrature of the point values."""
    alpha = validate_alpha(alpha)
    f = lambda y: _green_scalar(alpha, t, y)  # noqa: E731
    return 2.0 * _quad(f, 0.0, np.inf, tol_abs=1e-13, tol_rel=1e-10)


def scaling_residual(alpha: float, t: float, x: float) -> float:
    """``|G(t, x) - t^(-1/alpha) G(1, x t^(-1/alpha))| / (1 + |G(t, x)|)``."""
    alpha = validate_alpha(alpha)
    lhs = _green_scalar(alpha, t, x)
    rhs = t ** (-1.0 / alpha) * _green_scalar(alpha, 1.0, x * t ** (-1.0 / alpha))
    return abs(lhs - rhs) / (1.0 + abs(lhs))
