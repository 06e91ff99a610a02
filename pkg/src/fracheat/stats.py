"""Increment moments, Hölder-exponent fits, kernel density estimates and
two-point density envelopes.

Everything here is a deterministic function of immutable sample arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats as sps

from .errors import DomainError
from .kernel import ParabolicPoint, covariance_exact, delta_metric, squared_mass_constant, validate_alpha

# ---------------------------------------------------------------------------
# sample containers


@dataclass(frozen=True)
class Ensemble:
    """Field values of ``n`` independent trajectories on common recorded nodes.

    Attributes
    ----------
    t, x : ndarray
        Recorded time and space coordinates.
    values : ndarray
        Shape ``(n, len(t), len(x), d)``.
    dt, dx : float
        Steps of the underlying solver grid (resolution limits for lags).
    """

    t: np.ndarray
    x: np.ndarray
    values: np.ndarray
    dt: float
    dx: float

    @classmethod
    def from_samples(cls, samples: Sequence) -> "Ensemble":
        if not samples:
            raise DomainError("no samples")
        s0 = samples[0]
        vals = np.stack([s.values for s in samples])
        return cls(s0.t, s0.x, vals, s0.grid.dt, s0.grid.dx)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def node(self, p: ParabolicPoint) -> tuple[int, int]:
        """Indices of the recorded node at ``p`` (must coincide up to rounding)."""
        i = int(np.argmin(np.abs(self.t - p.t)))
        j = int(np.argmin(np.abs(self.x - p.x)))
        if abs(self.t[i] - p.t) > 1e-9 * max(1.0, abs(p.t)) or abs(self.x[j] - p.x) > 1e-9 * max(1.0, abs(p.x)):
            raise DomainError(f"point {p} is not a recorded node")
        return i, j


# ---------------------------------------------------------------------------
# increment moments and Hölder fits


@dataclass(frozen=True)
class MomentEstimate:
    pair: tuple
    p: float
    mean: float
    stderr: float
    n: int


def increment_moments(ens: Ensemble, pairs: Sequence[tuple[ParabolicPoint, ParabolicPoint]], p: float = 2.0
                      ) -> list[MomentEstimate]:
    """Monte Carlo estimates of ``E|u(t,x) - u(s,y)|^p`` with standard errors."""
    if not pairs:
        raise DomainError("pairs must be non-empty")
    if ens.n < 100:
        raise DomainError(f"need at least 100 samples, got {ens.n}")
    out = []
    for a, b in pairs:
        i1, j1 = ens.node(a)
        i2, j2 = ens.node(b)
        inc = np.linalg.norm(ens.values[:, i1, j1] - ens.values[:, i2, j2], axis=-1) ** p
        out.append(MomentEstimate((a, b), p, float(inc.mean()), float(inc.std(ddof=1) / math.sqrt(ens.n)), ens.n))
    return out


@dataclass(frozen=True)
class HolderFit:
    """Least-squares fit of ``log E|increment|^p`` against ``log lag``."""

    direction: str
    p: float
    slope: float
    stderr: float
    r2: float
    lags: np.ndarray = field(repr=False)
    moments: np.ndarray = field(repr=False)
    expected: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "direction": self.direction, "p": self.p, "slope": self.slope, "stderr": self.stderr, "r2": self.r2,
            "expected": self.expected, "lags": self.lags.tolist(), "moments": self.moments.tolist(),
        }


def expected_holder_slope(alpha: float, direction: str, p: float = 2.0) -> float:
    """``p (alpha-1)/(2 alpha)`` in time and ``p (alpha-1)/2`` in space."""
    alpha = validate_alpha(alpha)
    if direction == "time":
        return p * (alpha - 1.0) / (2.0 * alpha)
    if direction == "space":
        return p * (alpha - 1.0) / 2.0
    raise DomainError(f"direction must be 'time' or 'space', got {direction!r}")


def default_lags(min_lag: int, n_scales: int = 9, decades: float = 2.0) -> np.ndarray:
    """Geometric lag ladder in index units starting at ``min_lag``."""
    lags = np.unique(np.round(np.geomspace(min_lag, min_lag * 10**decades, n_scales)).astype(np.int64))
    return lags


def holder_fit(ens: Ensemble, direction: str, p: float = 2.0, lags: Sequence[int] | None = None,
               alpha: float | None = None, min_cells: int = 4) -> HolderFit:
    """Fit the log-log slope of increment moments along one direction.

    Space increments are taken at the last recorded time over all pairs of
    recorded nodes ``lag`` apart; time increments end at the last recorded
    time, ``u(t_end) - u(t_end - lag)``, averaged over all recorded nodes.

    Parameters
    ----------
    ens : Ensemble
        Samples; recorded coordinates must be uniformly spaced.
    direction : {"time", "space"}
    p : float
        Moment order.
    lags : sequence of int, optional
        Lags in units of the recorded spacing. By default nine geometric
        lags spanning two decades from the smallest lag covering
        ``min_cells`` solver cells.
    alpha : float, optional
        If given, the theoretical slope is stored in ``expected``.

    Raises
    ------
    DomainError
        If fewer than 5 lags or less than two decades are available, or a
        lag is below ``min_cells`` solver cells.
    """
    if direction not in ("time", "space"):
        raise DomainError(f"direction must be 'time' or 'space', got {direction!r}")
    coords = ens.t if direction == "time" else ens.x
    cell = ens.dt if direction == "time" else ens.dx
    if coords.size < 2:
        raise DomainError("need at least two recorded coordinates")
    steps = np.diff(coords)
    step = float(steps[0])
    if not np.allclose(steps, step, rtol=1e-9, atol=0):
        raise DomainError("recorded coordinates must be uniformly spaced")
    m0 = max(1, math.ceil(min_cells * cell / step - 1e-9))
    lags = default_lags(m0) if lags is None else np.unique(np.asarray(lags, dtype=np.int64))
    if lags.min() * step < min_cells * cell * (1 - 1e-9):
        raise DomainError(f"lags must cover at least {min_cells} solver cells")
    if lags.max() >= coords.size:
        raise DomainError("largest lag exceeds the recorded range")
    if lags.size < 5 or lags.max() / lags.min() < 100 * (1 - 1e-9):
        raise DomainError("need at least 5 lag scales spanning two decades")
    vals = ens.values
    moments = np.empty(lags.size)
    for k, m in enumerate(lags):
        if direction == "space":
            inc = vals[:, -1, m:, :] - vals[:, -1, :-m, :]
        else:
            inc = vals[:, -1, :, :] - vals[:, -1 - m, :, :]
        moments[k] = np.mean(np.linalg.norm(inc, axis=-1) ** p)
    h = lags * step
    reg = sps.linregress(np.log(h), np.log(moments))
    expected = expected_holder_slope(alpha, direction, p) if alpha is not None else float("nan")
    return HolderFit(direction, float(p), float(reg.slope), float(reg.stderr), float(reg.rvalue**2), h, moments,
                     expected)


# ---------------------------------------------------------------------------
# kernel density estimation


@dataclass(frozen=True)
class DensityEstimate:
    """Density values on a tensor grid.

    ``values[i1, ..., iD]`` is the density at ``(axes[0][i1], ..., axes[D-1][iD])``.
    """

    axes: tuple
    values: np.ndarray
    bandwidth: np.ndarray
    n: int

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def integral(self) -> float:
        v = self.values
        for ax in reversed(self.axes):
            v = np.trapezoid(v, ax, axis=-1)
        return float(v)


def silverman_bandwidth(samples: np.ndarray) -> np.ndarray:
    """Per-dimension Silverman rule ``sigma_j (4 / ((D + 2) n))^(1 / (D + 4))``."""
    x = np.asarray(samples, dtype=float)
    n, D = x.shape
    sd = x.std(axis=0, ddof=1)
    return sd * (4.0 / ((D + 2) * n)) ** (1.0 / (D + 4))


def _gauss(u):
    return np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)


def _kde_grid(x: np.ndarray, h: np.ndarray, axes: Sequence[np.ndarray], chunk: int = 2048) -> np.ndarray:
    n, D = x.shape
    letters = "abcd"[:D]
    expr = ",".join("n" + c for c in letters) + "->" + letters
    out = np.zeros(tuple(a.size for a in axes))
    for lo in range(0, n, chunk):
        xs = x[lo:lo + chunk]
        mats = [_gauss((axes[j][None, :] - xs[:, j, None]) / h[j]) / h[j] for j in range(D)]
        out += np.einsum(expr, *mats, optimize=True) if D > 1 else mats[0].sum(axis=0)
    return out / n


def kde_evaluate(samples: np.ndarray, points: np.ndarray, bandwidth: np.ndarray | None = None) -> np.ndarray:
    """Product-Gaussian KDE evaluated at arbitrary ``points`` of shape ``(M, D)``."""
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    h = silverman_bandwidth(x) if bandwidth is None else np.asarray(bandwidth, dtype=float)
    pts = np.atleast_2d(points)
    out = np.empty(pts.shape[0])
    for lo in range(0, pts.shape[0], 1024):
        z = (pts[lo:lo + 1024, None, :] - x[None, :, :]) / h
        out[lo:lo + 1024] = np.prod(_gauss(z) / h, axis=-1).mean(axis=1)
    return out


def kde_density(samples: np.ndarray, axes: Sequence[np.ndarray] | None = None, bandwidth=None,
                n_grid: int = 101, width: float = 4.0, max_dim: int = 3) -> DensityEstimate:
    """Product-Gaussian KDE on a tensor grid.

    Parameters
    ----------
    samples : ndarray
        ``(n, D)`` sample matrix (a 1-D array is treated as ``D = 1``).
    axes : sequence of ndarray, optional
        Evaluation axes; by default ``n_grid`` points covering the sample
        mean plus or minus ``width`` standard deviations per dimension.
    bandwidth : array_like, optional
        Per-dimension bandwidths; Silverman's rule by default.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, D = x.shape
    if n < 1000:
        raise DomainError(f"KDE needs at least 1000 samples, got {n}")
    if D > max_dim:
        raise DomainError(f"KDE limited to {max_dim} dimensions, got {D}")
    h = silverman_bandwidth(x) if bandwidth is None else np.broadcast_to(np.asarray(bandwidth, float), (D,)).copy()
    if axes is None:
        mu, sd = x.mean(axis=0), x.std(axis=0, ddof=1)
        axes = [np.linspace(mu[j] - width * sd[j], mu[j] + width * sd[j], n_grid) for j in range(D)]
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    if len(axes) != D:
        raise DomainError("one axis per dimension required")
    return DensityEstimate(axes, _kde_grid(x, h, axes), h, n)


def kde_density_pair(samples_s: np.ndarray, samples_t: np.ndarray, axes=None, bandwidth=None,
                     n_grid: int = 25, width: float = 4.0) -> DensityEstimate:
    """Joint KDE of ``(u(s,y), u(t,x))`` in ``2d`` dimensions, for ``d`` in {1, 2}."""
    a = np.asarray(samples_s, dtype=float)
    b = np.asarray(samples_t, dtype=float)
    if a.ndim == 1:
        a, b = a[:, None], b[:, None]
    if a.shape != b.shape:
        raise DomainError("paired samples must have equal shapes")
    if a.shape[1] > 2:
        raise DomainError("two-point densities are limited to d <= 2")
    return kde_density(np.hstack([a, b]), axes, bandwidth, n_grid, width, max_dim=4)


def normal_pdf_1d(z: np.ndarray, var: float) -> np.ndarray:
    return np.exp(-0.5 * z * z / var) / math.sqrt(2.0 * math.pi * var)


# ---------------------------------------------------------------------------
# two-point density envelopes


@dataclass(frozen=True)
class PairDensity:
    """Two-point density ``p(z1, z2)`` tabulated at ``points`` of shape ``(M, 2d)``."""

    p_s: ParabolicPoint
    p_t: ParabolicPoint
    points: np.ndarray
    values: np.ndarray
    d: int

    @classmethod
    def from_estimate(cls, p_s, p_t, est: DensityEstimate) -> "PairDensity":
        return cls(p_s, p_t, est.points, est.values.ravel(), est.dim // 2)

    def separation(self) -> np.ndarray:
        """``|z1 - z2|`` at each point."""
        return np.linalg.norm(self.points[:, :self.d] - self.points[:, self.d:], axis=1)


def gaussian_pair_covariance(alpha: float, p_s: ParabolicPoint, p_t: ParabolicPoint) -> np.ndarray:
    """2x2 covariance of one component of the additive field at two points."""
    c = squared_mass_constant(alpha)
    g = (alpha - 1.0) / alpha
    cov = covariance_exact(alpha, p_s, p_t)
    return np.array([[c * p_s.t**g, cov], [cov, c * p_t.t**g]])


def exact_gaussian_pair_density(alpha: float, p_s: ParabolicPoint, p_t: ParabolicPoint, z_axis: np.ndarray,
                                d: int = 1) -> PairDensity:
    """Closed-form joint normal density of the additive field on a tensor z-grid.

    Components are independent, so the ``2d``-dimensional density is the
    product of ``d`` bivariate normal densities.
    """
    if p_s == p_t:
        raise DomainError("the two points must differ")
    if d not in (1, 2):
        raise DomainError("exact pair densities are tabulated for d in {1, 2}")
    S = gaussian_pair_covariance(alpha, p_s, p_t)
    mvn = sps.multivariate_normal(mean=[0.0, 0.0], cov=S)
    z = np.asarray(z_axis, dtype=float)
    mesh = np.meshgrid(*([z] * (2 * d)), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    vals = np.ones(pts.shape[0])
    for c in range(d):
        vals *= mvn.pdf(np.stack([pts[:, c], pts[:, d + c]], axis=-1))
    return PairDensity(p_s, p_t, pts, vals, d)


def gaussian_envelope(c: float, delta: float, w: np.ndarray, d: int) -> np.ndarray:
    """``c Delta^-d exp(-w^2 / (c Delta^2))``."""
    return c * delta ** (-d) * np.exp(-(np.asarray(w) ** 2) / (c * delta**2))


def polynomial_envelope(c: float, delta: float, w: np.ndarray, d: int, p: float) -> np.ndarray:
    """``c Delta^-d [Delta^2 / w^2 ^ 1]^(p / (4d))``."""
    w = np.asarray(w, dtype=float)
    with np.errstate(divide="ignore"):
        ratio = np.where(w > 0, delta**2 / np.where(w > 0, w, 1.0) ** 2, np.inf)
    return c * delta ** (-d) * np.minimum(ratio, 1.0) ** (p / (4.0 * d))


def matched_polynomial_constant(c: float, p: float, d: int) -> float:
    """Smallest ``c'`` with ``polynomial_envelope(c') >= gaussian_envelope(c)`` everywhere.

    With ``x = w / Delta`` the ratio of envelopes depends on ``x`` only; for
    ``x <= 1`` it suffices that ``c' >= c`` and for ``x >= 1`` that
    ``c' >= c sup_x x^q e^{-x^2/c}`` with ``q = p / (2d)``.
    """
    q = p / (2.0 * d)
    xstar = math.sqrt(q * c / 2.0)
    peak = (q * c / 2.0) ** (q / 2.0) * math.exp(-q / 2.0) if xstar > 1.0 else math.exp(-1.0 / c)
    return c * max(1.0, peak)


def fit_bound_constant(values: np.ndarray, envelope: Callable[[float], np.ndarray], rtol: float = 1e-10,
                       c_max: float = 1e300) -> float:
    """Smallest ``c >= 1`` with ``values <= envelope(c)`` by bisection.

    ``envelope`` must be non-decreasing in ``c`` at every point.
    """
    values = np.asarray(values)

    def ok(c):
        return bool(np.all(values <= envelope(c)))

    lo, hi = 1.0, 1.0
    if ok(hi):
        return 1.0
    while not ok(hi):
        lo, hi = hi, hi * 2.0
        if hi > c_max:
            return math.inf
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class BoundCheck:
    """Fitted envelope constants for several point pairs."""

    envelope: str
    constants: tuple
    c: float
    stable: bool
    spread: float
    grid_points: int

    @property
    def holds(self) -> bool:
        return math.isfinite(self.c)

    def to_dict(self) -> dict:
        return {"envelope": self.envelope, "constants": list(self.constants), "c": self.c, "stable": self.stable,
                "spread": self.spread, "grid_points": self.grid_points, "holds": self.holds}


def _stability(consts, tol):
    arr = np.asarray(consts, dtype=float)
    centre = float(np.median(arr))
    spread = float(np.max(np.abs(arr / centre - 1.0))) if np.all(np.isfinite(arr)) else math.inf
    return spread <= tol, spread


def gaussian_bound_check(densities: Sequence[PairDensity], alpha: float, stability_tol: float = 0.2) -> BoundCheck:
    """Fit ``c`` in ``p(z1, z2) <= c Delta^-d exp(-|z1-z2|^2 / (c Delta^2))`` per pair.

    The reported ``c`` is the largest per-pair constant; ``stable`` says
    whether every per-pair constant lies within ``stability_tol`` of their
    median.
    """
    consts = []
    for pd in densities:
        delta = delta_metric(alpha, pd.p_s, pd.p_t)
        if delta == 0:
            raise DomainError("coincident space-time points are excluded")
        w = pd.separation()
        consts.append(fit_bound_constant(pd.values, lambda c: gaussian_envelope(c, delta, w, pd.d)))
    stable, spread = _stability(consts, stability_tol)
    return BoundCheck("gaussian", tuple(consts), max(consts), stable, spread, int(densities[0].values.size))


def polynomial_bound_check(densities: Sequence[PairDensity], alpha: float, p: float,
                           stability_tol: float = 0.2) -> BoundCheck:
    """As :func:`gaussian_bound_check` with the polynomial envelope of order ``p``."""
    consts = []
    for pd in densities:
        delta = delta_metric(alpha, pd.p_s, pd.p_t)
        if delta == 0:
            raise DomainError("coincident space-time points are excluded")
        w = pd.separation()
        consts.append(fit_bound_constant(pd.values, lambda c: polynomial_envelope(c, delta, w, pd.d, p)))
    stable, spread = _stability(consts, stability_tol)
    return BoundCheck("polynomial", tuple(consts), max(consts), stable, spread, int(densities[0].values.size))


def polynomial_dominates(c: float, p: float, d: int, delta: float, w: np.ndarray) -> bool:
    """Check the polynomial envelope with the matched constant dominates the Gaussian one at ``w``."""
    cp = matched_polynomial_constant(c, p, d)
    return bool(np.all(polynomial_envelope(cp, delta, w, d, p) >= gaussian_envelope(c, delta, w, d) * (1 - 1e-12)))
