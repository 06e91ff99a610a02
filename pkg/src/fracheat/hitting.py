"""Monte Carlo hitting probabilities and their comparison with capacity and
Hausdorff bounds.

The continuous event ``u(I x J) meets A`` is observed on grid nodes only. A
node counts as a hit when ``dist(u(t, x), A) <= delta``, where the dilation
``delta`` compensates for excursions between nodes. By default ``delta`` is
the empirical root-mean-square increment between neighbouring nodes in the
window, and the estimate is always reported for ``delta / 2`` and
``2 delta`` as well.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .errors import DomainError, NumericError, SimulationDiverged
from .kernel import ParabolicPoint, covariance_exact, squared_mass_constant, validate_alpha
from .potential import CompactSetSpec, capacity, dimension_thresholds, distance_to_set, hausdorff_premeasure
from .spde import FieldSample, ModelSpec, Recording, SolverGrid, iter_batch_solve
from .spde.noise import STREAM_CELL_SAMPLER, standard_normals

MODES = ("space-time", "fixed-time", "fixed-space")


class HittingAborted(NumericError):
    """A trajectory failed; carries the counts gathered before the failure."""

    def __init__(self, cause: Exception, n_done: int, hits: int):
        super().__init__(f"aborted after {n_done} trajectories ({hits} hits): {cause}")
        self.n_done = n_done
        self.hits = hits


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise DomainError("n must be positive")
    ci = sps.binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class Window:
    """Observation window ``I x J``; degenerate ``I`` or ``J`` for the fixed modes."""

    I: tuple
    J: tuple
    mode: str = "space-time"

    def __post_init__(self):
        I = (float(self.I[0]), float(self.I[1]))
        J = (float(self.J[0]), float(self.J[1]))
        object.__setattr__(self, "I", I)
        object.__setattr__(self, "J", J)
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}")
        if I[0] > I[1] or J[0] > J[1]:
            raise DomainError("window intervals must be ordered")
        if self.mode == "fixed-time" and I[0] != I[1]:
            raise DomainError("fixed-time mode needs a single time")
        if self.mode == "fixed-space" and J[0] != J[1]:
            raise DomainError("fixed-space mode needs a single position")

    @classmethod
    def fixed_time(cls, t: float, J) -> "Window":
        return cls((t, t), J, "fixed-time")

    @classmethod
    def fixed_space(cls, I, x: float) -> "Window":
        return cls(I, (x, x), "fixed-space")

    def contains(self, other: "Window") -> bool:
        return self.I[0] <= other.I[0] and other.I[1] <= self.I[1] and self.J[0] <= other.J[0] and other.J[1] <= self.J[1]


def _select(coords: np.ndarray, lo: float, hi: float, step: float) -> np.ndarray:
    tol = 1e-9 * step
    if lo == hi:
        j = int(np.argmin(np.abs(coords - lo)))
        if abs(coords[j] - lo) > 0.5 * step + tol:
            return np.empty(0, dtype=np.int64)
        return np.array([j])
    return np.flatnonzero((coords >= lo - tol) & (coords <= hi + tol))


def window_indices(grid: SolverGrid, window: Window) -> tuple[np.ndarray, np.ndarray]:
    """Grid node indices inside the window (single nearest node on degenerate sides)."""
    ti = _select(grid.t, *window.I, grid.dt)
    xi = _select(grid.x, *window.J, grid.dx)
    if ti.size == 0 or xi.size == 0:
        raise DomainError("window is not resolved by the grid")
    return ti, xi


def _sample_window(sample: FieldSample, window: Window) -> np.ndarray:
    ti = _select(sample.t, *window.I, sample.grid.dt)
    xi = _select(sample.x, *window.J, sample.grid.dx)
    if ti.size == 0 or xi.size == 0:
        raise DomainError("window lies outside the recorded nodes")
    return sample.values[np.ix_(ti, xi)]


def min_distance(sample: FieldSample, window: Window, target: CompactSetSpec) -> float:
    """``min dist(u(t, x), A)`` over the grid nodes of the window."""
    vals = _sample_window(sample, window)
    if vals.shape[-1] != target.d:
        raise DomainError("target dimension differs from the field dimension")
    return float(distance_to_set(target, vals.reshape(-1, vals.shape[-1])).min())


def hit_test(sample: FieldSample, window: Window, target: CompactSetSpec, delta: float) -> bool:
    """True iff some node of the window satisfies ``dist(u(t, x), A) <= delta``."""
    if delta < 0:
        raise DomainError("delta must be non-negative")
    return min_distance(sample, window, target) <= delta


@dataclass(frozen=True)
class _Summary:
    """Per-trajectory reduction: minimum distance and neighbour increment sums."""

    min_dist: float
    sq_t: float
    n_t: int
    sq_x: float
    n_x: int


class _Summarize:
    """Picklable reduction applied inside solver workers."""

    def __init__(self, window: Window, target: CompactSetSpec):
        self.window = window
        self.target = target

    def __call__(self, sample: FieldSample) -> _Summary:
        vals = _sample_window(sample, self.window)
        dist = float(distance_to_set(self.target, vals.reshape(-1, vals.shape[-1])).min())
        dt_inc = np.diff(vals, axis=0)
        dx_inc = np.diff(vals, axis=1)
        return _Summary(dist, float(np.sum(dt_inc**2)), int(dt_inc.size // vals.shape[-1]),
                        float(np.sum(dx_inc**2)), int(dx_inc.size // vals.shape[-1]))


@dataclass(frozen=True)
class HittingExperiment:
    """Configuration of a hitting-probability Monte Carlo run.

    ``delta=None`` selects the empirical grid modulus. ``capacity_mesh``
    and ``hausdorff_eps`` control the attached potential-theoretic values.
    """

    model: ModelSpec
    grid: SolverGrid
    window: Window
    target: CompactSetSpec
    n_samples: int = 2000
    seed0: int = 0
    delta: float | None = None
    capacity_mesh: float | None = None
    hausdorff_eps: float = 0.05
    modulus_samples: int = 64

    def __post_init__(self):
        g, w = self.grid, self.window
        if not (0.0 < w.I[0] and w.I[1] <= g.T + 1e-12):
            raise DomainError("time window must lie in (0, T]")
        margin = g.T ** (1.0 / g.alpha)
        if w.J[0] < -g.L + margin or w.J[1] > g.L - margin:
            raise DomainError(f"space window must stay {margin:.3g} away from the torus boundary")
        if self.target.d != self.model.d:
            raise DomainError("target dimension differs from the model dimension")
        if self.n_samples < 100:
            raise DomainError("n_samples must be at least 100")
        if self.delta is not None and self.delta < 0:
            raise DomainError("delta must be non-negative")
        window_indices(g, w)


@dataclass(frozen=True)
class HittingResult:
    """Hit frequency with Wilson interval and attached potential-theoretic values."""

    estimate: float
    wilson_ci: tuple
    n: int
    hit_count: int
    delta: float
    modulus: float
    delta_below_modulus: bool
    sensitivity: dict
    mode: str
    threshold: float
    capacity_value: float
    hausdorff_value: float
    seed0: int
    min_distances: np.ndarray = field(repr=False, default=None, compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("min_distances")
        d["wilson_ci"] = list(self.wilson_ci)
        return d


def _default_capacity_mesh(target: CompactSetSpec) -> float:
    edges = [hi - lo for b in target.boxes for lo, hi in zip(b.lo, b.hi) if hi > lo]
    return min(edges) / 16.0 if edges else 0.1


def hitting_probability_mc(exp: HittingExperiment, workers: int = 1) -> HittingResult:
    """Estimate ``P{u(window) meets A}`` from seeds ``seed0 .. seed0 + n - 1``."""
    g = exp.grid
    ti, xi = window_indices(g, exp.window)
    rec = Recording(ti, xi)
    seeds = range(exp.seed0, exp.seed0 + exp.n_samples)
    summaries = []
    try:
        for s in iter_batch_solve(exp.model, g, seeds, rec, _Summarize(exp.window, exp.target), workers=workers):
            summaries.append(s)
    except SimulationDiverged as err:
        raise HittingAborted(err, len(summaries), sum(s.min_dist <= (exp.delta or 0.0) for s in summaries)) from err
    head = summaries[: exp.modulus_samples]
    rms_t = math.sqrt(sum(s.sq_t for s in head) / max(1, sum(s.n_t for s in head)))
    rms_x = math.sqrt(sum(s.sq_x for s in head) / max(1, sum(s.n_x for s in head)))
    modulus = rms_t + rms_x
    delta = modulus if exp.delta is None else float(exp.delta)
    dists = np.array([s.min_dist for s in summaries])
    n = dists.size

    def rate(dl):
        k = int(np.count_nonzero(dists <= dl))
        return k, wilson_interval(k, n)

    k, ci = rate(delta)
    sens = {}
    for name, dl in (("half", delta / 2.0), ("double", 2.0 * delta), ("zero", 0.0)):
        kk, cc = rate(dl)
        sens[name] = {"delta": dl, "estimate": kk / n, "wilson_ci": list(cc)}
    th = dimension_thresholds(g.alpha, exp.model.d)
    beta = {"space-time": th.space_time, "fixed-time": th.fixed_time, "fixed-space": th.fixed_space}[exp.window.mode]
    mesh = exp.capacity_mesh or _default_capacity_mesh(exp.target)
    cap = capacity(exp.target, beta, mesh).value
    haus = hausdorff_premeasure(exp.target, beta, exp.hausdorff_eps)
    return HittingResult(k / n, ci, n, k, delta, modulus, delta < modulus, sens, exp.window.mode, beta, cap, haus,
                         exp.seed0, dists)


@dataclass(frozen=True)
class BoundReport:
    """Implied constants of the two-sided hitting bounds."""

    c1_hat: tuple
    c2_hat: tuple
    upper_vacuous: tuple
    ordering_ok: bool
    c1_spread: float
    stable: bool

    def to_dict(self) -> dict:
        return asdict(self)


def bound_comparison(results: HittingResult | Sequence[HittingResult], max_spread: float = 3.0) -> BoundReport:
    """``c1 = p / Cap`` and ``c2 = p / H`` for one result or a target family.

    Degenerate denominators give ``None``. ``ordering_ok`` requires
    ``c1 <= 1`` wherever ``Cap == 1`` and finite constants elsewhere;
    ``stable`` requires the ratio of the largest to the smallest positive
    ``c1`` to stay below ``max_spread``.
    """
    if isinstance(results, HittingResult):
        results = [results]
    c1, c2, vac = [], [], []
    ok = True
    for r in results:
        c1.append(r.estimate / r.capacity_value if r.capacity_value > 0 else None)
        if math.isinf(r.hausdorff_value):
            c2.append(None)
            vac.append(True)
        else:
            vac.append(False)
            c2.append(r.estimate / r.hausdorff_value if r.hausdorff_value > 0 else None)
            if r.hausdorff_value == 0 and r.estimate > 0:
                ok = False
        if r.capacity_value == 1.0 and not (0.0 <= r.estimate <= 1.0):
            ok = False
    pos = [v for v in c1 if v is not None and v > 0]
    spread = max(pos) / min(pos) if pos else math.nan
    stable = bool(pos) and spread < max_spread
    return BoundReport(tuple(c1), tuple(c2), tuple(vac), ok, spread, stable)


# ---------------------------------------------------------------------------
# small-ball scaling on one anisotropic cell


@dataclass(frozen=True)
class SmallBallFit:
    """Hit frequencies of ``B(z, 2^-n)`` from one dyadic cell per level."""

    levels: tuple
    frequencies: tuple
    intervals: tuple
    fitted_levels: tuple
    exponent: float
    stderr: float
    d: int
    eta_report: float
    n_samples: int

    @property
    def passed(self) -> bool:
        return math.isfinite(self.exponent) and self.exponent >= self.d - self.eta_report

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def cell_for_level(alpha: float, n: int, t_center: float, x_center: float):
    """The level-``n`` dyadic rectangle containing ``(t_center, x_center)``."""
    tau = 2.0 ** (-2.0 * n * alpha / (alpha - 1.0))
    xi = 2.0 ** (-2.0 * n / (alpha - 1.0))
    k = math.floor(t_center / tau)
    m = math.floor(x_center / xi)
    return (k * tau, (k + 1) * tau), (m * xi, (m + 1) * xi)


def _gaussian_cell_samples(alpha: float, d: int, I, J, nodes: int, n_samples: int, seed: int) -> np.ndarray:
    """Exact joint samples of the additive field on an ``nodes x nodes`` lattice in ``I x J``.

    Returns ``(n_samples, nodes * nodes, d)``.
    """
    ts = np.linspace(I[0], I[1], nodes)
    xs = np.linspace(J[0], J[1], nodes)
    pts = [(t, x) for t in ts for x in xs]
    cache: dict = {}
    m = len(pts)
    C = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            (t1, x1), (t2, x2) = pts[i], pts[j]
            key = (min(t1, t2), max(t1, t2), round(abs(x1 - x2), 15))
            if key not in cache:
                cache[key] = covariance_exact(alpha, ParabolicPoint(t1, 0.0), ParabolicPoint(t2, abs(x1 - x2)))
            C[i, j] = C[j, i] = cache[key]
    w, V = np.linalg.eigh(C)
    root = V * np.sqrt(np.clip(w, 0.0, None))
    z = standard_normals(seed, 0, n_samples * m * d, stream=STREAM_CELL_SAMPLER).reshape(n_samples, d, m)
    return np.einsum("ij,sdj->sid", root, z)


def small_ball_scaling(alpha: float, d: int, z: Sequence[float], n_ladder: Sequence[int], n_samples: int = 2000,
                       seed0: int = 0, preset: str = "additive", grid: SolverGrid | None = None,
                       t_center: float = 0.5, x_center: float = 0.0, nodes: int = 9, eta_report: float = 0.2,
                       max_frequency: float = 0.95, workers: int = 1) -> SmallBallFit:
    """Fit the decay exponent of ``P{u(R_n) meets B(z, 2^-n)}`` over dyadic levels ``n``.

    For the additive preset the field on each cell is sampled exactly from
    its Gaussian law on a ``nodes x nodes`` lattice; for ``bounded-smooth``
    the time-stepped solver on ``grid`` is used and the cell must contain at
    least two grid nodes in each direction. Levels with frequency above
    ``max_frequency`` (the ball swallows the range) or with no hits are
    excluded from the regression of ``log2 frequency`` on ``n``.
    """
    alpha = validate_alpha(alpha)
    levels = sorted(int(n) for n in n_ladder)
    if len(levels) < 3:
        raise DomainError("need at least three dyadic levels")
    zc = np.asarray(z, dtype=float).reshape(d)
    freqs, cis = [], []
    for n in levels:
        I, J = cell_for_level(alpha, n, t_center, x_center)
        if I[0] <= 0:
            raise DomainError("cell must lie at positive times")
        r = 2.0**-n
        if preset == "additive":
            vals = _gaussian_cell_samples(alpha, d, I, J, nodes, n_samples, seed0 + n)
            dist = np.linalg.norm(vals - zc, axis=-1).min(axis=1)
        elif preset == "bounded-smooth":
            if grid is None:
                raise DomainError("bounded-smooth scaling needs a solver grid")
            if I[1] - I[0] < grid.dt * (1 - 1e-9) or J[1] - J[0] < grid.dx * (1 - 1e-9) or I[1] > grid.T:
                raise DomainError(f"grid does not resolve level {n}")
            win = Window(I, J)
            ti, xi = window_indices(grid, win)
            if ti.size < 2 or xi.size < 2:
                raise DomainError(f"grid does not resolve level {n}")
            spec = ModelSpec(alpha, d, preset, "exact")
            target = CompactSetSpec(d, points=(tuple(zc),))
            summ = _Summarize(win, target)
            seeds = range(seed0 + n * n_samples, seed0 + (n + 1) * n_samples)
            dist = np.array([s.min_dist for s in iter_batch_solve(spec, grid, seeds, Recording(ti, xi), summ,
                                                                  workers=workers)])
        else:
            raise DomainError(f"small-ball scaling supports additive and bounded-smooth presets, not {preset!r}")
        k = int(np.count_nonzero(dist <= r))
        freqs.append(k / n_samples)
        cis.append(wilson_interval(k, n_samples))
    use = [i for i, f in enumerate(freqs) if 0.0 < f <= max_frequency]
    if len(use) >= 2:
        reg = sps.linregress([levels[i] for i in use], [math.log2(freqs[i]) for i in use])
        expo, err = float(-reg.slope), float(reg.stderr) if len(use) > 2 else math.nan
    else:
        expo, err = math.nan, math.nan
    return SmallBallFit(tuple(levels), tuple(freqs), tuple(cis), tuple(levels[i] for i in use), expo, err, int(d),
                        float(eta_report), int(n_samples))


def gaussian_one_point_variance(alpha: float, t: float) -> float:
    """``E v(t, x)^2 = c_alpha t^((alpha-1)/alpha)`` for the additive field."""
    return squared_mass_constant(alpha) * t ** ((alpha - 1.0) / alpha)
