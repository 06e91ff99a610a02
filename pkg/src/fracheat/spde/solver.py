"""Spectral exponential integrators for the fractional stochastic heat system.

One step maps ``u_n`` to ``u_{n+1}`` on the periodic torus. Two couplings of
the noise to the semigroup are available:

``walsh``
    ``u_{n+1} = F^-1[e^{-dt mu} F(u_n + b(u_n) dt + sigma(u_n) W_n / dx)]``.
    The nonlinearity and the cell noise are applied in physical space, then
    every Fourier mode is damped by the exact semigroup factor.
``exact``
    ``F u_{n+1} = e^{-dt mu} F u_n + phi(mu) F b(u_n) + psi(mu) F(sigma(u_n) W_n / dx)``
    with ``phi = (1 - e^{-dt mu}) / mu`` and
    ``psi = sqrt((1 - e^{-2 dt mu}) / (2 mu dt))``. With additive noise each
    mode is an exact Ornstein-Uhlenbeck update, so the scheme has no
    time-stepping bias; for state-dependent coefficients they are frozen over
    one step.

Both couplings consume the same physical noise cells, so for the same seed
the two solutions are coupled path by path.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from ..errors import DomainError, SimulationDiverged
from ..kernel import validate_alpha
from .coefficients import CoefficientSet, preset
from .grid import SolverGrid
from .noise import standard_normals

COUPLINGS = ("walsh", "exact")


@dataclass(frozen=True)
class ModelSpec:
    """SPDE instance: stability index, dimension, coefficients and coupling."""

    alpha: float
    d: int
    preset: str = "additive"
    coupling: str = "walsh"

    def __post_init__(self):
        object.__setattr__(self, "alpha", validate_alpha(self.alpha))
        if int(self.d) != self.d or self.d < 1:
            raise DomainError("d must be a positive integer")
        object.__setattr__(self, "d", int(self.d))
        if self.coupling not in COUPLINGS:
            raise DomainError(f"unknown coupling {self.coupling!r}; choose from {COUPLINGS}")
        preset(self.preset, self.d)  # validates the name

    @property
    def coefficients(self) -> CoefficientSet:
        return preset(self.preset, self.d)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "d": self.d, "preset": self.preset, "coupling": self.coupling}


@dataclass(frozen=True)
class FieldSample:
    """A realised trajectory restricted to recorded time and space nodes.

    ``values`` has shape ``(len(t_index), len(x_index), d)`` and is read-only.
    """

    grid: SolverGrid
    values: np.ndarray
    preset: str
    seed: int
    t_index: np.ndarray
    x_index: np.ndarray
    coupling: str = "walsh"

    @property
    def t(self) -> np.ndarray:
        return self.grid.dt * self.t_index

    @property
    def x(self) -> np.ndarray:
        return -self.grid.L + self.grid.dx * self.x_index

    @property
    def d(self) -> int:
        return self.values.shape[-1]


@dataclass(frozen=True)
class Recording:
    """Which time steps and space nodes a solve keeps."""

    t_index: np.ndarray = field(default=None)
    x_index: np.ndarray = field(default=None)

    def resolve(self, grid: SolverGrid) -> tuple[np.ndarray, np.ndarray]:
        ti = np.arange(grid.nt + 1) if self.t_index is None else np.asarray(self.t_index, dtype=np.int64)
        xi = np.arange(grid.nx) if self.x_index is None else np.asarray(self.x_index, dtype=np.int64)
        if ti.ndim != 1 or xi.ndim != 1 or ti.size == 0 or xi.size == 0:
            raise DomainError("recording indices must be non-empty 1-D arrays")
        if ti.min() < 0 or ti.max() > grid.nt or xi.min() < 0 or xi.max() >= grid.nx:
            raise DomainError("recording indices outside the grid")
        if np.any(np.diff(ti) <= 0):
            raise DomainError("time recording indices must be strictly increasing")
        return ti, xi


def final_time(grid: SolverGrid, x_index=None) -> Recording:
    """Record only the last time step."""
    return Recording(np.array([grid.nt]), x_index)


def _check_grid(spec: ModelSpec, grid: SolverGrid):
    if abs(spec.alpha - grid.alpha) > 0:
        raise DomainError(f"model alpha {spec.alpha} differs from grid alpha {grid.alpha}")


class _Stepper:
    """Spectral factors shared by every trajectory of a batch."""

    def __init__(self, coeffs: CoefficientSet, grid: SolverGrid, coupling: str):
        self.coeffs = coeffs
        self.grid = grid
        self.coupling = coupling
        dt = grid.dt
        mu = grid.symbol
        self.decay = np.exp(-dt * mu)
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(mu > 0, -np.expm1(-dt * mu) / mu, dt)
            psi = np.where(mu > 0, np.sqrt(-np.expm1(-2.0 * dt * mu) / (2.0 * mu * dt)), 1.0)
        self.phi = phi
        self.psi = psi
        self.noise_scale = np.sqrt(dt / grid.dx)  # W / dx for a standard normal

    def step(self, u: np.ndarray, z: np.ndarray | None) -> np.ndarray:
        """Advance ``u`` of shape ``(B, d, nx)``; ``z`` holds standard normals of the same shape."""
        c = self.coeffs
        dt = self.grid.dt
        nx = self.grid.nx
        noise = None
        if c.sigma_kind != "zero":
            if c.sigma_kind == "identity":
                noise = self.noise_scale * z
            else:
                uc = np.moveaxis(u, 1, 0)
                s = c.sigma_matrix(uc)
                noise = np.moveaxis(np.einsum("ij...,j...->i...", s, self.noise_scale * np.moveaxis(z, 1, 0)), 0, 1)
        drift = None
        if c.drift_kind != "zero":
            drift = np.moveaxis(c.drift_vector(np.moveaxis(u, 1, 0)), 0, 1)
        if self.coupling == "walsh":
            v = u
            if drift is not None:
                v = v + dt * drift
            if noise is not None:
                v = v + noise
            return np.fft.irfft(self.decay * np.fft.rfft(v, axis=-1), n=nx, axis=-1)
        spec = self.decay * np.fft.rfft(u, axis=-1)
        if drift is not None:
            spec = spec + self.phi * np.fft.rfft(drift, axis=-1)
        if noise is not None:
            spec = spec + self.psi * np.fft.rfft(noise, axis=-1)
        return np.fft.irfft(spec, n=nx, axis=-1)


class _NoiseBlocks:
    """Standard normals for a batch, generated a block of time rows at a time."""

    def __init__(self, seeds: Sequence[int], grid: SolverGrid, d: int, budget: int = 2**23):
        self.seeds = list(seeds)
        self.nx = grid.nx
        self.nt = grid.nt
        self.d = d
        self.rows = max(1, budget // (len(self.seeds) * grid.nx * d))
        self.start = -1
        self.block = None

    def row(self, k: int) -> np.ndarray:
        """Row ``k`` as ``(B, d, nx)``."""
        if self.block is None or not self.start <= k < self.start + self.block.shape[1]:
            n = self.nx * self.d
            m = min(self.rows, self.nt - k)
            self.start = k
            self.block = np.stack([
                standard_normals(s, k * n, m * n).reshape(m, self.nx, self.d) for s in self.seeds
            ])
        return np.transpose(self.block[:, k - self.start], (0, 2, 1))


def _evolve(coeffs: CoefficientSet, grid: SolverGrid, seeds: Sequence[int], coupling: str,
            ti: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Run a batch of trajectories, returning ``(B, len(ti), len(xi), d)``."""
    d = coeffs.d
    B = len(seeds)
    stepper = _Stepper(coeffs, grid, coupling)
    out = np.zeros((B, ti.size, xi.size, d))
    u = np.zeros((B, d, grid.nx))
    slot = 0
    if ti[0] == 0:
        slot = 1
    noise = _NoiseBlocks(seeds, grid, d) if coeffs.sigma_kind != "zero" else None
    last = int(ti[-1])
    for k in range(last):
        z = noise.row(k) if noise is not None else None
        u = stepper.step(u, z)
        if not np.all(np.isfinite(u)):
            bad = int(np.argmax(~np.all(np.isfinite(u.reshape(B, -1)), axis=1)))
            raise SimulationDiverged(step=k + 1, seed=int(seeds[bad]))
        if slot < ti.size and ti[slot] == k + 1:
            out[:, slot] = np.transpose(u[:, :, xi], (0, 2, 1))
            slot += 1
    return out


def _to_samples(vals, grid, name, seeds, ti, xi, coupling):
    samples = []
    for b, s in enumerate(seeds):
        v = np.ascontiguousarray(vals[b])
        v.setflags(write=False)
        samples.append(FieldSample(grid, v, name, int(s), ti, xi, coupling))
    return samples


def solve(spec: ModelSpec, grid: SolverGrid, seed: int, record: Recording | None = None) -> FieldSample:
    """Simulate one trajectory of the mild solution with zero initial data.

    Parameters
    ----------
    spec : ModelSpec
        Stability index, dimension, coefficient preset and noise coupling.
    grid : SolverGrid
        Discretisation; ``grid.alpha`` must equal ``spec.alpha``.
    seed : int
        64-bit seed of the counter-based noise stream.
    record : Recording, optional
        Nodes to keep; the whole trajectory by default.

    Raises
    ------
    SimulationDiverged
        If the state becomes non-finite.
    """
    _check_grid(spec, grid)
    ti, xi = (record or Recording()).resolve(grid)
    vals = _evolve(spec.coefficients, grid, [seed], spec.coupling, ti, xi)
    return _to_samples(vals, grid, spec.preset, [seed], ti, xi, spec.coupling)[0]


def solve_additive_exact(alpha: float, d: int, grid: SolverGrid, seed: int,
                         record: Recording | None = None) -> FieldSample:
    """Additive Gaussian field via exact per-mode Ornstein-Uhlenbeck updates.

    Each Fourier mode gains variance ``(1 - e^{-2 dt mu}) / (2 mu)`` per step,
    so the only errors left are spatial truncation and discretisation.
    """
    return solve(ModelSpec(alpha, d, "additive", "exact"), grid, seed, record)


def _solve_chunk(args):
    spec, grid, seeds, ti, xi, summarize = args
    vals = _evolve(spec.coefficients, grid, seeds, spec.coupling, ti, xi)
    samples = _to_samples(vals, grid, spec.preset, seeds, ti, xi, spec.coupling)
    return [s if summarize is None else summarize(s) for s in samples]


def default_workers() -> int:
    env = os.environ.get("FRACHEAT_WORKERS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise DomainError(f"FRACHEAT_WORKERS must be an integer, got {env!r}") from exc
        if n < 1:
            raise DomainError("FRACHEAT_WORKERS must be positive")
        return n
    return os.cpu_count() or 1


def iter_batch_solve(spec: ModelSpec, grid: SolverGrid, seeds: Iterable[int], record: Recording | None = None,
                     summarize: Callable[[FieldSample], object] | None = None, workers: int = 1,
                     chunk: int = 16) -> Iterator:
    """Stream per-seed results in seed order.

    Seeds are processed in fixed chunks that are independent of ``workers``,
    so serial and parallel runs give bit-identical output. Only one chunk of
    trajectories per worker is alive at a time when ``summarize`` reduces
    them. ``summarize`` must be picklable when ``workers > 1``.
    """
    _check_grid(spec, grid)
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise DomainError("seed list must be non-empty")
    ti, xi = (record or Recording()).resolve(grid)
    chunks = [seeds[i:i + chunk] for i in range(0, len(seeds), chunk)]
    jobs = ((spec, grid, c, ti, xi, summarize) for c in chunks)
    if workers <= 1 or len(chunks) == 1:
        for job in jobs:
            yield from _solve_chunk(job)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for res in pool.map(_solve_chunk, jobs):
            yield from res


def batch_solve(spec: ModelSpec, grid: SolverGrid, seeds: Iterable[int], record: Recording | None = None,
                summarize: Callable[[FieldSample], object] | None = None, workers: int = 1,
                chunk: int = 16) -> list:
    """List form of :func:`iter_batch_solve`."""
    return list(iter_batch_solve(spec, grid, seeds, record, summarize, workers, chunk))


def stack_values(samples: Sequence[FieldSample]) -> np.ndarray:
    """Stack sample values into ``(n, nt_rec, nx_rec, d)``."""
    return np.stack([s.values for s in samples])


def mode_variance(grid: SolverGrid, coupling: str = "walsh", steps: int | None = None) -> float:
    """Exact variance of one component of the additive discrete field after ``steps`` steps.

    Sums the per-mode variances of the scheme,
    ``(1 / 2L) sum_k q_k (1 - r_k^{2n}) / (1 - r_k^2)`` with ``r_k = e^{-dt mu_k}``
    and ``q_k = dt r_k^2`` (walsh) or ``q_k = (1 - r_k^2) / (2 mu_k)`` (exact).
    Comparing grids through this sum isolates truncation and discretisation
    error from Monte Carlo error.
    """
    if coupling not in COUPLINGS:
        raise DomainError(f"unknown coupling {coupling!r}")
    n = grid.nt if steps is None else int(steps)
    lam = 2.0 * np.pi * np.fft.fftfreq(grid.nx, grid.dx)
    mu = np.abs(lam) ** grid.alpha
    r2 = np.exp(-2.0 * grid.dt * mu)
    with np.errstate(divide="ignore", invalid="ignore"):
        geo = np.where(mu > 0, -np.expm1(-2.0 * n * grid.dt * mu) / -np.expm1(-2.0 * grid.dt * mu), float(n))
        if coupling == "walsh":
            per = grid.dt * r2 * geo
        else:
            per = np.where(mu > 0, -np.expm1(-2.0 * n * grid.dt * mu) / (2.0 * mu), n * grid.dt)
    return float(per.sum() / (2.0 * grid.L))
