"""Space-time discretisation of the periodic truncation torus."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from ..kernel import kernel_mass, validate_alpha


@dataclass(frozen=True)
class SolverGrid:
    """Uniform grid on ``[0, T] x [-L, L)`` with periodic space.

    Parameters
    ----------
    alpha : float
        Stability index of the fractional Laplacian.
    T : float
        Time horizon.
    L : float
        Half-width of the torus.
    nt : int
        Number of time steps (at least 4).
    nx : int
        Number of space nodes, a power of two (at least 4).
    tail_tol : float
        Largest admissible mass of ``G_alpha(T, .)`` outside ``[-L, L]``.
    """

    alpha: float
    T: float
    L: float
    nt: int
    nx: int
    tail_tol: float = 0.05
    tail_mass: float = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "alpha", validate_alpha(self.alpha))
        if not (self.T > 0 and self.L > 0 and math.isfinite(self.T) and math.isfinite(self.L)):
            raise DomainError("T and L must be positive and finite")
        if int(self.nt) != self.nt or int(self.nx) != self.nx:
            raise DomainError("nt and nx must be integers")
        object.__setattr__(self, "nt", int(self.nt))
        object.__setattr__(self, "nx", int(self.nx))
        if self.nt < 4 or self.nx < 4:
            raise DomainError("degenerate grid: nt and nx must be at least 4")
        if self.nx & (self.nx - 1):
            raise DomainError(f"nx must be a power of two, got {self.nx}")
        mass = kernel_mass(self.alpha, self.T, self.L)
        if mass > self.tail_tol:
            raise DomainError(
                f"torus too small: kernel mass {mass:.3g} outside [-L, L] at time T exceeds {self.tail_tol}"
            )
        object.__setattr__(self, "tail_mass", mass)

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.nx

    @property
    def t(self) -> np.ndarray:
        """Time nodes ``k dt``, ``k = 0..nt``."""
        return self.dt * np.arange(self.nt + 1)

    @property
    def x(self) -> np.ndarray:
        """Space nodes ``-L + j dx``, ``j = 0..nx-1``."""
        return -self.L + self.dx * np.arange(self.nx)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Non-negative wavenumbers ``pi k / L`` matching ``numpy.fft.rfft``."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.nx, self.dx)

    @property
    def symbol(self) -> np.ndarray:
        """``|lambda_k|^alpha`` for the rfft modes."""
        return np.abs(self.wavenumbers) ** self.alpha

    def x_index(self, x: float) -> int:
        """Index of the node nearest to ``x`` (no wrap-around)."""
        j = int(round((x + self.L) / self.dx))
        if not 0 <= j < self.nx:
            raise DomainError(f"x={x} lies outside the torus [-{self.L}, {self.L})")
        return j

    def t_index(self, t: float) -> int:
        k = int(round(t / self.dt))
        if not 0 <= k <= self.nt:
            raise DomainError(f"t={t} lies outside [0, {self.T}]")
        return k

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "T": self.T, "L": self.L, "nt": self.nt, "nx": self.nx, "tail_tol": self.tail_tol}
