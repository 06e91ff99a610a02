"""Counter-based Gaussian noise for the space-time white noise increments.

Normal variate number ``w`` of a stream is derived from Philox 64-bit words
``2*(w//2)`` and ``2*(w//2)+1`` via Box-Muller, so any cell can be regenerated
without replaying the rest of the stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from .grid import SolverGrid

_TWO_PI = 2.0 * np.pi
_INV_2_53 = 2.0**-53
_WORDS_PER_BLOCK = 4

STREAM_SOLVER = 0
STREAM_CELL_SAMPLER = 1


def _key(seed: int, stream: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed + (int(stream) << 64)


def standard_normals(seed: int, start: int, count: int, stream: int = STREAM_SOLVER) -> np.ndarray:
    """Normal variates ``start .. start+count-1`` of the stream ``(seed, stream)``."""
    if start < 0 or count < 0:
        raise DomainError("start and count must be non-negative")
    if count == 0:
        return np.empty(0)
    first = start - start % 2
    n_pairs = (start + count - first + 1) // 2
    word0 = first  # two words per pair, one variate per word
    bg = np.random.Philox(key=_key(seed, stream))
    bg.advance(word0 // _WORDS_PER_BLOCK)
    skip = word0 % _WORDS_PER_BLOCK
    raw = bg.random_raw(skip + 2 * n_pairs)[skip:]
    r1 = raw[0::2] >> np.uint64(11)
    r2 = raw[1::2] >> np.uint64(11)
    u1 = (r1.astype(np.float64) + 1.0) * _INV_2_53  # (0, 1]
    u2 = r2.astype(np.float64) * _INV_2_53
    rad = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * n_pairs)
    z[0::2] = rad * np.cos(_TWO_PI * u2)
    z[1::2] = rad * np.sin(_TWO_PI * u2)
    off = start - first
    return z[off: off + count]


def noise_row(grid: SolverGrid, d: int, seed: int, k: int) -> np.ndarray:
    """Standard normals for time row ``k`` as an ``(nx, d)`` array."""
    n = grid.nx * d
    return standard_normals(seed, k * n, n).reshape(grid.nx, d)


@dataclass(frozen=True)
class NoiseRealization:
    """White-noise cell increments with variance ``dt * dx``."""

    seed: int
    increments: np.ndarray  # (nt, nx, d)


def generate_noise(grid: SolverGrid, d: int, seed: int) -> NoiseRealization:
    """All ``nt * nx * d`` increments for ``seed``; cell ``(k, j, c)`` is word ``(k nx + j) d + c``."""
    z = standard_normals(seed, 0, grid.nt * grid.nx * d).reshape(grid.nt, grid.nx, d)
    inc = z * np.sqrt(grid.dt * grid.dx)
    inc.setflags(write=False)
    return NoiseRealization(int(seed), inc)
