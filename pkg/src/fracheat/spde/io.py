"""CSV and binary snapshot export of field samples.

Binary layout (little-endian)::

    magic     4 bytes  b"FRHT"
    version   uint16   1
    d         uint16
    alpha     float64
    T         float64
    L         float64
    tail_tol  float64
    nt        uint64
    nx        uint64
    seed      uint64
    n_t       uint64   number of recorded time steps
    n_x       uint64   number of recorded space nodes
    t_index   n_t * uint64
    x_index   n_x * uint64
    values    n_t * n_x * d * float64, C order
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Iterable

import numpy as np

from ..errors import DomainError
from .grid import SolverGrid
from .solver import FieldSample

MAGIC = b"FRHT"
VERSION = 1
_HEADER = struct.Struct("<4sHHddddQQQQQ")
CSV_COLUMNS = ("seed", "t", "x", "component", "value")


def fmt(v: float) -> str:
    """Shortest round-tripping text for a float."""
    return repr(float(v))


def write_csv(samples: Iterable[FieldSample], path) -> Path:
    """Write samples in long format with columns ``seed, t, x, component, value``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for s in samples:
            t, x = s.t, s.x
            for a in range(s.values.shape[0]):
                for b in range(s.values.shape[1]):
                    for c in range(s.values.shape[2]):
                        w.writerow((s.seed, fmt(t[a]), fmt(x[b]), c, fmt(s.values[a, b, c])))
    return path


def write_snapshot(sample: FieldSample, path) -> Path:
    path = Path(path)
    g = sample.grid
    nt_r, nx_r, d = sample.values.shape
    head = _HEADER.pack(MAGIC, VERSION, d, g.alpha, g.T, g.L, g.tail_tol, g.nt, g.nx, sample.seed, nt_r, nx_r)
    with path.open("wb") as fh:
        fh.write(head)
        fh.write(np.asarray(sample.t_index, dtype="<u8").tobytes())
        fh.write(np.asarray(sample.x_index, dtype="<u8").tobytes())
        fh.write(np.ascontiguousarray(sample.values, dtype="<f8").tobytes())
    return path


def read_snapshot(path, preset: str = "unknown") -> FieldSample:
    """Read a snapshot written by :func:`write_snapshot`."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise DomainError(f"{path}: truncated snapshot header")
    magic, version, d, alpha, T, L, tail_tol, nt, nx, seed, nt_r, nx_r = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DomainError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise DomainError(f"{path}: unsupported snapshot version {version}")
    off = _HEADER.size
    ti = np.frombuffer(data, "<u8", nt_r, off).astype(np.int64)
    off += 8 * nt_r
    xi = np.frombuffer(data, "<u8", nx_r, off).astype(np.int64)
    off += 8 * nx_r
    n = nt_r * nx_r * d
    if len(data) != off + 8 * n:
        raise DomainError(f"{path}: payload size mismatch")
    vals = np.frombuffer(data, "<f8", n, off).reshape(nt_r, nx_r, d).copy()
    vals.setflags(write=False)
    grid = SolverGrid(alpha, T, L, int(nt), int(nx), tail_tol=tail_tol)
    return FieldSample(grid, vals, preset, int(seed), ti, xi)
