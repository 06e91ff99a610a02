"""Deterministic standalone SVG figures with the plotted data embedded.

Every figure stores its data table as CSV in the SVG description metadata,
and carries no timestamp, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {"svg.hashsalt": "fracheat", "svg.fonttype": "none", "path.simplify": False}


def _table(columns: Sequence[str], rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row) + "\n")
    return buf.getvalue()


def _save(fig, path, title: str, table: str) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None, "Title": title, "Description": table})
    plt.close(fig)
    return path


def holder_plot(fits, path) -> Path:
    """Log-log increment moments with fitted and expected slopes."""
    rows = []
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 4))
        for f in fits:
            h, m = np.asarray(f.lags), np.asarray(f.moments)
            ax.loglog(h, m, "o", label=f"{f.direction}: slope {f.slope:.3f} (expected {f.expected:.3f})")
            ref = m[0] * (h / h[0]) ** f.expected
            ax.loglog(h, ref, "--", color="gray")
            rows += [(f.direction, hv, mv) for hv, mv in zip(h, m)]
        ax.set_xlabel("lag")
        ax.set_ylabel("moment")
        ax.legend(fontsize=7)
        return _save(fig, path, "Holder fits", _table(("direction", "lag", "moment"), rows))


def density_plot(z, kde, exact, path) -> Path:
    """KDE against the exact Gaussian density."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot(z, exact, "-", label="exact")
        ax.plot(z, kde, ".", label="KDE")
        ax.set_xlabel("z")
        ax.set_ylabel("density")
        ax.legend()
        return _save(fig, path, "density", _table(("z", "kde", "exact"), zip(z, kde, exact)))


def ladder_plot(levels, freqs, intervals, exponent, path) -> Path:
    """Small-ball hit frequencies on a log2 scale with Wilson intervals."""
    levels = np.asarray(levels, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    lo = np.array([c[0] for c in intervals])
    hi = np.array([c[1] for c in intervals])
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.errorbar(levels, freqs, yerr=[freqs - lo, hi - freqs], fmt="o", capsize=3)
        ax.set_yscale("log", base=2)
        ax.set_xlabel("level n")
        ax.set_ylabel("hit frequency")
        ax.set_title(f"fitted exponent {exponent:.3f}")
        return _save(fig, path, "small-ball ladder", _table(("level", "frequency", "lo", "hi"),
                                                              zip(levels, freqs, lo, hi)))
