"""Riesz kernels, energies, capacities, Hausdorff pre-measures, anisotropic
dyadic grids and the energy-integral lemma.

Sets are discretised into mesh cells represented by their centres. A cell
carries uniform mass, so the diagonal of the energy matrix is the cell
self-energy rather than ``K(0)``; off-diagonal entries use the kernel at the
distance between centres.
"""

from __future__ import annotations

import heapq
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .errors import DomainError, NumericError
from .kernel import validate_alpha

# ---------------------------------------------------------------------------
# kernels


def k_kernel(beta: float, r):
    """Riesz-type kernel ``K_beta(r)``.

    ``r^-beta`` for ``beta > 0`` (infinite at 0), ``log(max(1/r, e))`` for
    ``beta == 0`` and 1 for ``beta < 0``. Accepts scalars or arrays.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or np.any(np.isnan(r_arr)):
        raise DomainError("kernel distance must be non-negative")
    beta = float(beta)
    with np.errstate(divide="ignore"):
        if beta > 0:
            out = np.where(r_arr > 0, r_arr ** (-beta), np.inf)
        elif beta == 0:
            out = np.where(r_arr > 0, np.log(np.maximum(1.0 / r_arr, math.e)), np.inf)
        else:
            out = np.ones_like(r_arr)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# sets and measures


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo, hi = tuple(float(v) for v in self.lo), tuple(float(v) for v in self.hi)
        if len(lo) != len(hi):
            raise DomainError("box corners must have equal length")
        if any(a > b for a, b in zip(lo, hi)) or not all(map(math.isfinite, lo + hi)):
            raise DomainError(f"invalid box {lo} -> {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)


@dataclass(frozen=True)
class CompactSetSpec:
    """Finite union of closed axis-aligned boxes and/or a point cloud.

    Attributes
    ----------
    d : int
        Ambient dimension.
    boxes : tuple of Box
        Boxes may be degenerate (a segment, a point).
    points : tuple of tuple
        Explicit points; each stands for a cube of side ``point_mesh``
        centred on it (a true point when ``point_mesh == 0``).
    point_mesh : float
    M : float, optional
        Declared bound, the set must lie in ``[-M, M]^d``.
    """

    d: int
    boxes: tuple = ()
    points: tuple = ()
    point_mesh: float = 0.0
    M: float | None = None

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise DomainError("dimension must be a positive integer")
        boxes = tuple(b if isinstance(b, Box) else Box(*b) for b in self.boxes)
        pts = tuple(tuple(float(c) for c in p) for p in self.points)
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "points", pts)
        if not boxes and not pts:
            raise DomainError("set must be non-empty")
        if any(len(b.lo) != self.d for b in boxes) or any(len(p) != self.d for p in pts):
            raise DomainError("coordinates must match the dimension")
        if self.point_mesh < 0:
            raise DomainError("point_mesh must be non-negative")
        if self.M is not None:
            ext = max(self.extent(), 0.0)
            if ext > self.M * (1 + 1e-12):
                raise DomainError(f"set is not contained in [-{self.M}, {self.M}]^{self.d}")

    def extent(self) -> float:
        """``max |coordinate|`` over the set."""
        vals = [abs(v) for b in self.boxes for v in b.lo + b.hi]
        vals += [abs(c) + self.point_mesh / 2 for p in self.points for c in p]
        return max(vals)

    @classmethod
    def from_dict(cls, doc: dict) -> "CompactSetSpec":
        allowed = {"d", "boxes", "points", "mesh", "point_mesh", "M"}
        unknown = set(doc) - allowed
        if unknown:
            raise DomainError(f"unknown set keys: {sorted(unknown)}")
        boxes = [Box(tuple(b["lo"]), tuple(b["hi"])) for b in doc.get("boxes", [])]
        pts = doc.get("points", [])
        d = doc.get("d")
        if d is None:
            d = len(boxes[0].lo) if boxes else len(pts[0])
        return cls(int(d), tuple(boxes), tuple(map(tuple, pts)), float(doc.get("point_mesh", doc.get("mesh", 0.0))),
                   doc.get("M"))

    @classmethod
    def from_json(cls, text: str) -> "CompactSetSpec":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        out = {"d": self.d, "boxes": [{"lo": list(b.lo), "hi": list(b.hi)} for b in self.boxes],
               "points": [list(p) for p in self.points], "point_mesh": self.point_mesh}
        if self.M is not None:
            out["M"] = self.M
        return out

    @classmethod
    def ball_box(cls, center: Sequence[float], radius: float) -> "CompactSetSpec":
        """Closed cube ``center +- radius`` (a point when ``radius == 0``)."""
        c = tuple(float(v) for v in center)
        return cls(len(c), (Box(tuple(v - radius for v in c), tuple(v + radius for v in c)),))

    def contains(self, z: np.ndarray, tol: float = 0.0) -> np.ndarray:
        """Whether each row of ``z`` (shape ``(m, d)``) lies within ``tol`` of the set."""
        return distance_to_set(self, z) <= tol


def distance_to_set(A: CompactSetSpec, z: np.ndarray) -> np.ndarray:
    """Euclidean distance from each row of ``z`` to ``A`` (point cells use their cube)."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    best = np.full(z.shape[0], np.inf)
    for b in A.boxes:
        lo, hi = np.asarray(b.lo), np.asarray(b.hi)
        gap = np.maximum(np.maximum(lo - z, z - hi), 0.0)
        best = np.minimum(best, np.sqrt((gap * gap).sum(axis=1)))
    if A.points:
        half = A.point_mesh / 2.0
        for p in A.points:
            gap = np.maximum(np.abs(z - np.asarray(p)) - half, 0.0)
            best = np.minimum(best, np.sqrt((gap * gap).sum(axis=1)))
    return best


@dataclass(frozen=True)
class Discretization:
    """Cell centres and per-cell side lengths."""

    atoms: np.ndarray
    sides: np.ndarray
    mesh: float

    @property
    def n(self) -> int:
        return self.atoms.shape[0]

    @property
    def half_diagonals(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.sides, axis=1)


def discretize(A: CompactSetSpec, mesh: float) -> Discretization:
    """Split every box into cells of side at most ``mesh`` (two or more per edge).

    Raises
    ------
    DomainError
        If a non-degenerate box edge is shorter than ``2 * mesh``.
    """
    if not mesh > 0:
        raise DomainError("mesh must be positive")
    atoms, sides = [], []
    for b in A.boxes:
        axes, side = [], []
        for lo, hi in zip(b.lo, b.hi):
            length = hi - lo
            if length == 0:
                axes.append(np.array([lo]))
                side.append(0.0)
                continue
            if length / mesh < 2.0 - 1e-9:
                raise DomainError(f"mesh {mesh} does not resolve a box edge of length {length}")
            n = int(math.ceil(length / mesh - 1e-9))
            s = length / n
            axes.append(lo + s * (np.arange(n) + 0.5))
            side.append(s)
        grid = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grid], axis=-1)
        atoms.append(pts)
        sides.append(np.broadcast_to(np.asarray(side), pts.shape))
    if A.points:
        pts = np.asarray(A.points, dtype=float)
        atoms.append(pts)
        sides.append(np.full(pts.shape, A.point_mesh))
    atoms = np.concatenate(atoms)
    sides = np.concatenate(sides)
    # drop exact duplicates from overlapping pieces
    _, keep = np.unique(np.round(np.hstack([atoms, sides]), 12), axis=0, return_index=True)
    keep = np.sort(keep)
    return Discretization(atoms[keep], np.ascontiguousarray(sides[keep]), float(mesh))


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability weights on atoms."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if a.shape[0] != w.size:
            raise DomainError("one weight per atom required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise DomainError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, atoms) -> "DiscreteMeasure":
        a = np.atleast_2d(np.asarray(atoms, dtype=float))
        return cls(a, np.full(a.shape[0], 1.0 / a.shape[0]))


# ---------------------------------------------------------------------------
# cell self-energy


def _quad(f, a, b, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-10, limit=200, **kw)[0]


@lru_cache(maxsize=4096)
def _self_energy(beta: float, sides: tuple) -> float:
    s = np.array([v for v in sides if v > 0])
    k = s.size
    if beta < 0:
        return 1.0
    if k == 0 or (beta > 0 and beta >= k):
        return math.inf
    if k == 1:
        h = float(s[0])
        if beta > 0:
            return 2.0 * h ** (-beta) / ((1.0 - beta) * (2.0 - beta))
        # 2 int_0^1 (1 - w) log_+(1 / (h w)) dw
        f = lambda w: (1.0 - w) * k_kernel(0.0, h * w)  # noqa: E731
        brk = [1.0 / (math.e * h)] if 1.0 / (math.e * h) < 1.0 else None
        return 2.0 * _quad(f, 0.0, 1.0, points=brk)
    if k == 2:
        def inner(th):
            e = np.array([math.cos(th), math.sin(th)])
            se = float(np.linalg.norm(s * e))
            rmax = 1.0 / max(e)
            poly = lambda r: (1.0 - r * e[0]) * (1.0 - r * e[1])  # noqa: E731
            if beta > 0:
                return se ** (-beta) * _quad(poly, 0.0, rmax, weight="alg", wvar=(1.0 - beta, 0.0))
            return _quad(lambda r: poly(r) * r * k_kernel(0.0, r * se), 0.0, rmax)
        return 4.0 * _quad(inner, 0.0, math.pi / 2)
    if k == 3:
        def inner(th, ph):
            e = np.array([math.sin(ph) * math.cos(th), math.sin(ph) * math.sin(th), math.cos(ph)])
            se = float(np.linalg.norm(s * e))
            rmax = 1.0 / max(e)
            poly = lambda r: (1.0 - r * e[0]) * (1.0 - r * e[1]) * (1.0 - r * e[2])  # noqa: E731
            if beta > 0:
                val = se ** (-beta) * _quad(poly, 0.0, rmax, weight="alg", wvar=(2.0 - beta, 0.0))
            else:
                val = _quad(lambda r: poly(r) * r * r * k_kernel(0.0, r * se), 0.0, rmax)
            return val * math.sin(ph)
        outer = lambda ph: _quad(lambda th: inner(th, ph), 0.0, math.pi / 2)  # noqa: E731
        return 8.0 * _quad(outer, 0.0, math.pi / 2)
    raise DomainError("cell self-energy implemented for cells of dimension <= 3")


def cell_self_energy(beta: float, sides: Sequence[float]) -> float:
    """``E K_beta(|U - V|)`` for ``U, V`` independent uniform on a box with the given sides.

    Finite when the number of non-degenerate sides exceeds ``beta`` (or
    ``beta <= 0`` with at least one side); ``+inf`` otherwise.
    """
    key = tuple(round(float(v), 15) for v in sides)
    return _self_energy(float(beta), key)


def self_energies(disc: Discretization, beta: float) -> np.ndarray:
    uniq, inv = np.unique(disc.sides, axis=0, return_inverse=True)
    vals = np.array([cell_self_energy(beta, row) for row in uniq])
    return vals[np.ravel(inv)]


# ---------------------------------------------------------------------------
# energies


class _KernelMatrix:
    """Energy matrix with the cell self-energies on the diagonal.

    Stored densely up to ``dense_limit`` atoms; otherwise columns are
    recomputed on demand so memory stays ``O(n)``.
    """

    def __init__(self, atoms: np.ndarray, beta: float, diag: np.ndarray, dense_limit: int = 4096):
        self.atoms = atoms
        self.beta = beta
        self.diag = diag
        self.n = atoms.shape[0]
        self.dense = None
        if self.n <= dense_limit:
            q = self._block(atoms, atoms)
            np.fill_diagonal(q, diag)
            self.dense = q

    def _block(self, a, b):
        with np.errstate(divide="ignore"):
            return k_kernel(self.beta, cdist(a, b))

    def column(self, i: int) -> np.ndarray:
        if self.dense is not None:
            return self.dense[:, i]
        col = self._block(self.atoms, self.atoms[i:i + 1])[:, 0]
        col[i] = self.diag[i]
        return col

    def matvec(self, w: np.ndarray, block: int = 2048) -> np.ndarray:
        if self.dense is not None:
            return self.dense @ w
        out = np.empty(self.n)
        for lo in range(0, self.n, block):
            q = self._block(self.atoms[lo:lo + block], self.atoms)
            idx = np.arange(lo, min(lo + block, self.n))
            q[idx - lo, idx] = self.diag[idx]
            out[lo:lo + block] = q @ w
        return out


def energy(mu: DiscreteMeasure, beta: float, self_energy: np.ndarray | None = None,
           offdiag_only: bool = False, block: int = 2048) -> float:
    """Discrete energy ``sum_ij w_i w_j K_beta(|x_i - x_j|)``.

    The diagonal uses ``K_beta(0)``, which is infinite for ``beta >= 0``,
    unless ``self_energy`` supplies per-atom cell self-energies or
    ``offdiag_only`` drops it. For ``beta < 0`` the result is exactly 1.
    """
    if beta < 0 and self_energy is None and not offdiag_only:
        return 1.0
    w = mu.weights
    x = mu.atoms
    total = 0.0
    n = w.size
    for lo in range(0, n, block):
        with np.errstate(divide="ignore"):
            q = k_kernel(beta, cdist(x[lo:lo + block], x))
        idx = np.arange(lo, min(lo + block, n))
        q[idx - lo, idx] = 0.0
        total += float(w[lo:lo + block] @ (q @ w))
    if offdiag_only:
        return total
    if self_energy is not None:
        diag = np.asarray(self_energy, dtype=float)
    else:
        diag = np.full(n, k_kernel(beta, 0.0))
    pos = w > 0
    if np.any(np.isinf(diag[pos])):
        return math.inf
    return total + float(np.sum(w[pos] ** 2 * diag[pos]))


# ---------------------------------------------------------------------------
# capacity


@dataclass(frozen=True)
class CapacityResult:
    """Capacity estimate with its Frank-Wolfe certificate.

    ``energy`` is the discrete minimum found, ``gap`` the Frank-Wolfe
    duality gap, so ``lower_bound = energy - gap`` bounds the discrete
    infimum from below.
    """

    value: float
    beta: float
    energy: float
    gap: float
    lower_bound: float
    mesh: float
    n_atoms: int
    iterations: int
    atoms: np.ndarray = field(repr=False, default=None)
    weights: np.ndarray = field(repr=False, default=None)

    @property
    def relative_gap(self) -> float:
        if self.gap == 0:
            return 0.0
        return self.gap / self.energy if math.isfinite(self.energy) and self.energy > 0 else math.inf

    def to_dict(self) -> dict:
        return {"value": self.value, "beta": self.beta, "energy": self.energy, "gap": self.gap,
                "relative_gap": self.relative_gap, "lower_bound": self.lower_bound, "mesh": self.mesh,
                "n_atoms": self.n_atoms, "iterations": self.iterations}


@dataclass(frozen=True)
class FWResult:
    weights: np.ndarray
    energy: float
    gap: float
    iterations: int


def frank_wolfe_simplex(Q: _KernelMatrix, tol: float = 1e-6, max_iter: int = 100_000) -> FWResult:
    """Minimise ``w^T Q w`` over the probability simplex (away-step Frank-Wolfe).

    Uses exact line search. Stops when the duality gap ``2 (w^T Q w - min_i (Qw)_i)``
    is below ``tol`` times the current energy.
    """
    n = Q.n
    w = np.full(n, 1.0 / n)
    g = Q.matvec(w)
    f = float(w @ g)
    for it in range(1, max_iter + 1):
        s = int(np.argmin(g))
        gap = 2.0 * (f - g[s])
        if gap <= tol * f:
            return FWResult(w, f, max(gap, 0.0), it - 1)
        active = np.flatnonzero(w > 0)
        v = int(active[np.argmax(g[active])])
        if f - g[s] >= g[v] - f:
            col = Q.column(s)
            gd = g[s] - f
            curv = Q.diag[s] - 2.0 * g[s] + f
            step = 1.0 if curv <= 0 else min(1.0, -gd / curv)
            w *= 1.0 - step
            w[s] += step
            g = (1.0 - step) * g + step * col
        else:
            col = Q.column(v)
            wv = w[v]
            gmax = wv / (1.0 - wv) if wv < 1.0 else np.inf
            gd = f - g[v]
            curv = f - 2.0 * g[v] + Q.diag[v]
            step = gmax if curv <= 0 else min(gmax, -gd / curv)
            w *= 1.0 + step
            w[v] -= step
            if step == gmax:
                w[v] = 0.0
            g = (1.0 + step) * g - step * col
        if it % 500 == 0:
            g = Q.matvec(w)  # limit drift of the running gradient
        f = float(w @ g)
    raise NumericError(f"Frank-Wolfe did not converge in {max_iter} iterations (gap {gap:.3g})", achieved=gap)


def capacity(A: CompactSetSpec, beta: float, mesh: float, tol: float = 1e-6, max_iter: int = 100_000,
             keep_measure: bool = False) -> CapacityResult:
    """``Cap_beta(A) = 1 / inf_mu I_beta(mu)`` over probability measures on the discretised set.

    For ``beta < 0`` the kernel is constant and the result is exactly 1.
    Cells whose self-energy is infinite cannot carry mass; if every cell is
    of that kind the capacity is 0.
    """
    beta = float(beta)
    disc = discretize(A, mesh)
    if beta < 0:
        return CapacityResult(1.0, beta, 1.0, 0.0, 1.0, mesh, disc.n, 0)
    diag = self_energies(disc, beta)
    finite = np.isfinite(diag)
    if not np.any(finite):
        return CapacityResult(0.0, beta, math.inf, 0.0, math.inf, mesh, disc.n, 0)
    atoms = disc.atoms[finite]
    Q = _KernelMatrix(atoms, beta, diag[finite])
    res = frank_wolfe_simplex(Q, tol=tol, max_iter=max_iter)
    value = 1.0 / res.energy
    return CapacityResult(value, beta, res.energy, res.gap, res.energy - res.gap, mesh, disc.n, res.iterations,
                          atoms if keep_measure else None, res.weights if keep_measure else None)


# ---------------------------------------------------------------------------
# Hausdorff pre-measure


@dataclass(frozen=True)
class Covering:
    """Balls ``(center, radius)`` covering every cell of a discretised set."""

    centers: np.ndarray
    radii: np.ndarray
    scale: float

    def cost(self, beta: float) -> float:
        if beta < 0:
            return math.inf
        return float(np.sum((2.0 * self.radii) ** beta))


def hausdorff_cover(A: CompactSetSpec, beta: float, eps: float, mesh: float | None = None,
                    max_levels: int = 12) -> Covering:
    """Greedy weighted set cover of the discretised set by balls of radius ``<= eps``.

    Candidate balls are centred at cell centres with radii ``eps 2^-j``,
    down to the cell half-diagonal (or ``max_levels`` halvings for
    zero-size cells). A ball covers a cell only if it contains the whole
    cell. At each step the ball with the lowest cost ``(2r)^beta`` per newly
    covered cell is chosen, ties going to the lowest candidate index.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    if mesh is None:
        mesh = eps / 4.0
    disc = discretize(A, mesh)
    hd = disc.half_diagonals
    hmax = float(hd.max())
    if hmax > eps:
        raise DomainError("mesh too coarse for the requested eps")
    radii = []
    r = eps
    for _ in range(max_levels + 1):
        if r < hmax * (1 - 1e-12):
            break
        radii.append(r)
        r /= 2.0
    tree = cKDTree(disc.atoms)
    n = disc.n
    cand_sets = []
    cand_cost = []
    cand_geo = []
    b = max(float(beta), 0.0)
    for r in radii:
        # cells whose centre lies within r - hmax are fully covered; refine with per-cell half-diagonals
        lists = tree.query_ball_point(disc.atoms, r + 1e-12)
        for i, idx in enumerate(lists):
            idx = np.asarray(idx, dtype=np.int64)
            dist = np.linalg.norm(disc.atoms[idx] - disc.atoms[i], axis=1)
            idx = idx[dist + hd[idx] <= r * (1 + 1e-12)]
            if idx.size == 0:
                continue
            cand_sets.append(idx)
            cand_cost.append((2.0 * r) ** b)
            cand_geo.append((i, r))
    covered = np.zeros(n, dtype=bool)
    n_left = n
    heap = [(cand_cost[c] / cand_sets[c].size, c, cand_sets[c].size) for c in range(len(cand_sets))]
    heapq.heapify(heap)
    chosen = []
    while n_left > 0:
        if not heap:
            raise NumericError("greedy covering ran out of candidates")
        ratio, c, cnt = heapq.heappop(heap)
        new = int(np.count_nonzero(~covered[cand_sets[c]]))
        if new == 0:
            continue
        if new != cnt:
            heapq.heappush(heap, (cand_cost[c] / new, c, new))
            continue
        covered[cand_sets[c]] = True
        n_left -= new
        chosen.append(c)
    centers = np.array([disc.atoms[cand_geo[c][0]] for c in chosen])
    rads = np.array([cand_geo[c][1] for c in chosen])
    return Covering(centers, rads, float(eps))


def hausdorff_premeasure(A: CompactSetSpec, beta: float, eps: float, mesh: float | None = None,
                         max_levels: int = 12) -> float:
    """Upper bound for ``inf sum (2 r_i)^beta`` over coverings at scale ``eps``.

    Returns ``+inf`` for ``beta < 0``. The greedy cover gives an upper bound
    of the true pre-measure only.
    """
    if beta < 0:
        return math.inf
    return hausdorff_cover(A, beta, eps, mesh, max_levels).cost(beta)


# ---------------------------------------------------------------------------
# anisotropic grid and thresholds


@dataclass(frozen=True)
class AnisotropicGrid:
    """Rectangles ``[t_k, t_{k+1}] x [x_l, x_{l+1}]`` meeting ``I x J``.

    ``t_k = k 2^(-2 n alpha / (alpha-1))`` and ``x_l = l 2^(-2n / (alpha-1))``.
    """

    alpha: float
    n: int
    t_step: float
    x_step: float
    k_range: tuple
    l_range: tuple

    @property
    def count(self) -> int:
        return (self.k_range[1] - self.k_range[0]) * (self.l_range[1] - self.l_range[0])

    def rectangles(self):
        """Iterate over ``((t0, t1), (x0, x1))``."""
        for k in range(*self.k_range):
            for m in range(*self.l_range):
                yield ((k * self.t_step, (k + 1) * self.t_step), (m * self.x_step, (m + 1) * self.x_step))

    def delta_diameter(self) -> float:
        """Parabolic diameter of one rectangle, equal to ``2 * 2^-n``."""
        a = self.alpha
        return self.t_step ** ((a - 1) / (2 * a)) + self.x_step ** ((a - 1) / 2)


def _cover_range(lo: float, hi: float, step: float) -> tuple[int, int]:
    k0 = math.floor(lo / step + 1e-12)
    k1 = math.ceil(hi / step - 1e-12)
    return (k0, max(k1, k0 + 1))


def anisotropic_grid(alpha: float, n: int, I: tuple[float, float], J: tuple[float, float]) -> AnisotropicGrid:
    """Dyadic rectangles of level ``n`` whose interiors meet ``I x J``."""
    alpha = validate_alpha(alpha)
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    if not (I[0] <= I[1] and J[0] <= J[1]) or not all(map(math.isfinite, (*I, *J))):
        raise DomainError("I and J must be bounded intervals")
    tau = 2.0 ** (-2.0 * n * alpha / (alpha - 1.0))
    xi = 2.0 ** (-2.0 * n / (alpha - 1.0))
    grid = AnisotropicGrid(alpha, int(n), tau, xi, _cover_range(I[0], I[1], tau), _cover_range(J[0], J[1], xi))
    bound = (I[1] - I[0] + 2.0) * (J[1] - J[0] + 2.0) * 2.0 ** (2.0 * n * (alpha + 1.0) / (alpha - 1.0))
    assert grid.count <= bound
    return grid


class Thresholds(NamedTuple):
    space_time: float
    fixed_time: float
    fixed_space: float


def dimension_thresholds(alpha: float, d: int) -> Thresholds:
    """``(d - 2(alpha+1)/(alpha-1), d - 2/(alpha-1), d - 2 alpha/(alpha-1))``."""
    alpha = validate_alpha(alpha)
    if int(d) != d or d < 1:
        raise DomainError("d must be a positive integer")
    return Thresholds(d - 2.0 * (alpha + 1.0) / (alpha - 1.0), d - 2.0 / (alpha - 1.0),
                      d - 2.0 * alpha / (alpha - 1.0))


# ---------------------------------------------------------------------------
# energy-integral lemma


@dataclass(frozen=True)
class LemmaCheck:
    alpha: float
    d: int
    p: float
    a: float
    integral: float
    kernel_value: float
    ratio: float
    branch: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def lemma_exponent_threshold(alpha: float, d: int) -> float:
    """Smallest admissible ``p``: ``4 d (d/2 - 2/(alpha-1) - 1)``."""
    return 4.0 * d * (d / 2.0 - 2.0 / (alpha - 1.0) - 1.0)


def lemma_integral(alpha: float, d: int, p: float, a: float, I_len: float = 1.0, J_len: float = 1.0) -> float:
    """``int_I int_I int_J int_J Delta^-d [Delta^2 / a^2 ^ 1]^(p/(4d)) dt ds dx dy``.

    The quadruple integral depends only on ``u = |t-s|`` and ``v = |x-y|``,
    which gives weights ``4 (|I| - u)(|J| - v)``. With ``rho_1 = u^e1``,
    ``rho_2 = v^e2`` (``e1 = (alpha-1)/(2 alpha)``, ``e2 = (alpha-1)/2``) and
    ``rho_1 = D theta``, ``rho_2 = D (1 - theta)`` the metric becomes ``D``
    and the integral is a radial-angular double integral, done by nested
    adaptive quadrature with a breakpoint at ``D = a``.
    """
    e1 = (alpha - 1.0) / (2.0 * alpha)
    e2 = (alpha - 1.0) / 2.0
    k1, k2 = 1.0 / e1, 1.0 / e2
    R1, R2 = I_len**e1, J_len**e2
    q = p / (4.0 * d)

    def radial(D, th):
        u = (D * th) ** k1
        v = (D * (1.0 - th)) ** k2
        wgt = 4.0 * max(I_len - u, 0.0) * max(J_len - v, 0.0)
        jac = k1 * k2 * th ** (k1 - 1.0) * (1.0 - th) ** (k2 - 1.0) * D ** (k1 + k2 - 1.0)
        return wgt * jac * D ** (-d) * min(D * D / (a * a), 1.0) ** q

    def angular(th):
        dmax = min(R1 / th if th > 0 else math.inf, R2 / (1.0 - th) if th < 1 else math.inf)
        if a < dmax:
            return _quad(radial, 0.0, a, args=(th,)) + _quad(radial, a, dmax, args=(th,))
        return _quad(radial, 0.0, dmax, args=(th,))

    return _quad(angular, 0.0, 1.0)


def lemma_integral_check(alpha: float, d: int, p: float, a: float, I: tuple[float, float] = (0.0, 1.0),
                         J: tuple[float, float] = (0.0, 1.0)) -> LemmaCheck:
    """Ratio of the lemma's quadruple integral to ``K_{d - 2(alpha+1)/(alpha-1)}(a)``.

    Raises
    ------
    DomainError
        If ``p`` is not above ``4 d (d/2 - 2/(alpha-1) - 1)`` or ``a`` is
        outside ``(0, N]`` with ``N`` the parabolic diameter of ``I x J``.
    """
    alpha = validate_alpha(alpha)
    if not p > lemma_exponent_threshold(alpha, d):
        raise DomainError(f"p={p} must exceed {lemma_exponent_threshold(alpha, d)}")
    I_len, J_len = I[1] - I[0], J[1] - J[0]
    if not (I_len > 0 and J_len > 0):
        raise DomainError("I and J must have positive length")
    N = I_len ** ((alpha - 1) / (2 * alpha)) + J_len ** ((alpha - 1) / 2)
    if not (0 < a <= N):
        raise DomainError(f"a must lie in (0, {N}]")
    beta = dimension_thresholds(alpha, d).space_time
    integral = lemma_integral(alpha, d, p, a, I_len, J_len)
    kv = k_kernel(beta, a)
    branch = "positive" if beta > 0 else ("critical" if beta == 0 else "negative")
    return LemmaCheck(alpha, int(d), float(p), float(a), integral, float(kv), integral / float(kv), branch)
