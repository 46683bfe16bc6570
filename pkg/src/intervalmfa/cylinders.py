"""Cylinder partitions P_n and Birkhoff sums.

P_n is built depth by depth. A cylinder C of depth n carries its image
J = f^n(C); the children of C are the pull-backs of the pieces of J cut at the
interior junctions of f. Endpoints are recovered by composing monotone branch
inverses (never by composing polynomials), and images are pushed forward one
branch at a time, so both stay accurate at moderate depth.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .map_model import IntervalMap, Potential

WIDTH_FLOOR = 1e-14


class RangeError(ValueError):
    pass


@dataclass(frozen=True)
class Cylinder:
    depth: int
    a: float
    b: float
    itinerary: tuple[int, ...]
    image: tuple[float, float]
    orientation: int = 1
    truncated: bool = False

    @property
    def width(self) -> float:
        return self.b - self.a

    def contains(self, x: float) -> bool:
        return self.a <= x <= self.b


@dataclass
class Partition:
    """P_n stored column-wise; ``parent[i]`` indexes the cylinder of P_{n-1} containing cylinder i."""

    depth: int
    a: np.ndarray
    b: np.ndarray
    img_lo: np.ndarray
    img_hi: np.ndarray
    itin: np.ndarray  # (N, depth) branch indices
    orient: np.ndarray  # +1 / -1, orientation of f^n on the cylinder
    truncated: np.ndarray
    parent: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.a)

    def __getitem__(self, i: int) -> Cylinder:
        return Cylinder(
            self.depth,
            float(self.a[i]),
            float(self.b[i]),
            tuple(int(v) for v in self.itin[i]),
            (float(self.img_lo[i]), float(self.img_hi[i])),
            int(self.orient[i]),
            bool(self.truncated[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def widths(self) -> np.ndarray:
        return self.b - self.a

    @property
    def image_widths(self) -> np.ndarray:
        return self.img_hi - self.img_lo

    def locate(self, x) -> np.ndarray:
        """Index of the cylinder containing x (left cylinder at shared endpoints)."""
        x = np.asarray(x, dtype=float)
        return np.minimum(np.searchsorted(self.b, x, side="left"), len(self) - 1)

    def index_of(self, itinerary) -> int:
        """Index of the cylinder with the given itinerary, or -1."""
        key = np.asarray(itinerary)
        hits = np.nonzero(np.all(self.itin == key, axis=1))[0]
        return int(hits[0]) if hits.size else -1


def base_partition(f: IntervalMap) -> Partition:
    return Partition(
        0,
        np.array([0.0]),
        np.array([1.0]),
        np.array([0.0]),
        np.array([1.0]),
        np.zeros((1, 0), dtype=np.int16),
        np.array([1], dtype=np.int8),
        np.array([False]),
        None,
    )


def pullback(f: IntervalMap, itin: np.ndarray, y: np.ndarray, keep_orbit: bool = False):
    """Solve f^n(x) = y on the cylinders with the given itineraries.

    itin has shape (N, n); y has shape (N,) or (N, m). With keep_orbit the array
    of intermediate points f^j(x), j = 0..n-1, is returned with shape (n, *y.shape).
    """
    itin = np.asarray(itin)
    z = np.array(y, dtype=float, copy=True)
    n = itin.shape[1]
    orbit = np.empty((n,) + z.shape) if keep_orbit else None
    for j in range(n - 1, -1, -1):
        col = itin[:, j]
        for k, br in enumerate(f.branches):
            m = col == k
            if np.any(m):
                z[m] = br.inverse(z[m])
        if keep_orbit:
            orbit[j] = z
    return (z, orbit) if keep_orbit else z


def refine(f: IntervalMap, part: Partition) -> Partition:
    """P_{n+1} from P_n."""
    junc = f.junctions
    nb = f.n_branches
    lo, hi = part.img_lo, part.img_hi
    # pieces of every image cut at the junctions: boundaries lo, junctions inside, hi
    cuts = np.concatenate([[-np.inf], junc, [np.inf]])
    rows, p_lo, p_hi, br_idx = [], [], [], []
    for k in range(nb):
        s, e = np.maximum(lo, cuts[k]), np.minimum(hi, cuts[k + 1])
        ok = e > s
        idx = np.nonzero(ok)[0]
        rows.append(idx)
        p_lo.append(s[idx])
        p_hi.append(e[idx])
        br_idx.append(np.full(idx.size, k, dtype=np.int16))
    rows = np.concatenate(rows)
    p_lo = np.concatenate(p_lo)
    p_hi = np.concatenate(p_hi)
    br_idx = np.concatenate(br_idx)
    # x-endpoints: pull back piece endpoints through the parent's chain
    itin = part.itin[rows]
    ends = pullback(f, itin, np.stack([p_lo, p_hi], axis=1))
    xa = np.minimum(ends[:, 0], ends[:, 1])
    xb = np.maximum(ends[:, 0], ends[:, 1])
    # exact shared boundaries for pieces that touch the parent boundary
    o = part.orient[rows]
    at_lo = p_lo == lo[rows]
    at_hi = p_hi == hi[rows]
    pa, pb = part.a[rows], part.b[rows]
    xa = np.where((o > 0) & at_lo, pa, np.where((o < 0) & at_hi, pa, xa))
    xb = np.where((o > 0) & at_hi, pb, np.where((o < 0) & at_lo, pb, xb))
    # images
    orient_br = np.array([b.orientation for b in f.branches], dtype=np.int8)
    ylo = f.apply_branch(br_idx, p_lo)
    yhi = f.apply_branch(br_idx, p_hi)
    ilo = np.clip(np.minimum(ylo, yhi), 0.0, 1.0)
    ihi = np.clip(np.maximum(ylo, yhi), 0.0, 1.0)
    new_itin = np.concatenate([itin, br_idx[:, None]], axis=1)
    new_orient = (o * orient_br[br_idx]).astype(np.int8)
    order = np.lexsort((xb, xa))
    trunc = (xb - xa) < WIDTH_FLOOR
    out = Partition(
        part.depth + 1,
        xa[order],
        xb[order],
        ilo[order],
        ihi[order],
        new_itin[order],
        new_orient[order],
        (trunc | part.truncated[rows])[order],
        rows[order],
    )
    if np.any(trunc & ~part.truncated[rows]):
        warnings.warn(f"depth {out.depth}: {int(trunc.sum())} cylinder(s) below width floor {WIDTH_FLOOR}", stacklevel=2)
    return out


def partitions(f: IntervalMap, n: int):
    """Yield P_0, P_1, ..., P_n."""
    if n < 0:
        raise ValueError("depth must be nonnegative")
    part = base_partition(f)
    yield part
    for _ in range(n):
        part = refine(f, part)
        yield part


def refine_partition(f: IntervalMap, n: int) -> Partition:
    part = None
    for part in partitions(f, n):
        pass
    return part


def cylinder_at(part: Partition, x: float) -> Cylinder:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    return part[int(part.locate(x))]


def invert_branch(f: IntervalMap, cyl: Cylinder, y, tol: float = 1e-12):
    """The point of cyl mapped to y by f^n."""
    ya = np.asarray(y, dtype=float)
    lo, hi = cyl.image
    if np.any(ya < lo - tol) or np.any(ya > hi + tol):
        raise RangeError(f"y={y} outside the cylinder image [{lo}, {hi}]")
    ya = np.clip(ya, lo, hi)
    itin = np.asarray(cyl.itinerary, dtype=np.int16)[None, :]
    x = pullback(f, itin, ya.reshape(1, -1))[0]
    x = np.clip(x, cyl.a, cyl.b)
    return float(x[0]) if ya.ndim == 0 else x


def iterate_on(f: IntervalMap, itinerary, x):
    """f^n(x) following the given itinerary (branch polynomials applied without relocation)."""
    z = np.asarray(x, dtype=float)
    for k in itinerary:
        z = f.branches[int(k)].value(z)
    return z


def _is_critical_hit(f: IntervalMap, x) -> np.ndarray:
    return np.abs(f.slope(x)) <= 1e-15


def birkhoff_trace(f: IntervalMap, phi: Potential, x: float, n: int) -> tuple[np.ndarray, int | None]:
    """Partial sums S_1φ(x), ..., S_nφ(x) and the index of the first critical hit (if any)."""
    if n == 0:
        return np.zeros(0), None
    orb = f.orbit(float(x), n - 1)
    hit = None
    if phi.is_singular:
        hits = np.nonzero(_is_critical_hit(f, orb))[0]
        if hits.size:
            hit = int(hits[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.asarray(phi(f, orb), dtype=float)
    sums = np.cumsum(vals)
    if hit is not None:
        sums[hit:] = -np.inf
    return sums, hit


def birkhoff_sum(f: IntervalMap, phi: Potential, x: float, n: int) -> float:
    """S_nφ(x); -inf is a sentinel for an orbit that meets a critical point under a singular potential."""
    sums, _ = birkhoff_trace(f, phi, x, n)
    return float(sums[-1]) if n else 0.0
