"""Truncated Hofbauer extension.

Domains are intervals D = f^k(C_k), identified when both endpoints agree to
within ``tol``. A domain D is split at the interior junctions of f; each piece
Z ∩ D is pushed forward to the domain f(Z ∩ D), which gives the edges D -> D'.
Generation is breadth first from D_0 = [0, 1], so the discovery level of a
domain is its graph distance from D_0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .map_model import IntervalMap, turning_points


class TowerEscape(RuntimeError):
    """A step of the lifted dynamics leaves the truncated tower."""

    def __init__(self, interval, reason="level"):
        super().__init__(f"tower step escapes the truncation ({reason}): would-be domain {interval}")
        self.interval = interval
        self.reason = reason


@dataclass(frozen=True)
class TowerDomain:
    id: int
    a: float
    b: float
    level: int
    witness: tuple[int, ...]  # itinerary of a cylinder C_k with f^k(C_k) = D; k = len(witness)

    @property
    def interval(self) -> tuple[float, float]:
        return (self.a, self.b)

    @property
    def width(self) -> float:
        return self.b - self.a

    def contains(self, x, tol: float = 0.0) -> bool:
        return self.a - tol <= x <= self.b + tol


@dataclass(frozen=True)
class TowerEdge:
    src: int
    dst: int  # -1 when the image escapes the truncation
    lo: float  # piece of the source domain
    hi: float
    branch: int
    image: tuple[float, float]
    reason: str = ""


@dataclass(frozen=True)
class TowerPoint:
    x: float
    domain: int


@dataclass
class TowerGraph:
    f: IntervalMap
    domains: list[TowerDomain]
    edges: list[TowerEdge]
    level_cap: int
    tol: float
    min_width: float
    truncated: bool = False
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        self._out = [[] for _ in self.domains]
        for e in self.edges:
            self._out[e.src].append(e)
        for lst in self._out:
            lst.sort(key=lambda e: (e.lo, e.hi))
        self._A = np.array([d.a for d in self.domains])
        self._B = np.array([d.b for d in self.domains])

    def __len__(self):
        return len(self.domains)

    def out_edges(self, d: int) -> list[TowerEdge]:
        return self._out[d]

    @property
    def escaping_edges(self) -> list[TowerEdge]:
        return [e for e in self.edges if e.dst < 0]

    @property
    def levels(self) -> np.ndarray:
        return np.array([d.level for d in self.domains], dtype=int)

    def find(self, a: float, b: float) -> int:
        """Id of the stored domain matching [a, b] within tol, or -1."""
        if not self.domains:
            return -1
        hit = np.nonzero((np.abs(self._A - a) < self.tol) & (np.abs(self._B - b) < self.tol))[0]
        return int(hit[0]) if hit.size else -1

    def find_many(self, a, b) -> np.ndarray:
        """Vectorised :meth:`find` (first matching id, -1 if none)."""
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        out = np.full(a.shape, -1, dtype=np.int64)
        for i0 in range(0, a.size, 4096):
            sl = slice(i0, i0 + 4096)
            m = (np.abs(a[sl, None] - self._A[None, :]) < self.tol) & (np.abs(b[sl, None] - self._B[None, :]) < self.tol)
            hit = m.any(1)
            out[sl][hit] = np.argmax(m[hit], axis=1)
        return out

    def transition_table(self) -> np.ndarray:
        """next[d, k]: domain reached from d through branch k (-1 for escapes or no piece)."""
        tbl = np.full((len(self.domains), self.f.n_branches), -1, dtype=np.int64)
        for e in self.edges:
            tbl[e.src, e.branch] = e.dst
        return tbl

    def adjacency(self, ids=None) -> csr_matrix:
        n = len(self.domains)
        src = [e.src for e in self.edges if e.dst >= 0]
        dst = [e.dst for e in self.edges if e.dst >= 0]
        A = csr_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
        A.data[:] = 1.0
        if ids is not None:
            ids = np.asarray(ids)
            A = A[ids][:, ids]
        return A

    def edge_for(self, d: int, x: float) -> TowerEdge:
        """Outgoing edge of domain d whose piece contains x (left piece at shared boundaries)."""
        for e in self._out[d]:
            if e.lo <= x <= e.hi:
                return e
        dom = self.domains[d]
        # tolerate round-off just outside the domain
        if dom.contains(x, self.tol) and self._out[d]:
            return self._out[d][0] if x < dom.a + self.tol else self._out[d][-1]
        raise ValueError(f"x={x} not in domain {d} = [{dom.a}, {dom.b}]")


def _pieces(f: IntervalMap, a: float, b: float):
    """Pieces of [a, b] cut at interior junctions, with branch index and pushed-forward interval."""
    cuts = [a] + [z for z in f.junctions if a < z < b] + [b]
    out = []
    for lo, hi in zip(cuts, cuts[1:]):
        k = int(f.branch_index(0.5 * (lo + hi)))
        br = f.branches[k]
        ylo, yhi = float(br.value(lo)), float(br.value(hi))
        img = (max(0.0, min(ylo, yhi)), min(1.0, max(ylo, yhi)))
        out.append((lo, hi, k, img))
    return out


def build_tower(
    f: IntervalMap, level_cap: int = 10, min_width: float = 1e-10, tol: float = 1e-9, max_domains: int = 20000
) -> TowerGraph:
    if level_cap < 0:
        raise ValueError("level cap must be nonnegative")
    domains = [TowerDomain(0, 0.0, 1.0, 0, ())]
    A, B = [0.0], [1.0]
    edges = []
    notes = []
    truncated = False
    frontier = [0]
    while frontier:
        nxt = []
        for d in frontier:
            dom = domains[d]
            for lo, hi, k, img in _pieces(f, dom.a, dom.b):
                Aa, Ba = np.asarray(A), np.asarray(B)
                hit = np.nonzero((np.abs(Aa - img[0]) < tol) & (np.abs(Ba - img[1]) < tol))[0]
                if hit.size:
                    edges.append(TowerEdge(d, int(hit[0]), lo, hi, k, img))
                    continue
                if dom.level + 1 > level_cap:
                    edges.append(TowerEdge(d, -1, lo, hi, k, img, "level"))
                    continue
                if img[1] - img[0] < min_width:
                    edges.append(TowerEdge(d, -1, lo, hi, k, img, "width"))
                    continue
                if len(domains) >= max_domains:
                    edges.append(TowerEdge(d, -1, lo, hi, k, img, "cap"))
                    if not truncated:
                        notes.append(f"domain cap {max_domains} reached; tower truncated")
                        warnings.warn(notes[-1], stacklevel=2)
                    truncated = True
                    continue
                new = TowerDomain(len(domains), img[0], img[1], dom.level + 1, dom.witness + (k,))
                domains.append(new)
                A.append(img[0])
                B.append(img[1])
                edges.append(TowerEdge(d, new.id, lo, hi, k, img))
                nxt.append(new.id)
        frontier = nxt
    n_width = sum(1 for e in edges if e.reason == "width")
    if n_width:
        notes.append(f"{n_width} edge(s) dropped below min_width {min_width}")
    return TowerGraph(f, domains, edges, level_cap, tol, min_width, truncated, notes)


def lift(tower: TowerGraph, x: float) -> TowerPoint:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    return TowerPoint(float(x), 0)


def project(p: TowerPoint) -> float:
    return p.x


def tower_step(tower: TowerGraph, p: TowerPoint) -> TowerPoint:
    e = tower.edge_for(p.domain, p.x)
    if e.dst < 0:
        raise TowerEscape(e.image, e.reason)
    return TowerPoint(float(tower.f(p.x)), e.dst)


@dataclass
class TowerOrbit:
    """Lifted orbit of x from D_0, followed past the truncation by free interval simulation.

    ``domain[j]`` is the stored domain id at time j or -1 while the orbit is outside the
    stored tower; ``interval[j]`` is the actual domain interval either way.
    """

    x: np.ndarray
    domain: np.ndarray
    interval: np.ndarray
    level: np.ndarray  # stored level, or -1 when outside the stored tower


def tower_orbit(tower: TowerGraph, x: float, n: int) -> TowerOrbit:
    f = tower.f
    xs = np.empty(n + 1)
    dom = np.full(n + 1, -1, dtype=int)
    iv = np.empty((n + 1, 2))
    lev = np.full(n + 1, -1, dtype=int)
    xs[0], dom[0], iv[0], lev[0] = x, 0, (0.0, 1.0), 0
    a, b = 0.0, 1.0
    d = 0
    junc = f.junctions
    for j in range(n):
        xj = xs[j]
        if d >= 0:
            e = tower.edge_for(d, xj)
            img, d = e.image, e.dst
        else:
            # free simulation: cut [a, b] at the junctions around xj (left piece at ties)
            k = int(np.searchsorted(junc, xj, side="left"))
            lo = max(a, junc[k - 1]) if k > 0 else a
            hi = min(b, junc[k]) if k < len(junc) else b
            br = f.branches[k]
            y0, y1 = float(br.value(lo)), float(br.value(hi))
            img = (max(0.0, min(y0, y1)), min(1.0, max(y0, y1)))
            d = tower.find(*img)
        a, b = img
        xs[j + 1] = f(xj)
        dom[j + 1] = d
        iv[j + 1] = img
        lev[j + 1] = tower.domains[d].level if d >= 0 else -1
    return TowerOrbit(xs, dom, iv, lev)


@dataclass
class TransitivePart:
    """Approximate transitive part: a bottom nontrivial SCC plus everything it reaches.

    ``core`` is the strongly connected component itself; ``ids`` adds the stored
    domains downstream of it, which in the untruncated tower belong to the same
    closed subgraph (truncation only cuts the paths that would lead back).
    """

    ids: list[int]
    core: list[int]
    closed: bool
    approximate: bool = True

    def __post_init__(self):
        self._set = set(self.ids)

    def __contains__(self, d) -> bool:
        return d in self._set

    def __len__(self):
        return len(self.ids)


def _reachable(tower: TowerGraph, start) -> np.ndarray:
    seen = np.zeros(len(tower), dtype=bool)
    stack = list(start)
    seen[stack] = True
    while stack:
        u = stack.pop()
        for e in tower.out_edges(u):
            if e.dst >= 0 and not seen[e.dst]:
                seen[e.dst] = True
                stack.append(e.dst)
    return seen


def transitive_part(tower: TowerGraph) -> TransitivePart:
    """Closed primitive piece of the truncated tower.

    Among the nontrivial strongly connected components reachable from D_0, pick the
    largest one whose forward closure contains no other nontrivial component, and
    return that closure. The result is flagged approximate since truncation hides edges.
    """
    n = len(tower)
    if n == 0:
        warnings.warn("empty tower", stacklevel=2)
        return TransitivePart([], [], False)
    A = tower.adjacency()
    ncomp, labels = connected_components(A, directed=True, connection="strong")
    reach0 = _reachable(tower, [0])
    diag = A.diagonal()
    nontrivial = []
    for c in range(ncomp):
        members = np.nonzero(labels == c)[0]
        if reach0[members].any() and (members.size > 1 or diag[members[0]] > 0):
            nontrivial.append(members)
    best = None
    for members in nontrivial:
        down = _reachable(tower, members.tolist())
        others = [m for m in nontrivial if m is not members and down[m].any()]
        if others:
            continue
        key = (members.size, -members.min())
        if best is None or key > best[0]:
            best = (key, members, down)
    if best is None:
        warnings.warn("no nontrivial strongly connected component within the truncation", stacklevel=2)
        return TransitivePart([], [], False)
    _, members, down = best
    ids = np.nonzero(down)[0]
    return TransitivePart([int(v) for v in ids], sorted(int(v) for v in members), True)


@dataclass
class LevelCensus:
    counts: dict[int, int]
    bound: int
    violations: list[int]


def level_census(tower: TowerGraph) -> LevelCensus:
    counts: dict[int, int] = {}
    for d in tower.domains:
        counts[d.level] = counts.get(d.level, 0) + 1
    n_turn = len(turning_points(tower.f))
    bound = 2 * max(n_turn, 1)
    viol = sorted(lv for lv, c in counts.items() if lv > 0 and c > bound)
    return LevelCensus(dict(sorted(counts.items())), bound, viol)


def export_dot(tower: TowerGraph) -> str:
    lines = ["digraph tower {"]
    for d in tower.domains:
        lines.append(f'  n{d.id} [label="L{d.level}:[{d.a:.12g},{d.b:.12g}]"];')
    for e in sorted(tower.edges, key=lambda e: (e.src, e.lo, e.hi)):
        if e.dst >= 0:
            lines.append(f'  n{e.src} -> n{e.dst} [label="{e.branch}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def census_csv(tower: TowerGraph) -> str:
    c = level_census(tower)
    rows = ["level,count,violation"]
    rows += [f"{lv},{n},{int(lv in c.violations)}" for lv, n in c.counts.items()]
    return "\n".join(rows) + "\n"
