"""Inducing schemes as first returns to a base set in the Hofbauer tower.

Pieces of the base X̂ are pushed through the tower one step at a time. A piece
is an interval P ⊂ X on which f^t is monotone, together with its image
J = f^t(P), the tower domain carrying J, and its itinerary. At every step J is cut
at the junctions of f; whenever the carrying domain is a base domain, J ∩ X
returns (a branch with τ = t) and the rest keeps moving. Pieces that leave the
stored tower keep their true domain interval (free simulation) and may rejoin it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .cylinders import iterate_on, partitions, pullback
from .hofbauer import TowerGraph, transitive_part
from .map_model import IntervalMap, Potential


class PreconditionError(ValueError):
    pass


class EmptySchemeError(RuntimeError):
    pass


@dataclass(frozen=True)
class InducedBranch:
    a: float
    b: float
    tau: int
    itinerary: tuple[int, ...]
    domains: tuple[int, ...]  # tower domain ids at times 1..tau (-1 outside the stored tower)
    image: tuple[float, float]
    full: bool

    @property
    def width(self) -> float:
        return self.b - self.a


@dataclass
class InducingScheme:
    f: IntervalMap
    X: tuple[float, float]
    base_domains: tuple[int, ...]
    kind: str  # "A" or "B"
    branches: list[InducedBranch]
    tau_cap: int
    delta: float
    compact: bool
    lost_mass: float  # Lebesgue mass dropped below the width floor
    unreturned_mass: float  # Lebesgue mass still travelling at tau_cap
    xprime: tuple[float, float] | None = None
    notes: list[str] = field(default_factory=list)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.branches.sort(key=lambda br: (br.a, br.b))
        self._a = np.array([br.a for br in self.branches])
        self._b = np.array([br.b for br in self.branches])

    def __len__(self):
        return len(self.branches)

    @property
    def x_width(self) -> float:
        return self.X[1] - self.X[0]

    @property
    def taus(self) -> np.ndarray:
        return np.array([br.tau for br in self.branches], dtype=int)

    @property
    def widths(self) -> np.ndarray:
        return self._b - self._a

    @property
    def coverage(self) -> float:
        return float(self.widths.sum() / self.x_width) if self.branches else 0.0

    @property
    def n_partial(self) -> int:
        return sum(not br.full for br in self.branches)

    def locate(self, x: float) -> int:
        """Branch index containing x, or -1 (left branch at shared endpoints)."""
        k = int(np.searchsorted(self._b, x, side="left"))
        if k < len(self.branches) and self._a[k] <= x <= self._b[k]:
            return k
        return -1

    def to_json(self) -> dict:
        return {
            "type": self.kind,
            "X": list(self.X),
            "base_domains": list(self.base_domains),
            "delta": self.delta,
            "tau_cap": self.tau_cap,
            "coverage": self.coverage,
            "lost_mass": self.lost_mass,
            "unreturned_mass": self.unreturned_mass,
            "branches": [
                {"interval": [br.a, br.b], "tau": br.tau, "itinerary": list(br.itinerary), "full": br.full}
                for br in self.branches
            ],
        }


def is_cylinder(f: IntervalMap, a: float, b: float, n_max: int = 14, tol: float = 1e-9) -> tuple[int, int] | None:
    """(depth, index) of a cylinder of P_n equal to [a, b], searching n <= n_max."""
    for part in partitions(f, n_max):
        hit = np.nonzero((np.abs(part.a - a) < tol) & (np.abs(part.b - b) < tol))[0]
        if hit.size:
            return part.depth, int(hit[0])
        if part.widths.max() < (b - a) - tol:
            break
    return None


def _explore(tower: TowerGraph, X, base: set[int], start_dom: int, tau_cap: int, width_floor: float, sliver: float):
    """Breadth-first first-return exploration; returns (branches, lost, unreturned)."""
    f = tower.f
    junc = f.junctions
    cuts = np.concatenate([[-np.inf], junc, [np.inf]])
    xa, xb = X
    d0 = tower.domains[start_dom]
    # active pieces: image lo/hi, domain id, domain interval, itinerary, domain sequence
    lo = np.array([xa])
    hi = np.array([xb])
    dom = np.array([start_dom])
    da, db = np.array([d0.a]), np.array([d0.b])
    itin = np.zeros((1, 0), dtype=np.int16)
    dseq = np.zeros((1, 0), dtype=np.int64)
    branches: list[InducedBranch] = []
    lost = 0.0
    table = tower.transition_table()
    for t in range(1, tau_cap + 1):
        if lo.size == 0:
            break
        # cut images at junctions and push forward
        rows, nlo, nhi, brk, nda, ndb = [], [], [], [], [], []
        for k in range(f.n_branches):
            s, e = np.maximum(lo, cuts[k]), np.minimum(hi, cuts[k + 1])
            idx = np.nonzero(e > s)[0]
            if idx.size == 0:
                continue
            rows.append(idx)
            nlo.append(s[idx])
            nhi.append(e[idx])
            brk.append(np.full(idx.size, k, dtype=np.int16))
            nda.append(np.maximum(da[idx], cuts[k]))
            ndb.append(np.minimum(db[idx], cuts[k + 1]))
        rows = np.concatenate(rows)
        plo, phi_, brk = np.concatenate(nlo), np.concatenate(nhi), np.concatenate(brk)
        pda, pdb = np.concatenate(nda), np.concatenate(ndb)
        y0, y1 = f.apply_branch(brk, plo), f.apply_branch(brk, phi_)
        lo, hi = np.clip(np.minimum(y0, y1), 0, 1), np.clip(np.maximum(y0, y1), 0, 1)
        z0, z1 = f.apply_branch(brk, pda), f.apply_branch(brk, pdb)
        da, db = np.clip(np.minimum(z0, z1), 0, 1), np.clip(np.maximum(z0, z1), 0, 1)
        itin = np.concatenate([itin[rows], brk[:, None]], axis=1)
        # next domain: follow stored edges, else look the interval up
        newdom = np.full(rows.size, -1, dtype=np.int64)
        src = dom[rows]
        known = src >= 0
        newdom[known] = table[src[known], brk[known]]
        miss = np.nonzero(newdom < 0)[0]
        if miss.size:
            newdom[miss] = tower.find_many(da[miss], db[miss])
        dom = newdom
        dseq = np.concatenate([dseq[rows], dom[:, None]], axis=1)
        # split off returns
        inbase = np.isin(dom, list(base))
        rlo, rhi = np.maximum(lo, xa), np.minimum(hi, xb)
        ret = inbase & (rhi - rlo > sliver)
        if np.any(ret):
            ri = np.nonzero(ret)[0]
            ends = pullback(f, itin[ri], np.stack([rlo[ri], rhi[ri]], axis=1))
            for j, r in enumerate(ri):
                a_, b_ = sorted(ends[j])
                full = rlo[r] <= xa + 1e-9 and rhi[r] >= xb - 1e-9
                branches.append(
                    InducedBranch(
                        float(a_), float(b_), t, tuple(int(v) for v in itin[r]), tuple(int(v) for v in dseq[r]),
                        (float(rlo[r]), float(rhi[r])), bool(full),
                    )
                )
        # base slivers too small to count as a return are dropped
        small = inbase & ~ret & (rhi - rlo > 0)
        if np.any(small):
            si = np.nonzero(small)[0]
            e = pullback(f, itin[si], np.stack([rlo[si], rhi[si]], axis=1))
            lost += float(np.abs(e[:, 1] - e[:, 0]).sum())
        # what keeps moving: the whole image off the base, the parts left and right of X on it
        left = inbase & (np.minimum(hi, xa) > lo)
        right = inbase & (hi > np.maximum(lo, xb))
        krow = np.concatenate([np.nonzero(~inbase)[0], np.nonzero(left)[0], np.nonzero(right)[0]])
        lo, hi = (
            np.concatenate([lo[~inbase], lo[left], np.maximum(lo, xb)[right]]),
            np.concatenate([hi[~inbase], np.minimum(hi, xa)[left], hi[right]]),
        )
        itin, dseq, dom, da, db = itin[krow], dseq[krow], dom[krow], da[krow], db[krow]
        # drop pieces that are too thin in x
        if lo.size:
            ends = pullback(f, itin, np.stack([lo, hi], axis=1))
            w = np.abs(ends[:, 1] - ends[:, 0])
            thin = (w < width_floor) | (hi - lo <= sliver)
            if np.any(thin):
                lost += float(w[thin].sum())
                keep = ~thin
                lo, hi, itin, dseq, dom, da, db = lo[keep], hi[keep], itin[keep], dseq[keep], dom[keep], da[keep], db[keep]
    unreturned = 0.0
    if lo.size:
        ends = pullback(f, itin, np.stack([lo, hi], axis=1))
        unreturned = float(np.abs(ends[:, 1] - ends[:, 0]).sum())
    return branches, lost, unreturned


def build_scheme_type_a(
    tower: TowerGraph,
    domain: int,
    xhat: tuple[float, float],
    tau_cap: int = 30,
    *,
    strict: bool = False,
    check_cylinder: bool = True,
    coverage_floor: float = 0.9,
    width_floor: float = 1e-15,
    sliver: float = 1e-13,
) -> InducingScheme:
    """First return to X̂ = xhat inside a single tower domain.

    With ``strict`` a base touching the boundary of its domain (δ = 0) is rejected;
    otherwise it is accepted and flagged ``compact=False``.
    """
    D = tower.domains[domain]
    a, b = float(xhat[0]), float(xhat[1])
    if not (D.a - 1e-12 <= a < b <= D.b + 1e-12):
        raise PreconditionError(f"X̂=[{a}, {b}] is not inside domain {domain} = [{D.a}, {D.b}]")
    delta = min(a - D.a, D.b - b)
    compact = delta > 1e-12
    notes = []
    if not compact:
        if strict:
            raise PreconditionError(f"X̂ touches the boundary of domain {domain} (δ = 0)")
        notes.append("base touches its domain boundary (δ = 0)")
    if check_cylinder and is_cylinder(tower.f, a, b) is None:
        raise PreconditionError(f"X=[{a}, {b}] is not a cylinder of P_n for n <= 14")
    branches, lost, unret = _explore(tower, (a, b), {domain}, domain, tau_cap, width_floor, sliver)
    scheme = InducingScheme(tower.f, (a, b), (domain,), "A", branches, tau_cap, delta, compact, lost, unret, None, notes)
    _coverage_warning(scheme, coverage_floor)
    return scheme


def xprime_of(X, delta: float) -> tuple[float, float]:
    a, b = X
    w = b - a
    return max(0.0, a - delta * w), min(1.0, b + delta * w)


def build_scheme_type_b(
    tower: TowerGraph,
    X: tuple[float, float],
    delta: float,
    tau_cap: int = 30,
    *,
    check_cylinder: bool = True,
    coverage_floor: float = 0.9,
    width_floor: float = 1e-15,
    sliver: float = 1e-13,
    n_check: int = 200,
    seed: int = 0,
) -> InducingScheme:
    """First return to X̂ = ⊔{D ∩ π^{-1}(X) : D in the transitive part, π(D) ⊃ X′}."""
    if delta <= 0:
        raise PreconditionError("δ must be positive")
    a, b = float(X[0]), float(X[1])
    if check_cylinder and is_cylinder(tower.f, a, b) is None:
        raise PreconditionError(f"X=[{a}, {b}] is not a cylinder of P_n for n <= 14")
    xp = xprime_of((a, b), delta)
    tp = transitive_part(tower)
    base = [d for d in tp.ids if tower.domains[d].a <= xp[0] + 1e-12 and tower.domains[d].b >= xp[1] - 1e-12]
    if not base:
        raise EmptySchemeError(f"no domain of the transitive part covers X′=[{xp[0]:.6g}, {xp[1]:.6g}]")
    base_set = set(base)
    # explore from the lowest lift; τ must not depend on the lift, checked by sampling below
    branches, lost, unret = _explore(tower, (a, b), base_set, base[0], tau_cap, width_floor, sliver)
    notes = [f"base domains {base}"]
    if len(base) > 1:
        mism = lift_independence(tower, (a, b), base, tau_cap, n_check, seed)
        notes.append(f"lift independence: {mism} mismatches on {n_check} samples")
        if mism:
            warnings.warn(notes[-1], stacklevel=2)
    scheme = InducingScheme(tower.f, (a, b), tuple(base), "B", branches, tau_cap, delta, True, lost, unret, xp, notes)
    _coverage_warning(scheme, coverage_floor)
    return scheme


def first_return_time(tower: TowerGraph, x: float, start: int, base: set[int], X, cap: int) -> int | None:
    """First t >= 1 with f̂^t(x, D_start) in X̂, by direct simulation of the lifted orbit."""
    f = tower.f
    junc = f.junctions
    d = start
    a, b = tower.domains[start].interval
    for t in range(1, cap + 1):
        k = int(np.searchsorted(junc, x, side="left"))
        if d >= 0:
            e = tower.edge_for(d, x)
            (a, b), nd = e.image, e.dst
        else:
            nd = -1
        if nd < 0:
            lo = max(a, junc[k - 1]) if k > 0 else a
            hi = min(b, junc[k]) if k < len(junc) else b
            y0, y1 = float(f.branches[k].value(lo)), float(f.branches[k].value(hi))
            a, b = max(0.0, min(y0, y1)), min(1.0, max(y0, y1))
            nd = tower.find(a, b)
        d = nd
        x = float(f(x))
        if d in base and X[0] <= x <= X[1]:
            return t
    return None


def lift_independence(tower: TowerGraph, X, base, cap: int, n: int = 200, seed: int = 0) -> int:
    """Number of sampled x in X whose first-return time differs between lifts."""
    rng = np.random.default_rng(seed)
    xs = rng.uniform(X[0], X[1], n)
    bset = set(base)
    mism = 0
    for x in xs:
        times = {first_return_time(tower, float(x), d, bset, X, cap) for d in base}
        mism += len(times) > 1
    return mism


def _coverage_warning(scheme: InducingScheme, floor: float):
    if scheme.coverage < floor:
        msg = f"coverage {scheme.coverage:.4f} below {floor} after τ_cap={scheme.tau_cap}"
        scheme.notes.append(msg)
        warnings.warn(msg, stacklevel=3)
    if scheme.n_partial:
        scheme.notes.append(f"{scheme.n_partial} partial return(s) (image not all of X)")


# branch data ------------------------------------------------------------


def branch_samples(scheme: InducingScheme, m: int):
    """Interior Chebyshev points of each branch image, pulled back: dict τ -> (branch ids, orbit (τ, N, m))."""
    nodes = 0.5 * (np.polynomial.chebyshev.chebpts1(m) + 1.0)
    groups: dict[int, list[int]] = {}
    for i, br in enumerate(scheme.branches):
        groups.setdefault(br.tau, []).append(i)
    out = {}
    for tau, ids in groups.items():
        brs = [scheme.branches[i] for i in ids]
        lo = np.array([br.image[0] for br in brs])
        hi = np.array([br.image[1] for br in brs])
        y = lo[:, None] + (hi - lo)[:, None] * nodes[None, :]
        itin = np.array([br.itinerary for br in brs], dtype=np.int16)
        _, orb = pullback(scheme.f, itin, y, keep_orbit=True)
        out[tau] = (np.array(ids), orb)
    return out


@dataclass
class InducedPotential:
    sup: np.ndarray
    inf: np.ndarray
    mean: np.ndarray  # average over the sample points
    singular: np.ndarray  # bool, a sample orbit met a critical point
    log_df_sup: np.ndarray | None = None
    log_df_inf: np.ndarray | None = None
    n_samples: int = 0


def _induced_values(scheme: InducingScheme, phi, m: int):
    n = len(scheme)
    vals = np.empty((n, m))
    ldf = np.empty((n, m))
    sing = np.zeros(n, dtype=bool)
    f = scheme.f
    for tau, (ids, orb) in branch_samples(scheme, m).items():
        with np.errstate(divide="ignore"):
            d = np.log(np.abs(f.slope(orb)))
        ldf[ids] = d.sum(axis=0)
        sing[ids] = np.any(np.isneginf(d), axis=(0, 2))
        if phi is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                vals[ids] = np.asarray(phi(f, orb)).sum(axis=0)
    return vals, ldf, sing


def induced_potential(scheme: InducingScheme, phi: Potential, tol: float = 1e-8, m0: int = 33, m_max: int = 1025):
    """Sup/inf of Φ = S_τ φ on every branch, sampled at interior Chebyshev points.

    The sample count doubles until sup and inf move by less than ``tol``.
    """
    if not scheme.branches:
        raise EmptySchemeError("scheme has no branches")
    key = ("phi", id(phi), tol)
    if key in scheme._cache:
        return scheme._cache[key]
    m = m0
    vals, ldf, sing = _induced_values(scheme, phi, m)
    while m < m_max:
        m2 = 2 * m - 1
        v2, l2, s2 = _induced_values(scheme, phi, m2)
        fin = np.isfinite(vals).all(1) & np.isfinite(v2).all(1)
        change = max(
            np.max(np.abs(v2.max(1) - vals.max(1))[fin], initial=0.0),
            np.max(np.abs(v2.min(1) - vals.min(1))[fin], initial=0.0),
        )
        vals, ldf, sing, m = v2, l2, s2, m2
        if change < tol:
            break
    res = InducedPotential(vals.max(1), vals.min(1), vals.mean(1), sing, ldf.max(1), ldf.min(1), m)
    scheme._cache[key] = res
    return res


def log_df_mean_value(scheme: InducingScheme) -> np.ndarray:
    """log(|F(X_i)| / |X_i|): the value of log|DF| at some point of each branch."""
    img = np.array([br.image[1] - br.image[0] for br in scheme.branches])
    return np.log(img / scheme.widths)


def distortion_bound(scheme: InducingScheme, m: int = 65) -> tuple[float, int]:
    """Max over branches of sup DF / inf DF on sampled points; returns (K, branch index)."""
    if not scheme.branches:
        raise EmptySchemeError("scheme has no branches")
    _, ldf, sing = _induced_values(scheme, None, m)
    spread = ldf.max(1) - ldf.min(1)
    spread[sing | ~np.isfinite(spread)] = np.inf
    i = int(np.argmax(spread))
    return float(np.exp(spread[i])), i


@dataclass
class SchemeTrace:
    branches: list[int]
    points: list[float]
    exit: str  # "completed", "undiscovered" or "escaped"


def orbit_in_scheme(scheme: InducingScheme, x: float, k: int) -> SchemeTrace:
    xs = [float(x)]
    idx = []
    a, b = scheme.X
    for _ in range(k):
        if not a - 1e-12 <= x <= b + 1e-12:
            return SchemeTrace(idx, xs, "escaped")
        i = scheme.locate(x)
        if i < 0:
            return SchemeTrace(idx, xs, "undiscovered")
        br = scheme.branches[i]
        x = float(np.clip(iterate_on(scheme.f, br.itinerary, x), 0.0, 1.0))
        idx.append(i)
        xs.append(x)
    if not a - 1e-12 <= x <= b + 1e-12:
        return SchemeTrace(idx, xs, "escaped")
    return SchemeTrace(idx, xs, "completed")


@dataclass
class ReturnTail:
    taus: np.ndarray
    counts: np.ndarray
    mass: np.ndarray
    slope: float | None
    intercept: float | None


def return_time_tail(scheme: InducingScheme, weights=None, fit_from: int = 1) -> ReturnTail:
    """Histogram of {τ = n}: branch counts and mass, with a log-linear fit of the mass.

    weights defaults to normalised Lebesgue measure on X; otherwise an array of branch
    masses (e.g. Gibbs weights) is used as given.
    """
    if not scheme.branches:
        raise EmptySchemeError("scheme has no branches")
    taus = scheme.taus
    w = scheme.widths / scheme.x_width if weights is None else np.asarray(weights, dtype=float)
    ns = np.unique(taus)
    counts = np.array([np.sum(taus == n) for n in ns])
    mass = np.array([w[taus == n].sum() for n in ns])
    slope = icpt = None
    sel = (ns >= fit_from) & (mass > 0)
    if sel.sum() >= 3:
        slope, icpt = (float(v) for v in np.polyfit(ns[sel], np.log(mass[sel]), 1))
    return ReturnTail(ns, counts, mass, slope, icpt)
