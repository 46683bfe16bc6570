"""Piecewise-monotone interval maps, potentials and global diagnostics.

A map is stored as an ordered tuple of branches. Each branch is a polynomial
(ascending coefficients) restricted to a subinterval of [0, 1] on which it is
strictly monotone. Everything is vectorised over numpy arrays; scalar inputs
give scalar outputs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

SMOOTH_FAMILIES = ("quadratic", "cubic", "custom_smooth")
CONTINUOUS_FAMILIES = ("tent", "quadratic", "cubic", "piecewise_linear")


class DomainError(ValueError):
    """Point outside [0, 1]."""


class JunctionError(ValueError):
    """Derivative requested at a junction where the one-sided values differ."""

    def __init__(self, x, left, right):
        super().__init__(f"Df undefined at junction x={x}: left={left}, right={right}")
        self.x = x
        self.left = left
        self.right = right


class MapValidationError(ValueError):
    pass


@dataclass(frozen=True)
class Branch:
    a: float
    b: float
    coef: tuple[float, ...]

    @property
    def degree(self) -> int:
        return len(self.coef) - 1

    def value(self, x):
        return np.polynomial.polynomial.polyval(x, self.coef)

    def slope(self, x):
        return np.polynomial.polynomial.polyval(x, np.polynomial.polynomial.polyder(self.coef))

    @property
    def orientation(self) -> int:
        return 1 if self.value(self.b) > self.value(self.a) else -1

    @property
    def image(self) -> tuple[float, float]:
        ya, yb = float(self.value(self.a)), float(self.value(self.b))
        return (min(ya, yb), max(ya, yb))

    def inverse(self, y):
        """Monotone inverse on [a, b]; closed form up to degree 2, bisection otherwise."""
        y = np.asarray(y, dtype=float)
        c = self.coef
        if self.degree == 1:
            x = (y - c[0]) / c[1]
        elif self.degree == 2 and c[2] != 0.0:
            x = _quadratic_root_in(c[2], c[1], c[0] - y, self.a, self.b)
        else:
            x = self._bisect_inverse(y)
        return np.clip(x, self.a, self.b)

    def _bisect_inverse(self, y):
        lo = np.full(y.shape, self.a)
        hi = np.full(y.shape, self.b)
        s = self.orientation
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            below = s * (self.value(mid) - y) < 0
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)


def _quadratic_root_in(c2, c1, c0, a, b):
    # roots of c2 x^2 + c1 x + c0 (c0 may be an array); the stable pair q/c2, c0/q
    disc = np.maximum(c1 * c1 - 4.0 * c2 * c0, 0.0)
    sq = np.sqrt(disc)
    q = -0.5 * (c1 + np.copysign(sq, c1 if c1 != 0 else 1.0))
    r1 = q / c2
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(q != 0, c0 / np.where(q != 0, q, 1.0), r1)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    d1 = np.maximum(np.abs(r1 - mid) - half, 0.0)
    d2 = np.maximum(np.abs(r2 - mid) - half, 0.0)
    return np.where(d1 <= d2, r1, r2)


@dataclass(frozen=True)
class IntervalMap:
    """Piecewise-monotone map of [0, 1] given by polynomial branches."""

    branches: tuple[Branch, ...]
    family_tag: str = "custom"
    params: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        self.validate()
        coefs = [b.coef for b in self.branches]
        width = max(len(c) for c in coefs)
        mat = np.zeros((len(coefs), width))
        for i, c in enumerate(coefs):
            mat[i, : len(c)] = c
        dmat = np.zeros_like(mat)
        dmat[:, :-1] = mat[:, 1:] * np.arange(1, width)
        object.__setattr__(self, "_coef", mat)
        object.__setattr__(self, "_dcoef", dmat)
        object.__setattr__(self, "_inner", np.array([b.b for b in self.branches[:-1]]))

    # construction checks
    def validate(self):
        br = self.branches
        if not br:
            raise MapValidationError("map needs at least one branch")
        if abs(br[0].a) > 1e-12 or abs(br[-1].b - 1.0) > 1e-12:
            raise MapValidationError("branches must cover [0, 1]")
        for left, right in zip(br, br[1:]):
            if abs(left.b - right.a) > 1e-12:
                raise MapValidationError(f"gap or overlap between {left.b} and {right.a}")
        for k, b in enumerate(br):
            if not b.b > b.a:
                raise MapValidationError(f"branch {k} has empty interval")
            xs = np.linspace(b.a, b.b, 65)[1:-1]
            d = b.slope(xs)
            if not (np.all(d > 0) or np.all(d < 0)):
                raise MapValidationError(f"branch {k} is not strictly monotone on its interior")
            lo, hi = b.image
            if lo < -1e-9 or hi > 1 + 1e-9:
                raise MapValidationError(f"branch {k} leaves [0, 1]: image [{lo}, {hi}]")
        if self.family_tag in CONTINUOUS_FAMILIES:
            for left, right in zip(br, br[1:]):
                if abs(left.value(left.b) - right.value(right.a)) > 1e-9:
                    raise MapValidationError(f"{self.family_tag} map must be continuous at {left.b}")

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    @property
    def junctions(self) -> np.ndarray:
        """Interior branch boundaries; every one of them cuts the cylinder partitions."""
        return self._inner.copy()

    @property
    def is_smooth(self) -> bool:
        if self.family_tag in SMOOTH_FAMILIES:
            return True
        if self.family_tag in ("tent", "piecewise_linear"):
            return False
        for left, right in zip(self.branches, self.branches[1:]):
            if abs(left.slope(left.b) - right.slope(right.a)) > 1e-9:
                return False
            if abs(left.value(left.b) - right.value(right.a)) > 1e-9:
                return False
        return True

    def param(self, name, default=None):
        return dict(self.params).get(name, default)

    def branch_index(self, x):
        return np.searchsorted(self._inner, x, side="right")

    def _check_domain(self, x):
        if np.any((x < 0.0) | (x > 1.0)) or np.any(np.isnan(x)):
            raise DomainError(f"point(s) outside [0, 1]: {x}")

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        self._check_domain(xa)
        y = self.apply_branch(self.branch_index(xa), xa)
        y = np.clip(y, 0.0, 1.0)
        return float(y) if np.ndim(x) == 0 else y

    def apply_branch(self, idx, x):
        c = self._coef[idx]
        y = c[..., -1]
        for j in range(self._coef.shape[1] - 2, -1, -1):
            y = y * x + c[..., j]
        return y

    def slope(self, x):
        """Df evaluated on the branch picked by the right-continuous convention (no junction checks)."""
        xa = np.asarray(x, dtype=float)
        c = self._dcoef[self.branch_index(xa)]
        y = c[..., -1]
        for j in range(self._dcoef.shape[1] - 2, -1, -1):
            y = y * xa + c[..., j]
        return float(y) if np.ndim(x) == 0 else y

    def derivative(self, x: float) -> float:
        """Df(x) at a single point; raises JunctionError where one-sided derivatives disagree."""
        x = float(x)
        self._check_domain(np.asarray(x))
        for k, (left, right) in enumerate(zip(self.branches, self.branches[1:])):
            if x == left.b:
                dl, dr = float(left.slope(x)), float(right.slope(x))
                if abs(dl - dr) > 1e-9 * max(1.0, abs(dl), abs(dr)):
                    raise JunctionError(x, dl, dr)
                return dl
        return float(self.slope(x))

    def inverse_branch(self, k: int, y):
        return self.branches[k].inverse(y)

    def iterate(self, x, n: int):
        for _ in range(n):
            x = self(x)
        return x

    def orbit(self, x: float, n: int) -> np.ndarray:
        out = np.empty(n + 1)
        out[0] = x
        for j in range(n):
            out[j + 1] = self(out[j])
        return out

    def to_json(self) -> dict:
        if self.family_tag in ("tent", "quadratic", "cubic", "piecewise_linear") and self.params:
            d = {"family": self.family_tag}
            d.update({k: v for k, v in self.params})
            return d
        return {"branches": [{"interval": [b.a, b.b], "poly": list(b.coef)} for b in self.branches]}


# families ---------------------------------------------------------------


def tent(s: float = 1.0) -> IntervalMap:
    """Tent map with peak value s: x -> 2 s min(x, 1 - x)."""
    if not 0 < s <= 1:
        raise MapValidationError("tent height must lie in (0, 1]")
    br = (Branch(0.0, 0.5, (0.0, 2.0 * s)), Branch(0.5, 1.0, (2.0 * s, -2.0 * s)))
    return IntervalMap(br, "tent", (("s", s),))


def quadratic(lam: float) -> IntervalMap:
    """Logistic family x -> lam x (1 - x), split at the critical point 1/2."""
    if not 0 < lam <= 4:
        raise MapValidationError("quadratic parameter must lie in (0, 4]")
    c = (0.0, lam, -lam)
    return IntervalMap((Branch(0.0, 0.5, c), Branch(0.5, 1.0, c)), "quadratic", (("lambda", lam),))


def bimodal_cubic(kappa: float) -> IntervalMap:
    """Odd cubic y -> kappa y^3 + (1 - kappa) y on [-1, 1], conjugated to [0, 1].

    Two quadratic critical points at x = (1 -+ c)/2 with c^2 = (kappa - 1)/(3 kappa);
    full two-hump map at kappa = 4.
    """
    if not 1 < kappa <= 4:
        raise MapValidationError("cubic parameter must lie in (1, 4]")
    # f(x) = (g(2x - 1) + 1) / 2 expanded in powers of x
    k = kappa
    p = np.polynomial.Polynomial([-1.0, 2.0])
    g = k * p**3 + (1 - k) * p
    fcoef = tuple(float(v) for v in ((g + 1) / 2).coef)
    cc = math.sqrt((k - 1) / (3 * k))
    c1, c2 = (1 - cc) / 2, (1 + cc) / 2
    br = (Branch(0.0, c1, fcoef), Branch(c1, c2, fcoef), Branch(c2, 1.0, fcoef))
    return IntervalMap(br, "cubic", (("kappa", kappa),))


def markov_pl(slopes: Sequence[float]) -> IntervalMap:
    """Full-branched continuous piecewise-linear map with the given slopes (1/s_i summing to 1)."""
    slopes = [float(s) for s in slopes]
    if abs(sum(1.0 / s for s in slopes) - 1.0) > 1e-12:
        raise MapValidationError("reciprocal slopes must sum to 1 for a full-branched map")
    br = []
    a = 0.0
    for k, s in enumerate(slopes):
        b = 1.0 if k == len(slopes) - 1 else a + 1.0 / s
        if k % 2 == 0:
            coef = (-s * a, s)
        else:
            coef = (1.0 + s * a, -s)
        br.append(Branch(a, b, coef))
        a = b
    return IntervalMap(tuple(br), "piecewise_linear", tuple((f"s{k}", s) for k, s in enumerate(slopes)))


def from_branches(spec: Sequence[dict], smooth: bool | None = None) -> IntervalMap:
    br = tuple(Branch(float(d["interval"][0]), float(d["interval"][1]), tuple(float(c) for c in d["poly"])) for d in spec)
    tag = "custom"
    m = IntervalMap(br, tag)
    if smooth if smooth is not None else m.is_smooth:
        m = IntervalMap(br, "custom_smooth")
    return m


def map_from_config(cfg: dict) -> IntervalMap:
    """Build a map from a JSON-style dict such as {"family": "quadratic", "lambda": 3.9}."""
    if "branches" in cfg:
        return from_branches(cfg["branches"], cfg.get("smooth"))
    fam = cfg.get("family")
    if fam == "tent":
        return tent(float(cfg.get("s", 1.0)))
    if fam == "quadratic":
        return quadratic(float(cfg["lambda"]))
    if fam == "cubic":
        return bimodal_cubic(float(cfg["kappa"]))
    if fam in ("piecewise_linear", "markov_pl"):
        return markov_pl(cfg["slopes"])
    raise MapValidationError(f"unknown map family {fam!r}")


# potentials -------------------------------------------------------------

POTENTIAL_KINDS = ("holder_function", "geometric", "constant", "combination")


@dataclass(frozen=True)
class Potential:
    """A potential on [0, 1].

    kind is one of
      * ``holder_function`` -- a vectorised callable plus a recorded Hölder/Lipschitz constant,
      * ``geometric`` -- ``-t log|Df|``,
      * ``constant`` -- the constant ``a``,
      * ``combination`` -- ``-t log|Df| + q * base``.

    ``normalization_shift`` is subtracted from every evaluation.
    """

    kind: str
    t: float = 0.0
    q: float = 0.0
    a: float = 0.0
    func: Callable | None = field(default=None, compare=False)
    base: "Potential | None" = None
    holder_constant: float | None = None
    descriptor: tuple = ()
    normalization_shift: float = 0.0

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "holder_function" and self.func is None:
            raise ValueError("holder_function potential needs a callable")
        if self.kind == "combination" and self.base is None:
            raise ValueError("combination potential needs a base potential")

    # constructors
    @classmethod
    def constant(cls, a: float) -> "Potential":
        return cls("constant", a=float(a), descriptor=(("kind", "constant"), ("a", float(a))))

    @classmethod
    def geometric(cls, t: float = 1.0) -> "Potential":
        return cls("geometric", t=float(t), descriptor=(("kind", "geometric"), ("t", float(t))))

    @classmethod
    def function(cls, func: Callable, holder_constant: float | None = None, descriptor=()) -> "Potential":
        return cls("holder_function", func=func, holder_constant=holder_constant, descriptor=tuple(descriptor))

    @classmethod
    def piecewise_constant(cls, breaks: Sequence[float], values: Sequence[float]) -> "Potential":
        """Value values[k] on [breaks[k-1], breaks[k]) with implicit outer breaks 0 and 1."""
        br = np.asarray(breaks, dtype=float)
        vals = np.asarray(values, dtype=float)
        if len(vals) != len(br) + 1:
            raise ValueError("need one more value than breakpoints")

        def func(x):
            return vals[np.searchsorted(br, x, side="right")]

        desc = (("kind", "piecewise_constant"), ("breaks", tuple(br)), ("values", tuple(vals)))
        return cls("holder_function", func=func, holder_constant=0.0, descriptor=desc)

    @classmethod
    def bernoulli(cls, p: float, split: float = 0.5) -> "Potential":
        """log p left of the split, log(1 - p) to the right."""
        pot = cls.piecewise_constant([split], [math.log(p), math.log(1.0 - p)])
        return replace(pot, descriptor=(("kind", "bernoulli"), ("p", float(p)), ("split", float(split))))

    @classmethod
    def polynomial(cls, coef: Sequence[float]) -> "Potential":
        c = tuple(float(v) for v in coef)
        dc = np.polynomial.polynomial.polyder(c)
        xs = np.linspace(0, 1, 2049)
        lip = float(np.max(np.abs(np.polynomial.polynomial.polyval(xs, dc)))) if len(c) > 1 else 0.0
        return cls.function(lambda x: np.polynomial.polynomial.polyval(x, c), lip, (("kind", "polynomial"), ("coef", c)))

    @classmethod
    def cosine(cls, amplitude: float, frequency: float = 1.0, phase: float = 0.0) -> "Potential":
        A, w, ph = float(amplitude), float(frequency), float(phase)
        return cls.function(
            lambda x: A * np.cos(2 * np.pi * w * np.asarray(x) + ph),
            abs(A) * 2 * np.pi * abs(w),
            (("kind", "cosine"), ("amplitude", A), ("frequency", w), ("phase", ph)),
        )

    @classmethod
    def combination(cls, t: float, q: float, base: "Potential") -> "Potential":
        return cls("combination", t=float(t), q=float(q), base=base)

    def shifted(self, shift: float) -> "Potential":
        return replace(self, normalization_shift=self.normalization_shift + float(shift))

    @property
    def geometric_weight(self) -> float:
        """Coefficient t of -log|Df| in this potential."""
        return self.t if self.kind in ("geometric", "combination") else 0.0

    @property
    def is_singular(self) -> bool:
        return self.geometric_weight != 0.0

    def smooth_part(self) -> "Potential | None":
        """The non-geometric part (q * base for combinations), with the shift folded in."""
        if self.kind == "geometric":
            return Potential.constant(-self.normalization_shift) if self.normalization_shift else None
        if self.kind == "combination":
            return _Scaled(self.q, self.base, self.normalization_shift)
        return self

    def __call__(self, f: IntervalMap, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            v = np.full(x.shape, self.a)
        elif self.kind == "holder_function":
            v = np.asarray(self.func(x), dtype=float) * np.ones(x.shape)
        elif self.kind == "geometric":
            with np.errstate(divide="ignore"):
                v = -self.t * np.log(np.abs(f.slope(x)))
        else:
            with np.errstate(divide="ignore"):
                v = -self.t * np.log(np.abs(f.slope(x))) + self.q * self.base(f, x)
        v = v - self.normalization_shift
        return float(v) if v.ndim == 0 else v

    def to_json(self) -> dict:
        if self.kind == "combination":
            d = {"kind": "combination", "t": self.t, "q": self.q, "base": self.base.to_json()}
        elif self.descriptor:
            d = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.descriptor}
        else:
            d = {"kind": self.kind}
        if self.normalization_shift:
            d["normalization_shift"] = self.normalization_shift
        return d


class _Scaled:
    # q * base - shift, callable like a Potential; used internally by smooth_part()
    def __init__(self, q, base, shift):
        self.q, self.base, self.shift = q, base, shift

    def __call__(self, f, x):
        return self.q * np.asarray(self.base(f, x)) - self.shift


def potential_from_config(cfg: dict) -> Potential:
    kind = cfg.get("kind", "constant")
    if kind == "constant":
        pot = Potential.constant(cfg.get("a", 0.0))
    elif kind == "geometric":
        pot = Potential.geometric(cfg.get("t", 1.0))
    elif kind == "bernoulli":
        pot = Potential.bernoulli(cfg["p"], cfg.get("split", 0.5))
    elif kind in ("piecewise_constant", "tabulated"):
        pot = Potential.piecewise_constant(cfg["breaks"], cfg["values"])
    elif kind == "polynomial":
        pot = Potential.polynomial(cfg["coef"])
    elif kind == "cosine":
        pot = Potential.cosine(cfg["amplitude"], cfg.get("frequency", 1.0), cfg.get("phase", 0.0))
    elif kind == "combination":
        pot = Potential.combination(cfg["t"], cfg["q"], potential_from_config(cfg["base"]))
    else:
        raise ValueError(f"unknown potential kind {kind!r}")
    shift = cfg.get("normalization_shift", 0.0)
    return pot.shifted(shift) if shift else pot


# critical points --------------------------------------------------------


@dataclass(frozen=True)
class CriticalPoint:
    c: float
    order: float
    left_coeff: float
    right_coeff: float


def _sign_changes(f: IntervalMap, n_grid: int = 4097) -> list[float]:
    grid = np.union1d(np.linspace(0.0, 1.0, n_grid), f.junctions)
    g = f.slope(grid)
    out = []
    for k in range(1, len(grid) - 1):
        if g[k] == 0.0 and g[k - 1] * g[k + 1] < 0:
            out.append(float(grid[k]))
    for k in range(len(grid) - 1):
        if g[k] * g[k + 1] < 0:
            # at a junction the right-continuous slope flips exactly on the grid point
            if grid[k + 1] in f.junctions and f.branches[f.branch_index(grid[k])].orientation != f.branches[
                f.branch_index(grid[k + 1])
            ].orientation:
                out.append(float(grid[k + 1]))
                continue
            left = f.branches[f.branch_index(grid[k])]
            out.append(float(optimize.bisect(lambda x: float(left.slope(x)), grid[k], grid[k + 1], xtol=1e-12)))
    return sorted(set(out))


def turning_points(f: IntervalMap) -> list[float]:
    """All interior points where f changes monotonicity (smooth or not)."""
    pts = set()
    for left, right in zip(f.branches, f.branches[1:]):
        if left.orientation != right.orientation:
            pts.add(left.b)
    for x in _sign_changes(f):
        if all(abs(x - p) > 1e-9 for p in pts):
            pts.add(x)
    return sorted(pts)


def critical_points(f: IntervalMap) -> list[CriticalPoint]:
    """Interior zeros of Df with fitted critical orders.

    Non-smooth maps return an empty list; their turning points are reported by
    :func:`turning_points` and a warning is emitted.
    """
    if not f.is_smooth:
        tp = turning_points(f)
        if tp:
            warnings.warn(f"non-smooth map: turning points {tp} are not critical points", stacklevel=2)
        return []
    out = []
    for c in _sign_changes(f):
        k = f.branch_index(c)
        left = f.branches[max(k - 1, 0)] if c == f.branches[k].a and k > 0 else f.branches[k]
        right = f.branches[k]
        dl, dr = float(left.slope(c)), float(right.slope(c))
        if max(abs(dl), abs(dr)) > 1e-6:
            continue
        order, cl, cr = _fit_order(f, c)
        out.append(CriticalPoint(c, order, cl, cr))
    return out


def _fit_order(f: IntervalMap, c: float) -> tuple[float, float, float]:
    # |f(x) - f(c)| ~ A |x - c|^l over dyadic offsets, both sides pooled
    h = 2.0 ** -np.arange(4, 15)
    fc = f(c)
    logs_h, logs_v, coeffs = [], [], []
    for side in (-1.0, 1.0):
        x = c + side * h
        ok = (x > 0) & (x < 1)
        dv = np.abs(f(x[ok]) - fc)
        good = dv > 0
        lh, lv = np.log(h[ok][good]), np.log(dv[good])
        logs_h.append(lh)
        logs_v.append(lv)
        if len(lh) >= 2:
            slope, icpt = np.polyfit(lh, lv, 1)
            coeffs.append(math.exp(icpt))
        else:
            coeffs.append(float("nan"))
    slope, _ = np.polyfit(np.concatenate(logs_h), np.concatenate(logs_v), 1)
    return float(slope), coeffs[0], coeffs[1]


def schwarzian_sign(f: IntervalMap, n_grid: int = 2001) -> tuple[float, float]:
    """Sampled (min, max) of the Schwarzian derivative away from critical and junction points."""
    xs = np.linspace(0, 1, n_grid)[1:-1]
    out = []
    for k, b in enumerate(f.branches):
        sel = xs[(xs > b.a) & (xs < b.b)]
        d1 = b.slope(sel)
        keep = np.abs(d1) > 1e-3
        sel, d1 = sel[keep], d1[keep]
        c = np.polynomial.polynomial
        d2 = c.polyval(sel, c.polyder(b.coef, 2)) if b.degree >= 2 else np.zeros_like(sel)
        d3 = c.polyval(sel, c.polyder(b.coef, 3)) if b.degree >= 3 else np.zeros_like(sel)
        out.append(d3 / d1 - 1.5 * (d2 / d1) ** 2)
    s = np.concatenate(out) if out else np.zeros(1)
    return float(s.min()), float(s.max())


# laps and entropy -------------------------------------------------------


@dataclass
class EntropyEstimate:
    value: float
    laps: list[int]
    upper_bounds: list[float]
    warnings: list[str] = field(default_factory=list)


def lap_counts(f: IntervalMap, n_max: int, cap: int = 4_000_000) -> tuple[list[int], bool]:
    """Lap numbers of f^n for n = 1..n_max by pulling back the junction set.

    The turning points of f^n are the points whose orbit hits a junction within n - 1
    steps. Returns (laps, overflowed).
    """
    junc = f.junctions
    level = junc.copy()
    found = [junc]
    laps = [1 + len(np.unique(np.round(junc, 13)))]
    images = [b.image for b in f.branches]
    for _ in range(2, n_max + 1):
        pre = []
        for k, (lo, hi) in enumerate(images):
            y = level[(level >= lo) & (level <= hi)]
            if y.size:
                pre.append(f.inverse_branch(k, y))
        level = np.concatenate(pre) if pre else np.empty(0)
        level = level[(level > 0.0) & (level < 1.0)]
        found.append(level)
        allpts = np.unique(np.round(np.concatenate(found), 13))
        if allpts.size > cap:
            return laps, True
        laps.append(1 + allpts.size)
        if level.size == 0:
            laps.extend([laps[-1]] * (n_max - len(laps)))
            break
    return laps, False


def estimate_topological_entropy(f: IntervalMap, n_max: int = 12) -> EntropyEstimate:
    """Growth rate of lap numbers, log #P_n / n, fitted over the upper half of the depths."""
    if n_max < 4:
        raise ValueError("n_max must be at least 4")
    laps, overflow = lap_counts(f, n_max)
    notes = []
    if overflow:
        notes.append(f"lap count overflow: fit uses depths 1..{len(laps)}")
        warnings.warn(notes[-1], stacklevel=2)
    n = np.arange(1, len(laps) + 1)
    logs = np.log(np.asarray(laps, dtype=float))
    upper = (logs / n).tolist()
    lo = max(0, len(laps) // 2 - 1)
    if len(laps) - lo >= 2:
        slope = float(np.polyfit(n[lo:], logs[lo:], 1)[0])
    else:
        slope = upper[-1]
    value = max(0.0, min(slope, min(upper)))
    cycles = attracting_cycles(f)
    if cycles:
        notes.append(f"not class F: attracting or neutral cycle(s) {cycles[:3]}")
        warnings.warn(notes[-1], stacklevel=2)
    return EntropyEstimate(value, list(laps), upper, notes)


def attracting_cycles(f: IntervalMap, max_period: int = 8, n_grid: int = 20001, tol: float = 1e-6):
    """Periodic orbits with |multiplier| <= 1 + tol found by scanning roots of f^p(x) - x."""
    xs = np.linspace(0.0, 1.0, n_grid)
    found = []
    for p in range(1, max_period + 1):
        g = f.iterate(xs, p) - xs
        idx = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0)[0]
        for k in idx:
            a, b = xs[k], xs[k + 1]
            ga, gb = g[k], g[k + 1]
            if ga == 0:
                x = a
            elif gb == 0:
                x = b
            else:
                x = optimize.brentq(lambda u: f.iterate(u, p) - u, a, b, xtol=1e-14)
            orb = f.orbit(x, p - 1)
            m = float(np.prod(f.slope(orb)))
            if abs(m) <= 1 + tol and not any(abs(x - y) < 1e-8 for y, _, _ in found):
                found.append((float(x), p, m))
    return found


# growth along critical orbits ------------------------------------------


@dataclass
class CriticalGrowth:
    c: float
    series: np.ndarray
    regime: str
    exp_rate: float
    exp_residual: float
    poly_exponent: float
    poly_residual: float
    critical_hit: int | None = None


@dataclass
class GrowthReport:
    points: list[CriticalGrowth]
    preperiodic: bool
    violations: list[str] = field(default_factory=list)

    @property
    def regime(self) -> str:
        regimes = {p.regime for p in self.points}
        return regimes.pop() if len(regimes) == 1 else "mixed"


def growth_diagnostic(f: IntervalMap, n_max: int = 30, tol: float = 1e-10, fit_threshold: float = 0.35) -> GrowthReport:
    """|Df^n(f(c))| along every critical (or turning) orbit, with exponential/polynomial fits."""
    if n_max < 10:
        raise ValueError("n_max must be at least 10")
    crit = [cp.c for cp in critical_points(f)] if f.is_smooth else turning_points(f)
    if not crit:
        raise ValueError("map has no critical or turning points")
    orbits = {c: f.orbit(c, n_max + 1) for c in crit}
    violations = []
    # condition d): no coincidences f^n(c) = f^m(c') for (n, c) != (m, c')
    pts = [(c, j, orbits[c][j]) for c in crit for j in range(n_max + 1)]
    values = np.array([p[2] for p in pts])
    order = np.argsort(values)
    for a_, b_ in zip(order, order[1:]):
        if abs(values[a_] - values[b_]) < tol and (pts[a_][0], pts[a_][1]) != (pts[b_][0], pts[b_][1]):
            violations.append(f"f^{pts[a_][1]}({pts[a_][0]:.6g}) = f^{pts[b_][1]}({pts[b_][0]:.6g})")
    out = []
    for c in crit:
        orb = orbits[c][1 : n_max + 1]
        d = np.abs(f.slope(orb))
        hit = None
        zero = np.nonzero(d <= 1e-15)[0]
        if zero.size:
            hit = int(zero[0]) + 1
            violations.append(f"critical orbit of {c:.6g} hits a critical point at step {hit}")
        series = np.cumprod(d)
        n = np.arange(1, n_max + 1)
        good = series > 0
        ls = np.log(series[good])
        nn = n[good]
        if nn.size >= 3:
            e_fit = np.polyfit(nn, ls, 1, full=True)
            p_fit = np.polyfit(np.log(nn), ls, 1, full=True)
            e_rate = float(e_fit[0][0])
            p_exp = float(p_fit[0][0])
            e_res = float(np.sqrt(e_fit[1][0] / nn.size)) if e_fit[1].size else 0.0
            p_res = float(np.sqrt(p_fit[1][0] / nn.size)) if p_fit[1].size else 0.0
        else:
            e_rate = p_exp = float("nan")
            e_res = p_res = float("inf")
        if e_rate > 0 and e_res <= fit_threshold and e_res <= p_res:
            regime = "exponential"
        elif p_exp > 0 and p_res <= fit_threshold:
            regime = "polynomial"
        else:
            regime = "inconclusive"
        out.append(CriticalGrowth(c, series, regime, e_rate, e_res, p_exp, p_res, hit))
    return GrowthReport(out, bool(violations), violations)


# class F heuristics -------------------------------------------------------


@dataclass
class ClassFReport:
    critical_orders: list[float]
    neutral_or_attracting_cycles: list
    covering_fraction: float
    preperiodic: bool
    schwarzian_range: tuple[float, float]
    smooth: bool

    @property
    def plausible(self) -> bool:
        return not self.neutral_or_attracting_cycles and self.covering_fraction > 0.999 and not self.preperiodic


def image_hull(f: IntervalMap, lo: float, hi: float) -> tuple[float, float]:
    """f([lo, hi]) for a continuous map: extremes over endpoints and interior turning points."""
    cand = [lo, hi] + [z for z in turning_points(f) if lo < z < hi]
    v = f(np.asarray(cand))
    return float(v.min()), float(v.max())


def dynamical_core(f: IntervalMap, n_iter: int = 50) -> tuple[float, float]:
    """Smallest interval spanned by the forward orbits of the turning values."""
    tps = turning_points(f)
    if not tps:
        return 0.0, 1.0
    v = f(np.asarray(tps))
    core = (float(v.min()), float(v.max()))
    for _ in range(n_iter):
        lo, hi = image_hull(f, *core)
        new = (min(core[0], lo), max(core[1], hi))
        if new == core:
            break
        core = new
    return core


def class_f_report(f: IntervalMap, n_cells: int = 32, n_iter: int = 40) -> ClassFReport:
    """Heuristic checks of the standing hypotheses; reported, never enforced."""
    crit = critical_points(f) if f.is_smooth else []
    cycles = attracting_cycles(f)
    tps = turning_points(f)
    core = dynamical_core(f)
    covered = 0
    edges = np.linspace(core[0], core[1], n_cells + 1)
    for a, b in zip(edges, edges[1:]):
        lo, hi = a, b
        for _ in range(n_iter):
            cand = [lo, hi] + [z for z in tps if lo < z < hi]
            v = f(np.asarray(cand))
            lo, hi = float(v.min()), float(v.max())
            if lo <= core[0] + 1e-7 and hi >= core[1] - 1e-7:
                covered += 1
                break
    try:
        pre = growth_diagnostic(f, 30).preperiodic if (crit or tps) else False
    except ValueError:
        pre = False
    return ClassFReport(
        [cp.order for cp in crit], cycles, covered / n_cells, pre, schwarzian_sign(f), f.is_smooth
    )


def check_range_condition(f: IntervalMap, phi: Potential, h_top: float | None = None, n_grid: int = 4097):
    """Whether sampled sup(phi) - inf(phi) < h_top(f); returns (ok, margin)."""
    if phi.kind not in ("holder_function", "constant"):
        raise ValueError("range condition applies to Hölder or constant potentials")
    if h_top is None:
        h_top = estimate_topological_entropy(f).value
    xs = np.linspace(0, 1, n_grid)
    v = np.asarray(phi(f, xs))
    osc = float(v.max() - v.min())
    margin = h_top - osc
    if margin <= 0:
        warnings.warn(f"range condition fails: oscillation {osc:.4g} >= h_top {h_top:.4g}", stacklevel=2)
    return margin > 0, margin


def normalize_potential(f: IntervalMap, phi: Potential, depth: int = 14, tol: float = 1e-4, strict: bool = True, **kw) -> Potential:
    """Shift phi so that its estimated pressure is 0 (see thermo.normalize_potential)."""
    from .thermo import normalize_potential as _norm

    return _norm(f, phi, depth, tol, strict, **kw)
