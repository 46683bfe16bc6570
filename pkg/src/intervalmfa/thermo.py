"""Pressure, the T(q) solver, Gibbs and conformal measures, tail diagnostics.

Two pressure estimators are provided.

* Original system: cylinder sums over P_n. The smooth part of the potential is
  sampled at interior points of every cylinder (sup or inf depending on the sign
  of q); the geometric part -t log|Df^n| is replaced by its mean value
  log(|C| / |f^n C|), which is finite even for cylinders adjacent to precritical
  points.
* Induced system: one-letter sums over the branches of an inducing scheme,
  with each branch weight averaged over Gauss nodes in the branch image and a
  geometric correction for the tail beyond the return-time cap.

Both estimators cache everything that does not depend on (t, q), so a pressure
evaluation is a single log-sum-exp.
"""

from __future__ import annotations

import copy
import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import logsumexp

from .cylinders import partitions, pullback
from .hofbauer import TowerGraph, transitive_part
from .inducing import InducingScheme
from .map_model import IntervalMap, Potential


class ConvergenceError(RuntimeError):
    def __init__(self, msg, sequence=None):
        super().__init__(msg)
        self.sequence = sequence


class DivergenceError(RuntimeError):
    pass


class BracketError(RuntimeError):
    def __init__(self, msg, bracket=None, values=None):
        super().__init__(msg)
        self.bracket = bracket
        self.values = values


class NonGibbsWarning(UserWarning):
    pass


@dataclass
class PressureEstimate:
    value: float
    method: str  # "original" or "induced"
    depth: int
    sequence: np.ndarray
    converged: bool
    coverage: float = 1.0
    notes: list[str] = field(default_factory=list)


def _split(phi: Potential | None) -> tuple[float, Potential | None, float]:
    """phi = -t0 log|Df| + base - shift; returns (t0, base, shift)."""
    if phi is None:
        return 0.0, None, 0.0
    if phi.kind == "geometric":
        return phi.t, None, phi.normalization_shift
    if phi.kind == "combination":
        base = phi.base
        # q * base is folded in by scaling at evaluation time
        return phi.t, _ScaledPotential(phi.q, base), phi.normalization_shift
    return 0.0, phi.shifted(-phi.normalization_shift) if phi.normalization_shift else phi, phi.normalization_shift


class _ScaledPotential:
    def __init__(self, q, base):
        self.q, self.base = q, base
        self.kind = "scaled"

    def __call__(self, f, x):
        return self.q * np.asarray(self.base(f, x))


def _gauss_nodes(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


def aitken(seq) -> float:
    s = np.asarray(seq, dtype=float)
    if s.size < 3:
        return float(s[-1])
    a, b, c = s[-3:]
    den = c - 2 * b + a
    if not np.isfinite(den) or abs(den) < 1e-14 * max(1.0, abs(c)):
        return float(c)
    acc = c - (c - b) ** 2 / den
    # only accept a correction of the same size as the last step
    if abs(acc - c) > 10 * abs(c - b) + 1e-15:
        return float(c)
    return float(acc)


# original system ------------------------------------------------------------


class PartitionSums:
    """Per-cylinder data of P_1..P_depth for a potential, reused for every (t, q)."""

    def __init__(self, f: IntervalMap, phi: Potential | None, depth: int = 14, n_samples: int = 7, max_cylinders: int = 400_000):
        if depth < 4:
            raise ValueError("depth must be at least 4")
        self.f = f
        self.t0, base, self.shift = _split(phi)
        self.depths = []
        self.sup, self.inf, self.geo = [], [], []
        self.lower_biased = False
        nodes = 0.5 * (np.polynomial.chebyshev.chebpts1(n_samples) + 1.0)
        for part in partitions(f, depth):
            if part.depth == 0:
                continue
            if len(part) > max_cylinders:
                warnings.warn(f"partition sums stop at depth {part.depth - 1} ({len(part)} cylinders)", stacklevel=2)
                break
            w = part.widths
            iw = part.image_widths
            ok = (w > 0) & (iw > 0)
            g = np.full(len(part), -np.inf)
            g[ok] = np.log(w[ok] / iw[ok])
            if base is not None:
                y = part.img_lo[:, None] + iw[:, None] * nodes[None, :]
                _, orb = pullback(f, part.itin, y, keep_orbit=True)
                s = np.asarray(base(f, orb)).sum(axis=0)
                self.sup.append(s.max(axis=1))
                self.inf.append(s.min(axis=1))
            else:
                z = np.zeros(len(part))
                self.sup.append(z)
                self.inf.append(z)
            self.geo.append(g)
            self.depths.append(part.depth)
        if self.t0 != 0.0 and f.is_smooth:
            self.lower_biased = True

    @property
    def depth(self) -> int:
        return self.depths[-1]

    def log_z(self, t: float, q: float) -> np.ndarray:
        """log Z_n for n = 1..depth of -t log|Df| + q phi."""
        tt = t + q * self.t0
        out = np.empty(len(self.depths))
        for k, n in enumerate(self.depths):
            s = self.sup[k] if q >= 0 else self.inf[k]
            if tt == 0:
                terms = q * s
            else:
                ok = np.isfinite(self.geo[k])
                terms = q * s[ok] + tt * self.geo[k][ok]
            out[k] = logsumexp(terms) - q * n * self.shift
        return out


def _sequence_estimate(logz: np.ndarray, depths, tol: float):
    """Ratio estimates log Z_n - log Z_{n-1}, Aitken-accelerated, with a Cauchy test on the tail."""
    d = np.asarray(depths)
    ratios = np.diff(logz) / np.diff(d)
    seq = np.concatenate([[logz[0] / d[0]], ratios])
    value = aitken(seq)
    tail = seq[-3:]
    converged = bool(tail.size == 3 and np.all(np.abs(np.diff(tail)) < tol))
    return value, seq, converged


def pressure_original(
    f: IntervalMap, phi: Potential, depth: int = 14, *, tol: float = 1e-4, sums: PartitionSums | None = None,
    t: float = 0.0, q: float = 1.0, n_samples: int = 7,
) -> PressureEstimate:
    """Cylinder-sum pressure of -t log|Df| + q phi (defaults give P(phi))."""
    if sums is None:
        sums = PartitionSums(f, phi, depth, n_samples)
    logz = sums.log_z(t, q)
    value, seq, conv = _sequence_estimate(logz, sums.depths, tol)
    notes = []
    if sums.lower_biased:
        notes.append("geometric part evaluated by mean value; sampled sup is lower-bound biased")
    return PressureEstimate(value, "original", sums.depth, seq, conv, 1.0, notes)


class OriginalPressure:
    """(t, q) -> P(-t log|Df| + q phi) on the original system."""

    method = "original"

    def __init__(self, f: IntervalMap, phi: Potential, depth: int = 14, tol: float = 1e-4, n_samples: int = 7):
        self.f, self.phi, self.tol = f, phi, tol
        self.sums = PartitionSums(f, phi, depth, n_samples)

    def estimate(self, t: float, q: float) -> PressureEstimate:
        return pressure_original(self.f, self.phi, sums=self.sums, t=t, q=q, tol=self.tol)

    def __call__(self, t: float, q: float) -> float:
        return self.estimate(t, q).value


def normalize_potential(
    f: IntervalMap, phi: Potential, depth: int = 14, tol: float = 1e-4, strict: bool = True, *,
    scheme: InducingScheme | None = None, m: int = 8, induced_tol: float = 1e-3,
) -> Potential:
    """Shift phi by its estimated pressure so that P(phi) = 0.

    Without a scheme P(phi) comes from the cylinder sums. With a scheme it is the
    root p of P_F(Φ - pτ) = 0 on the induced system.
    """
    if phi.kind not in ("holder_function", "constant"):
        raise ValueError("normalisation applies to Hölder or constant potentials")
    if scheme is None:
        est = pressure_original(f, phi, depth, tol=tol)
        if not est.converged and strict:
            raise ConvergenceError(f"pressure did not converge (last steps {est.sequence[-3:]})", est.sequence)
        value = est.value
    else:
        value = induced_pressure_root(InducedData.from_scheme(scheme, phi, m), f, phi, tol=induced_tol, strict=strict)
    if abs(value) < 1e-12:
        return phi
    return phi.shifted(value)


def induced_pressure_root(data: "InducedData", f: IntervalMap, phi: Potential, tol: float = 1e-4, strict: bool = True) -> float:
    """p with P_F(Φ - pτ) = 0; P(φ) lies in [inf φ, sup φ + log #branches]."""
    v = np.asarray(phi(f, np.linspace(0.0, 1.0, 1025)), dtype=float)
    lo, hi = float(v.min()) - 1.0, float(v.max()) + math.log(f.n_branches) + 1.0
    model = InducedPressure(data, tol=tol)

    def g(p):
        try:
            return model.with_shift(p)(0.0, 1.0)
        except DivergenceError:
            return 1e6

    glo, ghi = g(lo), g(hi)
    if not glo > 0 > ghi:
        raise ConvergenceError(f"no sign change of P_F(Φ - pτ) on [{lo:.4g}, {hi:.4g}]", [glo, ghi])
    p = optimize.brentq(g, lo, hi, xtol=1e-12)
    est = model.with_shift(p).estimate(0.0, 1.0)
    if not est.converged and strict:
        raise ConvergenceError(f"induced pressure did not converge (sequence {est.sequence})", est.sequence)
    return float(p)


# induced system -------------------------------------------------------------


class InducedData:
    """Per-branch samples of log|DF| and Φ = S_τ(base) at Gauss nodes of the branch images."""

    def __init__(self, tau, log_weight, ldf, phi_vals, x_width: float = 1.0, full=None, t0: float = 0.0, shift: float = 0.0):
        self.tau = np.asarray(tau, dtype=int)
        self.log_weight = np.asarray(log_weight, dtype=float)  # (N, m): log(|J_i|/|X| g_j)
        self.ldf = np.asarray(ldf, dtype=float)
        self.phi = np.asarray(phi_vals, dtype=float)
        self.x_width = x_width
        self.full = np.ones(self.tau.size, dtype=bool) if full is None else np.asarray(full)
        self.t0, self.shift = t0, shift

    @classmethod
    def from_values(cls, tau, psi, log_df=None):
        """Synthetic locally constant data: Φ_i = psi[i], log|DF_i| = log_df[i] (default 0)."""
        psi = np.asarray(psi, dtype=float)[:, None]
        ldf = np.zeros_like(psi) if log_df is None else np.asarray(log_df, dtype=float)[:, None]
        return cls(tau, np.zeros_like(psi), ldf, psi)

    @classmethod
    def from_scheme(cls, scheme: InducingScheme, phi: Potential | None, m: int = 8):
        if not scheme.branches:
            raise ValueError("scheme has no branches")
        t0, base, shift = _split(phi)
        nodes, gw = _gauss_nodes(m)
        f = scheme.f
        N = len(scheme)
        lw = np.empty((N, m))
        ldf = np.empty((N, m))
        ph = np.zeros((N, m))
        groups: dict[int, list[int]] = {}
        for i, br in enumerate(scheme.branches):
            groups.setdefault(br.tau, []).append(i)
        for tau, ids in groups.items():
            brs = [scheme.branches[i] for i in ids]
            lo = np.array([br.image[0] for br in brs])
            hi = np.array([br.image[1] for br in brs])
            y = lo[:, None] + (hi - lo)[:, None] * nodes[None, :]
            itin = np.array([br.itinerary for br in brs], dtype=np.int16)
            _, orb = pullback(f, itin, y, keep_orbit=True)
            with np.errstate(divide="ignore"):
                ldf[ids] = np.log(np.abs(f.slope(orb))).sum(axis=0)
            if base is not None:
                ph[ids] = np.asarray(base(f, orb)).sum(axis=0)
            lw[ids] = np.log((hi - lo) / scheme.x_width)[:, None] + np.log(gw)[None, :]
        full = np.array([br.full for br in scheme.branches])
        return cls(scheme.taus, lw, ldf, ph, scheme.x_width, full, t0, shift)

    def log_terms(self, t: float, q: float) -> np.ndarray:
        """log of the averaged weights exp(-t log|DF| + q Φ) per sample, shape (N, m)."""
        tt = t + q * self.t0
        with np.errstate(invalid="ignore"):
            v = self.log_weight - tt * self.ldf + q * (self.phi - self.shift * self.tau[:, None])
        return np.where(np.isnan(v), -np.inf, v)

    def branch_log_weights(self, t: float, q: float) -> np.ndarray:
        return logsumexp(self.log_terms(t, q), axis=1)


@dataclass
class TailFit:
    taus: np.ndarray
    log_sums: np.ndarray
    slope: float | None
    intercept: float | None
    log_tail: float  # log of the extrapolated mass beyond the cap (-inf if none)


def tail_fit(tau: np.ndarray, logw: np.ndarray, min_points: int = 3, weight_tau: bool = False) -> TailFit:
    """Fit log Σ_{τ_i = n} w_i against n over the upper half of the observed τ values."""
    ns = np.unique(tau)
    ls = np.array([logsumexp(logw[tau == n] + (math.log(n) if weight_tau else 0.0)) for n in ns])
    fin = np.isfinite(ls)
    ns_f, ls_f = ns[fin], ls[fin]
    if ns_f.size < min_points:
        return TailFit(ns, ls, None, None, -np.inf)
    k = max(min_points, ns_f.size // 2)
    x, y = ns_f[-k:], ls_f[-k:]
    slope, icpt = np.polyfit(x, y, 1)
    cap = ns.max()
    if slope < 0:
        log_tail = icpt + slope * (cap + 1) - math.log1p(-math.exp(slope))
    else:
        log_tail = np.inf
    return TailFit(ns, ls, float(slope), float(icpt), float(log_tail))


class InducedPressure:
    """(t, q) -> P_F(-t log|DF| + q Φ), one-letter Gurevich sum with tail extrapolation."""

    method = "induced"

    def __init__(self, data: InducedData, tail: bool = True, divergence_slope: float = -1e-3, tol: float = 1e-3):
        self.data = data
        self.tail = tail
        self.divergence_slope = divergence_slope
        self.tol = tol

    def with_shift(self, p: float) -> "InducedPressure":
        """Same data with φ replaced by φ - p."""
        d = copy.copy(self.data)
        d.shift = self.data.shift + p
        return InducedPressure(d, self.tail, self.divergence_slope, self.tol)

    def _truncated(self, lw: np.ndarray, cap: int) -> tuple[float, float | None]:
        keep = self.data.tau <= cap
        raw = float(logsumexp(lw[keep]))
        if not self.tail or np.unique(self.data.tau[keep]).size < 3:
            return raw, None
        tf = tail_fit(self.data.tau[keep], lw[keep])
        if np.isfinite(tf.log_tail):
            return float(np.logaddexp(raw, tf.log_tail)), tf.slope
        return raw, tf.slope

    def estimate(self, t: float, q: float) -> PressureEstimate:
        """Cauchy test over truncation levels τ <= cap - 6, cap - 3, cap (each tail-extrapolated)."""
        lw = self.data.branch_log_weights(t, q)
        cap = int(self.data.tau.max())
        notes = []
        if self.tail and np.unique(self.data.tau).size >= 3:
            tf = tail_fit(self.data.tau, lw)
            if tf.slope is not None and tf.slope >= self.divergence_slope:
                raise DivergenceError(f"Z_0 tail does not decay (slope {tf.slope:.4g}) at t={t}, q={q}")
        caps = [c for c in (cap - 6, cap - 3) if c >= self.data.tau.min()] + [cap]
        seq = np.array([self._truncated(lw, c)[0] for c in caps])
        value = float(seq[-1])
        raw = float(logsumexp(lw))
        if value != raw:
            notes.append(f"tail correction {value - raw:.3g}")
        converged = bool(seq.size < 2 or abs(seq[-1] - seq[-2]) < self.tol)
        return PressureEstimate(value, "induced", 1, seq, converged, 1.0, notes)

    def __call__(self, t: float, q: float) -> float:
        return self.estimate(t, q).value


def pressure_induced(scheme_or_data, psi: Potential | None = None, *, t: float = 0.0, q: float = 1.0, tail: bool = True) -> PressureEstimate:
    """P_F of -t log|DF| + q Φ for the scheme (Φ induced from psi) or for prepared InducedData."""
    data = scheme_or_data if isinstance(scheme_or_data, InducedData) else InducedData.from_scheme(scheme_or_data, psi)
    est = InducedPressure(data, tail).estimate(t, q)
    if isinstance(scheme_or_data, InducingScheme):
        est.coverage = scheme_or_data.coverage
    return est


# T(q) -----------------------------------------------------------------------


@dataclass
class TSolution:
    q: float
    T: float
    converged: bool
    method: str
    bracket: tuple[float, float]
    pressure_at_root: float
    evaluations: int


def _safe(model, t, q):
    try:
        return model(t, q)
    except DivergenceError:
        return 1e6


def solve_T(
    model, q: float, bracket=(-2.0, 3.0), tol: float = 1e-10, max_width: float = 8.0, ptol: float = 1e-8
) -> TSolution:
    """Root in t of P(-t log|Df| + q phi) for a pressure model (callable (t, q) -> float).

    The pressure is decreasing in t; the bracket is widened towards the root until it
    spans ``max_width``.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    plo, phi_ = _safe(model, lo, q), _safe(model, hi, q)
    nev = 2
    step = 1.0
    while not (plo >= 0 >= phi_):
        if hi - lo >= max_width - 1e-12:
            raise BracketError(
                f"no sign change of P on [{lo:.4g}, {hi:.4g}] at q={q}", (lo, hi), (plo, phi_)
            )
        grow = min(step, max_width - (hi - lo))
        # extend the end beyond which the root must lie; the other end stays put
        if phi_ > 0:
            hi = hi + grow
            phi_ = _safe(model, hi, q)
        else:
            lo = lo - grow
            plo = _safe(model, lo, q)
        nev += 1
        step *= 2
    if plo == 0:
        root = lo
    elif phi_ == 0:
        root = hi
    else:
        root = optimize.brentq(lambda t: _safe(model, t, q), lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)
    est = model.estimate(root, q) if hasattr(model, "estimate") else None
    p_root = est.value if est is not None else model(root, q)
    conv = (est.converged if est is not None else True) and abs(p_root) < max(ptol, 1e-6)
    return TSolution(q, float(root), bool(conv), getattr(model, "method", "custom"), (lo, hi), float(p_root), nev)


def pressure_monotone_in_t(model, q: float, ts) -> bool:
    """P(-t log|Df| + qφ) strictly decreasing along ts (divergent values count as +inf and must come first)."""
    vals = np.array([_safe(model, float(t), q) for t in np.sort(np.asarray(ts, dtype=float))])
    vals[vals >= 1e6] = np.inf
    fin = np.isfinite(vals)
    if fin.any() and not np.all(fin[np.argmax(fin):]):
        return False
    v = vals[fin]
    return bool(v.size < 2 or np.all(np.diff(v) < 0))


@dataclass
class TqCurve:
    q: np.ndarray
    T: np.ndarray
    converged: np.ndarray
    pb: np.ndarray  # 1 in PB, 0 not, -1 inconclusive or not computed
    alpha: np.ndarray
    method: str
    errors: dict = field(default_factory=dict)

    def __len__(self):
        return self.q.size

    def second_differences(self) -> np.ndarray:
        ok = self.converged
        q, T = self.q[ok], self.T[ok]
        if q.size < 3:
            return np.zeros(0)
        h1, h2 = np.diff(q)[:-1], np.diff(q)[1:]
        return 2 * (T[2:] * h1 - T[1:-1] * (h1 + h2) + T[:-2] * h2) / (h1 * h2 * (h1 + h2)) * (0.5 * (h1 + h2)) ** 2

    def to_csv(self) -> str:
        rows = ["q,T,converged,pb,alpha"]
        for i in range(self.q.size):
            rows.append(f"{self.q[i]:.12g},{self.T[i]:.12g},{int(self.converged[i])},{int(self.pb[i])},{self.alpha[i]:.12g}")
        return "\n".join(rows) + "\n"


def numeric_alpha(q: np.ndarray, T: np.ndarray) -> np.ndarray:
    """α(q) = -T'(q) by central differences (second-order one-sided at the ends)."""
    if q.size < 2:
        return np.full(q.size, np.nan)
    if q.size == 2:
        return -np.gradient(T, q)
    return -np.gradient(T, q, edge_order=2)


def tq_curve(model, q_grid, *, bracket=(-2.0, 3.0), tol: float = 1e-10, jobs: int = 1, pb_data: InducedData | None = None) -> TqCurve:
    """T(q) on a sorted grid with warm-started brackets (sequential) or a thread pool (jobs > 1)."""
    q = np.asarray(q_grid, dtype=float)
    if q.size and np.any(np.diff(q) <= 0):
        raise ValueError("q grid must be strictly increasing")
    T = np.full(q.size, np.nan)
    conv = np.zeros(q.size, dtype=bool)
    errors = {}

    def one(i, br):
        return solve_T(model, q[i], br, tol)

    results: list = [None] * q.size
    if jobs > 1 and q.size > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            futs = [ex.submit(one, i, bracket) for i in range(q.size)]
            for i, fu in enumerate(futs):
                try:
                    results[i] = fu.result()
                except (BracketError, ConvergenceError) as e:
                    results[i] = e
    # sweep outwards from q = 1 (where T = 0 for a normalised potential), warm-starting
    # each root from its neighbour; in parallel mode only the failures are redone
    i0 = int(np.argmin(np.abs(q - 1.0))) if q.size else 0
    for order in (range(i0, q.size), range(i0 - 1, -1, -1)):
        for i in order:
            if results[i] is not None and not isinstance(results[i], Exception):
                continue
            nb = i - 1 if i > i0 else i + 1
            prev = results[nb] if 0 <= nb < q.size and nb != i else None
            br = (prev.T - 0.5, prev.T + 0.5) if isinstance(prev, TSolution) else bracket
            try:
                results[i] = one(i, br)
            except (BracketError, ConvergenceError) as e:
                results[i] = e
    for i, r in enumerate(results):
        if isinstance(r, Exception):
            errors[float(q[i])] = str(r)
        else:
            T[i], conv[i] = r.T, r.converged
    alpha = np.full(q.size, np.nan)
    ok = np.isfinite(T)
    if ok.sum() >= 2:
        alpha[ok] = numeric_alpha(q[ok], T[ok])
    pb = np.full(q.size, -1, dtype=int)
    if pb_data is not None:
        for i in np.nonzero(ok)[0]:
            d = pb_diagnostic(pb_data, T[i], q[i])
            pb[i] = -1 if d.in_pb is None else int(d.in_pb)
    return TqCurve(q, T, conv, pb, alpha, getattr(model, "method", "custom"), errors)


# PB diagnostic --------------------------------------------------------------


@dataclass
class PBReport:
    in_pb: bool | None
    beta: float | None
    delta: float | None
    slope: float | None
    exp_residual: float | None
    power_residual: float | None
    note: str = ""


def pb_diagnostic_from_tail(ns, log_sums, margin: float = 0.05) -> PBReport:
    ns = np.asarray(ns, dtype=float)
    ls = np.asarray(log_sums, dtype=float)
    fin = np.isfinite(ls)
    ns, ls = ns[fin], ls[fin]
    if ns.size < 3:
        return PBReport(None, None, None, None, None, None, "fewer than 3 distinct return times")
    k = max(3, ns.size // 2)
    x, y = ns[-k:], ls[-k:]
    e = np.polyfit(x, y, 1, full=True)
    p = np.polyfit(np.log(x), y, 1, full=True)
    slope = float(e[0][0])
    er = float(np.sqrt(e[1][0] / k)) if e[1].size else 0.0
    pr = float(np.sqrt(p[1][0] / k)) if p[1].size else 0.0
    exp_wins = er <= pr
    in_pb = bool(slope < -margin and exp_wins)
    beta = -slope
    return PBReport(in_pb, beta, beta / 2 if in_pb else None, slope, er, pr)


def pb_diagnostic(data, t: float | None = None, q: float | None = None, margin: float = 0.05) -> PBReport:
    """Exponential decay test of n -> Σ_{τ_i = n} τ_i e^{Ψ_i} (the starred Z_0 sum) for Ψ = -t log|DF| + q Φ.

    ``data`` is an InducedData (with t, q) or a pair (taus, psi values).
    """
    if isinstance(data, InducedData):
        lw = data.branch_log_weights(t, q)
        tau = data.tau
    else:
        tau, lw = (np.asarray(v) for v in data)
    tf = tail_fit(tau, lw, weight_tau=True)
    return pb_diagnostic_from_tail(tf.taus, tf.log_sums, margin)


# Gibbs measures on the induced shift ------------------------------------------


@dataclass
class WordData:
    words: np.ndarray  # (W, n) branch indices
    x_lo: np.ndarray  # word cylinder in X
    x_hi: np.ndarray
    S_phi: np.ndarray  # (W, m) Birkhoff sums of the base potential over the whole block
    S_ldf: np.ndarray  # (W, m) log|DF^n|
    tau: np.ndarray  # (W,) total return time
    mid: int  # index of the central sample


def word_data(scheme: InducingScheme, phi, n: int, branches=None, m: int = 5, max_words: int = 200_000) -> WordData:
    """Samples of S_nΦ and log|DF^n| on the n-cylinders of the induced map."""
    if branches is None:
        branches = [i for i, br in enumerate(scheme.branches) if br.full]
    branches = list(branches)
    if len(branches) ** n > max_words:
        raise ValueError(f"{len(branches)}^{n} words exceed max_words={max_words}")
    _, base, _ = _split(phi) if phi is not None else (0.0, None, 0.0)
    f = scheme.f
    a, b = scheme.X
    nodes, _ = _gauss_nodes(m)
    y = a + (b - a) * np.concatenate([nodes, [0.0, 1.0]])
    words = np.array(list(itertools.product(branches, repeat=n)), dtype=int).reshape(-1, n)
    W = words.shape[0]
    tau_b = np.array([br.tau for br in scheme.branches])
    total = tau_b[words].sum(axis=1)
    S_phi = np.zeros((W, m))
    S_ldf = np.zeros((W, m))
    x_lo, x_hi = np.empty(W), np.empty(W)
    for L in np.unique(total):
        ids = np.nonzero(total == L)[0]
        itin = np.array([sum((scheme.branches[k].itinerary for k in words[i]), ()) for i in ids], dtype=np.int16)
        yy = np.broadcast_to(y, (ids.size, y.size)).copy()
        _, orb = pullback(f, itin, yy, keep_orbit=True)
        inner = orb[:, :, :m]
        with np.errstate(divide="ignore"):
            S_ldf[ids] = np.log(np.abs(f.slope(inner))).sum(axis=0)
        if base is not None:
            S_phi[ids] = np.asarray(base(f, inner)).sum(axis=0)
        e0, e1 = orb[0, :, m], orb[0, :, m + 1]
        x_lo[ids], x_hi[ids] = np.minimum(e0, e1), np.maximum(e0, e1)
    return WordData(words, x_lo, x_hi, S_phi, S_ldf, total, m // 2)


@dataclass
class GibbsApprox:
    scheme: InducingScheme
    depth: int
    words: np.ndarray
    weights: np.ndarray
    K: float
    log_norm: float  # log Z_n / n, should be ~0 for a normalised Ψ
    t: float
    q: float
    data: WordData
    notes: list[str] = field(default_factory=list)

    def aggregate(self, depth: int) -> dict[tuple, float]:
        """Weights summed onto words of a smaller depth (prefixes)."""
        out: dict[tuple, float] = {}
        for w, p in zip(map(tuple, self.words[:, :depth]), self.weights):
            out[w] = out.get(w, 0.0) + p
        return out

    def entropy(self) -> float:
        """h(μ_F) ≈ -(1/n) Σ w log w over the n-words (exact weights, no sampling correction)."""
        w = self.weights[self.weights > 0]
        return float(-(w * np.log(w)).sum() / self.depth)

    def mean_tau(self) -> float:
        return float((self.weights * self.data.tau).sum() / self.depth)


def gibbs_weights(
    scheme: InducingScheme, phi: Potential | None, depth: int, *, t: float = 0.0, q: float = 1.0, branches=None,
    m: int = 5, drift_tol: float = 0.05,
) -> GibbsApprox:
    """Word weights ∝ exp(S_nΨ at the central point of the word cylinder), Ψ = -t log|DF| + qΦ."""
    t0, _, shift = _split(phi) if phi is not None else (0.0, None, 0.0)
    wd = word_data(scheme, phi, depth, branches, m)
    tt = t + q * t0
    S = -tt * wd.S_ldf + q * (wd.S_phi - shift * wd.tau[:, None])
    mid = S[:, wd.mid]
    log_z = logsumexp(mid)
    weights = np.exp(mid - log_z)
    P = log_z / depth
    # Gibbs bracket: weight / exp(S_nΨ(x) - nP) over all sample points of each word
    ratio = mid[:, None] - log_z - (S - depth * P)
    K = float(np.exp(np.max(np.abs(ratio))))
    notes = []
    if abs(P) > drift_tol:
        msg = f"log Z_n / n = {P:.4g}: potential is not normalised"
        notes.append(msg)
        warnings.warn(msg, NonGibbsWarning, stacklevel=2)
    return GibbsApprox(scheme, depth, wd.words, weights, K, float(P), t, q, wd, notes)


# projection to the original system ------------------------------------------


@dataclass
class ProjectedMeasure:
    edges: np.ndarray
    masses: np.ndarray
    int_tau: float
    h_F: float
    h: float
    lyapunov: float
    int_phi: float

    def to_json(self) -> dict:
        return {"grid": [float(v) for v in self.edges], "masses": [float(v) for v in self.masses]}


def _spread(edges: np.ndarray, lo: np.ndarray, hi: np.ndarray, mass: np.ndarray) -> np.ndarray:
    """Distribute each mass uniformly over [lo, hi] onto the grid cells."""
    out = np.zeros(edges.size - 1)
    w = np.maximum(hi - lo, 1e-300)
    for s in range(0, lo.size, 2048):
        sl = slice(s, s + 2048)
        F = np.clip((edges[None, :] - lo[sl, None]) / w[sl, None], 0.0, 1.0)
        out += (mass[sl, None] * np.diff(F, axis=1)).sum(axis=0)
    return out


def block_intervals(scheme: InducingScheme, gibbs: GibbsApprox):
    """Intervals f^k(X_w), 0 <= k < τ(first letter), for every word, with the word weight."""
    f = scheme.f
    los, his, ms, ks, doms = [], [], [], [], []
    first = gibbs.words[:, 0]
    for i in np.unique(first):
        br = scheme.branches[i]
        ids = np.nonzero(first == i)[0]
        xl, xh = gibbs.data.x_lo[ids], gibbs.data.x_hi[ids]
        # orbit of the endpoints under f along the branch itinerary
        a, b = xl.copy(), xh.copy()
        for k in range(br.tau):
            los.append(np.minimum(a, b))
            his.append(np.maximum(a, b))
            ms.append(gibbs.weights[ids])
            ks.append(np.full(ids.size, k))
            doms.append(np.full(ids.size, -2 if k == 0 else br.domains[k - 1]))
            a = f.branches[br.itinerary[k]].value(a)
            b = f.branches[br.itinerary[k]].value(b)
    return (np.concatenate(los), np.concatenate(his), np.concatenate(ms), np.concatenate(ks), np.concatenate(doms))


def project_measure(scheme: InducingScheme, gibbs: GibbsApprox, phi: Potential | None = None, n_cells: int = 200) -> ProjectedMeasure:
    """Lift formula: μ = (1/∫τ) Σ_i Σ_{k<τ_i} f^k_*(μ_F|X_i), plus Abramov-scaled h, λ and ∫φ."""
    int_tau = gibbs.mean_tau()
    if not np.isfinite(int_tau) or int_tau <= 0:
        raise ConvergenceError("∫τ dμ_F is not finite")
    lo, hi, m, _, _ = block_intervals(scheme, gibbs)
    edges = np.linspace(0.0, 1.0, n_cells + 1)
    masses = _spread(edges, lo, hi, m) / (int_tau * gibbs.depth) * gibbs.depth
    masses = masses / masses.sum()
    mid = gibbs.data.mid
    n = gibbs.depth
    lam_F = float((gibbs.weights * gibbs.data.S_ldf[:, mid]).sum() / n)
    if phi is not None:
        t0, _, shift = _split(phi)
        d = gibbs.data
        s_phi = d.S_phi[:, mid] - shift * d.tau - t0 * d.S_ldf[:, mid]
        phi_F = float((gibbs.weights * s_phi).sum() / n)
    else:
        phi_F = float("nan")
    h_F = gibbs.entropy()
    return ProjectedMeasure(edges, masses, int_tau, h_F, h_F / int_tau, lam_F / int_tau, phi_F / int_tau)


def density_ratio_check(mass_a, mass_b, floor: float = 1e-12) -> tuple[float, float]:
    """(min, max) of mass_a / mass_b over cells where both exceed floor."""
    a, b = np.asarray(mass_a, dtype=float), np.asarray(mass_b, dtype=float)
    ok = (a > floor) & (b > floor)
    if not ok.any():
        raise ValueError("measures have disjoint supports on this grid")
    r = a[ok] / b[ok]
    return float(r.min()), float(r.max())


# conformal measures -----------------------------------------------------------


@dataclass
class ConformalApprox:
    """Measure on [0, 1] given by disjoint atoms [lo, hi] carrying uniform mass."""

    lo: np.ndarray
    hi: np.ndarray
    mass: np.ndarray
    deficit: float = 0.0
    notes: list[str] = field(default_factory=list)

    def measure(self, a: float, b: float) -> float:
        ov = np.clip(np.minimum(self.hi, b) - np.maximum(self.lo, a), 0.0, None)
        w = self.hi - self.lo
        return float(np.sum(self.mass * np.where(w > 0, ov / np.where(w > 0, w, 1.0), 0.0)))

    def integrate(self, func, a: float, b: float, n_gauss: int = 8) -> float:
        """∫_{[a,b]} func dm with Gauss-Legendre quadrature on every atom overlap."""
        s = np.maximum(self.lo, a)
        e = np.minimum(self.hi, b)
        ok = e > s
        if not ok.any():
            return 0.0
        s, e = s[ok], e[ok]
        dens = self.mass[ok] / (self.hi[ok] - self.lo[ok])
        x, w = np.polynomial.legendre.leggauss(n_gauss)
        pts = 0.5 * (e - s)[:, None] * (x[None, :] + 1.0) + s[:, None]
        vals = np.asarray(func(pts))
        return float(np.sum(dens * 0.5 * (e - s) * (vals * w[None, :]).sum(axis=1)))


def conformal_from_gibbs(scheme: InducingScheme, gibbs: GibbsApprox) -> ConformalApprox:
    """Base measure m_Φ on X from word weights (uniform mass on each word cylinder)."""
    return ConformalApprox(gibbs.data.x_lo.copy(), gibbs.data.x_hi.copy(), gibbs.weights.copy())


def tower_section(tower: TowerGraph) -> list[tuple[float, float, int]]:
    """Regions of [0, 1] each assigned to the lowest-level transitive domain containing it."""
    tp = transitive_part(tower)
    ids = sorted(tp.ids, key=lambda d: (tower.domains[d].level, d)) if tp.ids else [0]
    pts = sorted({0.0, 1.0} | {tower.domains[d].a for d in ids} | {tower.domains[d].b for d in ids})
    regions = []
    for a, b in zip(pts, pts[1:]):
        m = 0.5 * (a + b)
        for d in ids:
            D = tower.domains[d]
            if D.a <= m <= D.b:
                regions.append((a, b, d))
                break
    return regions


def propagate_conformal_tower(tower: TowerGraph, scheme: InducingScheme, base: ConformalApprox, phi: Potential) -> ConformalApprox:
    """Push m_Φ along the blocks f̂^k(X̂_w), k < τ, with mass factor e^{-S_kφ}; project through a section.

    Blocks that overlap in the tower describe the same measure (σ-conformality), so
    every atom of the projection takes its mass from one covering block (the one
    with the smallest k, then the lowest word index) rather than a sum.
    """
    if not scheme.branches or base.mass.size == 0:
        raise ValueError("empty scheme or base measure")
    f = scheme.f
    # words are identified by their base atom; find the first letter of each atom
    idx = np.array([scheme.locate(0.5 * (lo + hi)) for lo, hi in zip(base.lo, base.hi)])
    if np.any(idx < 0):
        raise ValueError("base measure has atoms outside the scheme branches")
    blo, bhi, bm, bk, bd = [], [], [], [], []
    for i in np.unique(idx):
        br = scheme.branches[i]
        ids = np.nonzero(idx == i)[0]
        a, b = base.lo[ids].copy(), base.hi[ids].copy()
        logm = np.log(base.mass[ids])
        for k in range(br.tau):
            blo.append(np.minimum(a, b)); bhi.append(np.maximum(a, b))
            bm.append(logm.copy()); bk.append(np.full(ids.size, k))
            bd.append(np.full(ids.size, scheme.base_domains[0] if k == 0 else br.domains[k - 1]))
            # mass factor e^{-φ} averaged over the atom (Gauss nodes)
            xg, wg = _gauss_nodes(4)
            pts = np.minimum(a, b)[:, None] + np.abs(b - a)[:, None] * xg[None, :]
            with np.errstate(divide="ignore"):
                logm = logm + np.log((np.exp(-np.asarray(phi(f, pts))) * wg[None, :]).sum(axis=1))
            k_b = br.itinerary[k]
            a, b = f.branches[k_b].value(a), f.branches[k_b].value(b)
    lo, hi = np.concatenate(blo), np.concatenate(bhi)
    lm, kk, dd = np.concatenate(bm), np.concatenate(bk), np.concatenate(bd)
    # section: only blocks sitting in the domain assigned to a region count there
    regions = tower_section(tower)
    atoms_lo, atoms_hi, atoms_m = [], [], []
    deficit = 0.0
    order = np.lexsort((np.arange(lo.size), kk))
    for ra, rb, d in regions:
        sel = order[((dd[order] == d) | ((dd[order] == -1) & (len(regions) == 1))) & (hi[order] > ra) & (lo[order] < rb)]
        if sel.size == 0:
            deficit += rb - ra
            continue
        cuts = np.unique(np.clip(np.concatenate([[ra, rb], lo[sel], hi[sel]]), ra, rb))
        mids = 0.5 * (cuts[:-1] + cuts[1:])
        chosen = np.full(mids.size, -1)
        for j in sel[::-1]:
            cover = (lo[j] <= mids) & (mids <= hi[j])
            chosen[cover] = j
        for c0, c1, j in zip(cuts[:-1], cuts[1:], chosen):
            if j < 0 or c1 <= c0:
                if c1 > c0:
                    deficit += c1 - c0
                continue
            atoms_lo.append(c0)
            atoms_hi.append(c1)
            atoms_m.append(lm[j] + math.log((c1 - c0) / (hi[j] - lo[j])))
    lm_a = np.array(atoms_m)
    m = np.exp(lm_a - logsumexp(lm_a))
    notes = [f"uncovered length {deficit:.3g}"] if deficit > 1e-12 else []
    return ConformalApprox(np.array(atoms_lo), np.array(atoms_hi), m, deficit, notes)


def conformality_residual(f: IntervalMap, m: ConformalApprox, phi: Potential, max_depth: int = 8, n_gauss: int = 8) -> float:
    """max |m(f(A)) - ∫_A e^{-φ} dm| over cylinders A of depth 1..max_depth."""
    worst = 0.0
    for part in partitions(f, max_depth):
        if part.depth == 0:
            continue
        for i in range(len(part)):
            a, b = part.a[i], part.b[i]
            k = part.itin[i, 0]
            y0, y1 = f.branches[k].value(a), f.branches[k].value(b)
            lhs = m.measure(min(y0, y1), max(y0, y1))
            rhs = m.integrate(lambda x: np.exp(-np.asarray(phi(f, x))), a, b, n_gauss)
            worst = max(worst, abs(lhs - rhs))
    return worst


# variations -------------------------------------------------------------------


@dataclass
class VariationReport:
    depths: np.ndarray
    V: np.ndarray
    decay_rate: float | None
    partial_sum: float
    note: str = ""


def variation_series(scheme: InducingScheme, phi: Potential | None, depth: int = 3, branches=None, m: int = 9, t: float = 0.0, q: float = 1.0) -> VariationReport:
    """V_n of Ψ = -t log|DF| + qΦ: sup over induced n-cylinders of the sampled oscillation of Ψ."""
    if branches is None:
        full = [i for i, br in enumerate(scheme.branches) if br.full]
        branches = full[: max(1, int(round(2000 ** (1.0 / depth))))]
    t0, base, shift = _split(phi) if phi is not None else (0.0, None, 0.0)
    tt = t + q * t0
    f = scheme.f
    V = []
    resolution = 1e-12
    for n in range(1, depth + 1):
        wd_words = np.array(list(itertools.product(branches, repeat=n)), dtype=int).reshape(-1, n)
        a, b = scheme.X
        y = a + (b - a) * 0.5 * (np.polynomial.chebyshev.chebpts1(m) + 1.0)
        worst = 0.0
        for w in wd_words:
            itin = np.array([sum((scheme.branches[k].itinerary for k in w), ())], dtype=np.int16)
            _, orb = pullback(f, itin, y[None, :], keep_orbit=True)
            first = orb[: scheme.branches[w[0]].tau, 0, :]
            with np.errstate(divide="ignore"):
                v = -tt * np.log(np.abs(f.slope(first))).sum(axis=0)
            if base is not None:
                v = v + q * np.asarray(base(f, first)).sum(axis=0)
            worst = max(worst, float(np.ptp(v)))
        V.append(worst if worst > resolution else 0.0)
    V = np.array(V)
    rate = None
    pos = V > 0
    if pos.sum() >= 2:
        rate = float(-np.polyfit(np.arange(1, depth + 1)[pos], np.log(V[pos]), 1)[0])
    note = "" if pos.any() else "oscillation below sampling resolution"
    return VariationReport(np.arange(1, depth + 1), V, rate, float(V.sum()), note)
