"""Dimension and Lyapunov spectra, landmark checks and pointwise estimators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hofbauer import TowerGraph, tower_orbit
from .inducing import InducingScheme, orbit_in_scheme
from .map_model import IntervalMap, Potential
from .thermo import (
    GibbsApprox,
    TqCurve,
    _split,
    gibbs_weights,
    numeric_alpha,
    project_measure,
    tq_curve,
)


class ConvexityError(ValueError):
    def __init__(self, msg, indices):
        super().__init__(msg)
        self.indices = indices


@dataclass
class SpectrumCurve:
    alpha: np.ndarray
    DS: np.ndarray
    q: np.ndarray
    T: np.ndarray
    kind: str = "dimension"
    degenerate: bool = False
    landmarks: dict = field(default_factory=dict)
    converged: np.ndarray | None = None

    def __len__(self):
        return self.alpha.size

    def slope_differences(self) -> np.ndarray:
        """Successive differences of chord slopes; ≤ 0 everywhere for a concave curve."""
        if self.alpha.size < 3:
            return np.zeros(0)
        da = np.diff(self.alpha)
        keep = np.concatenate([[True], da > 1e-12])
        a, d = self.alpha[keep], self.DS[keep]
        if a.size < 3:
            return np.zeros(0)
        s = np.diff(d) / np.diff(a)
        return np.diff(s) * np.diff(a)[1:]

    def value_at(self, alpha):
        return np.interp(alpha, self.alpha, self.DS)

    def to_csv(self) -> str:
        rows = ["q,T,alpha,DS,converged,degenerate"]
        conv = np.ones(self.alpha.size, dtype=bool) if self.converged is None else self.converged
        for i in range(self.alpha.size):
            rows.append(
                f"{self.q[i]:.12g},{self.T[i]:.12g},{self.alpha[i]:.12g},{self.DS[i]:.12g},{int(conv[i])},{int(self.degenerate)}"
            )
        return "\n".join(rows) + "\n"


@dataclass
class AffinityReport:
    degenerate: bool
    span: tuple[float, float]
    max_second_difference: float


def affinity_detector(curve: TqCurve, tol: float = 1e-5) -> AffinityReport:
    """T affine on the converged window (max |second difference| < tol)."""
    ok = curve.converged & np.isfinite(curve.T)
    if ok.sum() < 4:
        raise ValueError("affinity detection needs at least 4 converged samples")
    d2 = curve.second_differences()
    m = float(np.max(np.abs(d2)))
    q = curve.q[ok]
    return AffinityReport(m < tol, (float(q[0]), float(q[-1])), m)


def legendre_transform(curve: TqCurve, tol: float = 1e-6, affine_tol: float = 1e-5) -> SpectrumCurve:
    """DS(α) = T(q) + qα with α = -T'(q), from the converged samples."""
    ok = curve.converged & np.isfinite(curve.T)
    if ok.sum() < 3:
        raise ValueError("Legendre transform needs at least 3 converged samples")
    d2 = curve.second_differences()
    bad = np.nonzero(d2 < -tol)[0]
    if bad.size:
        raise ConvexityError(f"T is not convex at converged indices {list(bad + 1)}", list(bad + 1))
    q, T = curve.q[ok], curve.T[ok]
    alpha = numeric_alpha(q, T)
    DS = T + q * alpha
    degenerate = bool(ok.sum() >= 4 and np.max(np.abs(d2)) < affine_tol)
    if degenerate:
        a = float(np.mean(alpha))
        j = int(np.argmin(np.abs(q)))
        return SpectrumCurve(np.array([a]), np.array([T[j] + q[j] * a]), q[j : j + 1], T[j : j + 1], degenerate=True,
                             converged=np.array([True]))
    order = np.argsort(alpha, kind="stable")
    return SpectrumCurve(alpha[order], DS[order], q[order], T[order], converged=np.ones(q.size, dtype=bool))


def landmark_at(curve: TqCurve, q0: float) -> tuple[float, float] | None:
    """(α(q0), DS(α(q0))) if q0 is on the converged grid."""
    ok = curve.converged & np.isfinite(curve.T)
    q, T = curve.q[ok], curve.T[ok]
    hit = np.nonzero(np.abs(q - q0) < 1e-9)[0]
    if not hit.size or q.size < 3:
        return None
    alpha = numeric_alpha(q, T)
    i = int(hit[0])
    return float(alpha[i]), float(T[i] + q[i] * alpha[i])


def acip_alpha(scheme: InducingScheme, phi: Potential) -> tuple[float, float]:
    """α_ac = -∫φ dμ_ac / λ(μ_ac) with μ_ac the projected Gibbs measure of -log|DF| (depth-1 words)."""
    g = gibbs_weights(scheme, phi, 1, t=1.0, q=0.0)
    pm = project_measure(scheme, g, phi)
    return -pm.int_phi / pm.lyapunov, pm.lyapunov


def dimension_spectrum(model, q_grid, *, scheme: InducingScheme | None = None, phi: Potential | None = None,
                       jobs: int = 1, tol: float = 1e-10, pb_data=None) -> tuple[SpectrumCurve, TqCurve]:
    """T(q) on the grid, then its Legendre transform with the landmarks α(1) and α(0) (and α_ac if a scheme is given)."""
    curve = tq_curve(model, q_grid, jobs=jobs, tol=tol, pb_data=pb_data)
    spec = legendre_transform(curve)
    for name, q0 in (("alpha_1", 1.0), ("alpha_0", 0.0)):
        lm = landmark_at(curve, q0)
        if lm is not None:
            spec.landmarks[name] = lm[0]
            spec.landmarks["DS_" + name[-1]] = lm[1] if not spec.degenerate else float(spec.DS[0])
    if scheme is not None and phi is not None:
        a_ac, lam = acip_alpha(scheme, phi)
        spec.landmarks["alpha_ac"] = a_ac
        spec.landmarks["lyapunov_ac"] = lam
    return spec, curve


def lyapunov_relabel(spec: SpectrumCurve, h_top: float) -> SpectrumCurve:
    """λ = h_top / α, dim L_λ = DS(α)."""
    lam = h_top / spec.alpha
    order = np.argsort(lam, kind="stable")
    out = SpectrumCurve(lam[order], spec.DS[order], spec.q[order], spec.T[order], "lyapunov", spec.degenerate,
                        dict(spec.landmarks), None if spec.converged is None else spec.converged[order])
    return out


def lyapunov_spectrum(model_factory, f: IntervalMap, q_grid, h_top: float, **kw) -> tuple[SpectrumCurve, TqCurve]:
    """Spectrum of λ_f through the constant potential -h_top.

    ``model_factory(phi)`` builds the pressure model for a potential.
    """
    phi = Potential.constant(-h_top)
    spec, curve = dimension_spectrum(model_factory(phi), q_grid, **kw)
    return lyapunov_relabel(spec, h_top), curve


def two_slope_lyapunov_oracle(slopes, lam) -> np.ndarray:
    """dim L_λ = (1/λ) inf_t (log Σ s_i^{-t} + tλ) for a full-branched linear map."""
    from scipy.optimize import minimize_scalar

    s = np.asarray(slopes, dtype=float)
    out = []
    for l in np.atleast_1d(lam):
        r = minimize_scalar(lambda t: np.log(np.sum(s ** (-t))) + t * l, bounds=(-60, 60), method="bounded",
                            options={"xatol": 1e-12})
        out.append(r.fun / l)
    return np.array(out)


def binomial_T(p: float, q):
    q = np.asarray(q, dtype=float)
    return np.log2(p**q + (1 - p) ** q)


def binomial_spectrum(p: float, q):
    """(α(q), DS(α(q))) for the binomial measure in closed form."""
    q = np.asarray(q, dtype=float)
    a, b = p**q, (1 - p) ** q
    dT = (a * np.log(p) + b * np.log(1 - p)) / ((a + b) * np.log(2))
    alpha = -dT
    return alpha, binomial_T(p, q) + q * alpha


# pointwise quantities -------------------------------------------------------------


@dataclass
class LyapunovEstimate:
    lower: float
    upper: float
    n: int
    averages: np.ndarray
    critical_hit: int | None = None


def pointwise_lyapunov(f: IntervalMap, x: float, n_max: int, window: float = 0.5) -> LyapunovEstimate:
    """Tail-window inf/sup of the running averages (1/n) Σ log|Df(f^j x)|."""
    orb = f.orbit(float(x), n_max - 1)
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(f.slope(orb)))
    hit = None
    bad = np.nonzero(~np.isfinite(logs))[0]
    n_ok = n_max
    if bad.size:
        hit = int(bad[0])
        n_ok = hit
    avgs = np.full(n_max, -np.inf)
    if n_ok > 0:
        avgs[:n_ok] = np.cumsum(logs[:n_ok]) / np.arange(1, n_ok + 1)
    if n_ok == 0:
        return LyapunovEstimate(-np.inf, -np.inf, 0, avgs, hit)
    lo = int(np.floor(window * n_ok))
    tail = avgs[max(lo - 1, 0) : n_ok]
    return LyapunovEstimate(float(tail.min()), float(tail.max()), n_ok, avgs, hit)


@dataclass
class PointwiseReport:
    x: float | None
    depth: int
    d_cylinder: float
    d_ball: float | None
    agree: bool | None
    lyapunov: float  # (1/n) log|DF^n| along the induced orbit
    sequence: np.ndarray
    exit: str = "completed"
    exit_index: int | None = None


def _letter_values(scheme: InducingScheme, phi: Potential | None, t: float = 0.0, q: float = 1.0):
    """Per-branch Ψ (= -t log|DF| + qΦ) and log|DF| at the branch midpoint (word depth 1)."""
    g = gibbs_weights(scheme, phi, 1, t=t, q=q)
    d = g.data
    t0, _, shift = _split(phi)
    psi = -(t + q * t0) * d.S_ldf[:, d.mid] + q * (d.S_phi[:, d.mid] - shift * d.tau)
    return g.words[:, 0], psi, d.S_ldf[:, d.mid], g


def sample_gibbs_word(scheme: InducingScheme, phi: Potential | None, n: int, seed: int = 0, t: float = 0.0, q: float = 1.0):
    """Word of n letters drawn i.i.d. from the one-letter Gibbs weights (exact for locally constant Ψ)."""
    letters, psi, _, g = _letter_values(scheme, phi, t, q)
    rng = np.random.default_rng(seed)
    return letters[rng.choice(letters.size, size=n, p=g.weights)]


def pointwise_dimension_word(scheme: InducingScheme, phi: Potential | None, word, t: float = 0.0, q: float = 1.0) -> PointwiseReport:
    """ď along a symbolic induced itinerary: Σ Ψ_{w_j} / -Σ log|DF_{w_j}|, using one-letter values."""
    letters, psi, ldf, _ = _letter_values(scheme, phi, t, q)
    pos = {int(k): i for i, k in enumerate(letters)}
    idx = np.array([pos[int(w)] for w in word])
    num = np.cumsum(psi[idx])
    den = np.cumsum(ldf[idx])
    seq = num / -den
    n = len(word)
    return PointwiseReport(None, n, float(seq[-1]), None, None, float(den[-1] / n), seq)


def ball_dimension(gibbs: GibbsApprox, x: float, radii) -> float:
    """Slope of log μ(B_r(x)) against log r, with μ uniform on each word cylinder."""
    lo, hi, w = gibbs.data.x_lo, gibbs.data.x_hi, gibbs.weights
    width = np.maximum(hi - lo, 1e-300)
    logs = []
    radii = np.asarray(radii, dtype=float)
    for r in radii:
        ov = np.clip(np.minimum(hi, x + r) - np.maximum(lo, x - r), 0.0, None)
        logs.append(np.log(np.sum(w * ov / width)))
    return float(np.polyfit(np.log(radii), logs, 1)[0])


def pointwise_dimension(scheme: InducingScheme, phi: Potential | None, x: float, depth: int, *, t: float = 0.0, q: float = 1.0,
                        gibbs: GibbsApprox | None = None, agree_tol: float = 5e-2) -> PointwiseReport:
    """ď = log μ_Φ(C_n^F[x]) / -log|DF^n(x)| along the F-orbit of x, plus a ball estimate.

    log μ_Φ(C_n^F[x]) is taken as S_nΨ(x) (Gibbs property with P = 0).
    """
    tr = orbit_in_scheme(scheme, x, depth)
    f = scheme.f
    t0, base, shift = _split(phi) if phi is not None else (0.0, None, 0.0)
    num, den = [], []
    for i, xj in zip(tr.branches, tr.points):
        br = scheme.branches[i]
        orb = np.empty(br.tau)
        z = xj
        for k, b in enumerate(br.itinerary):
            orb[k] = z
            z = float(np.clip(f.branches[b].value(z), 0.0, 1.0))
        with np.errstate(divide="ignore"):
            ld = float(np.log(np.abs(f.slope(orb))).sum())
        ph = float(np.sum(base(f, orb))) if base is not None else 0.0
        num.append(-(t + q * t0) * ld + q * (ph - shift * br.tau))
        den.append(ld)
    n = len(num)
    if n == 0:
        return PointwiseReport(x, 0, float("nan"), None, None, float("nan"), np.zeros(0), tr.exit, 0)
    num, den = np.cumsum(num), np.cumsum(den)
    seq = num / -den
    d_ball = None
    agree = None
    if gibbs is not None:
        finest = float(np.min(gibbs.data.x_hi - gibbs.data.x_lo))
        r_min = max(finest * 4, 1e-12)
        r_max = 0.1 * scheme.x_width
        if r_max > r_min * 4:
            d_ball = ball_dimension(gibbs, x, np.geomspace(r_max, r_min, 8))
            agree = bool(abs(d_ball - seq[-1]) < agree_tol)
    exit_index = None if tr.exit == "completed" else n
    return PointwiseReport(x, n, float(seq[-1]), d_ball, agree, float(den[-1] / n), seq, tr.exit, exit_index)


def tower_visit_frequency(tower: TowerGraph, x: float, n: int, R: int) -> float:
    """Fraction of times 0 <= k < n with f̂^k(ι(x)) in Î_R (escapes count as misses)."""
    o = tower_orbit(tower, x, n)
    lev = o.level[:n]
    return float(np.mean((lev >= 0) & (lev <= R)))


@dataclass
class LargeScaleReport:
    times: list[int]
    truncated: bool
    n_reached: int


def large_scale_visits(f: IntervalMap, x: float, delta: float, n_max: int, width_floor: float = 1e-14) -> LargeScaleReport:
    """Times n <= n_max at which f^n(C_n[x]) contains B_δ(f^n(x)).

    The image f^n(C_n[x]) is followed interval by interval (left cylinder at ties), and
    the run stops once the cylinder width |f^n C_n| / |Df^n| drops below the floor.
    """
    if delta <= 0:
        raise ValueError("δ must be positive")
    junc = f.junctions
    a, b = 0.0, 1.0
    xs = float(x)
    log_w = 0.0  # log of the cylinder width
    times = []
    for n in range(n_max + 1):
        if xs - delta >= a - 1e-15 and xs + delta <= b + 1e-15:
            times.append(n)
        if n == n_max:
            break
        k = int(np.searchsorted(junc, xs, side="left"))
        lo = max(a, junc[k - 1]) if k > 0 else a
        hi = min(b, junc[k]) if k < len(junc) else b
        br = f.branches[k]
        y0, y1 = float(br.value(lo)), float(br.value(hi))
        d = abs(float(br.slope(xs)))
        if d == 0.0:
            return LargeScaleReport(times, True, n)
        log_w += np.log(hi - lo) - np.log(b - a) if b > a else -np.inf
        a, b = max(0.0, min(y0, y1)), min(1.0, max(y0, y1))
        xs = float(np.clip(br.value(xs), 0.0, 1.0))
        if log_w < np.log(width_floor):
            return LargeScaleReport(times, True, n + 1)
    return LargeScaleReport(times, False, n_max)
