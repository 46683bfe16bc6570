import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from intervalmfa.hofbauer import build_tower
from intervalmfa.inducing import build_scheme_type_a
from intervalmfa.map_model import Potential, markov_pl, quadratic, tent
from intervalmfa.spectra import (
    ConvexityError,
    affinity_detector,
    binomial_spectrum,
    dimension_spectrum,
    large_scale_visits,
    legendre_transform,
    lyapunov_spectrum,
    pointwise_dimension,
    pointwise_dimension_word,
    pointwise_lyapunov,
    sample_gibbs_word,
    tower_visit_frequency,
    two_slope_lyapunov_oracle,
)
from intervalmfa.thermo import InducedData, InducedPressure, TqCurve, gibbs_weights

Q = np.round(np.arange(-2, 2.0001, 0.1), 10)


def full_scheme(f):
    return build_scheme_type_a(build_tower(f), 0, (0.0, 1.0), tau_cap=1)


def model_for(f, phi):
    return InducedPressure(InducedData.from_scheme(full_scheme(f), phi))


def synthetic(q, T):
    q = np.asarray(q, float)
    return TqCurve(q, np.asarray(T, float), np.ones(q.size, bool), np.full(q.size, -1), np.zeros(q.size), "custom", {})


@settings(max_examples=8, deadline=None)
@given(st.floats(0.1, 0.9).filter(lambda p: abs(p - 0.5) > 0.02))
def test_binomial_spectrum_matches_closed_form(p):
    f = tent(1.0)
    spec, curve = dimension_spectrum(model_for(f, Potential.bernoulli(p)), Q)
    a, d = binomial_spectrum(p, Q)
    o = np.argsort(a)
    assert np.max(np.abs(spec.alpha - a[o])) < 1e-2
    assert np.max(np.abs(spec.DS - d[o])) < 1e-2
    assert np.all(spec.slope_differences() <= 1e-6)
    assert np.all((spec.DS > -1e-9) & (spec.DS < 1 + 1e-9))


def test_landmarks_and_acip():
    f = tent(1.0)
    phi = Potential.bernoulli(0.3)
    sch = full_scheme(f)
    spec, _ = dimension_spectrum(model_for(f, phi), Q, scheme=sch, phi=phi)
    a0 = -(math.log(0.3) + math.log(0.7)) / (2 * math.log(2))
    a1 = -(0.3 * math.log(0.3) + 0.7 * math.log(0.7)) / math.log(2)
    assert spec.landmarks["alpha_0"] == pytest.approx(a0, abs=1e-6)
    assert spec.landmarks["alpha_ac"] == pytest.approx(a0, abs=1e-12)
    assert spec.landmarks["alpha_1"] == pytest.approx(a1, abs=1e-3)  # O(h^2) gradient error
    assert spec.landmarks["DS_1"] == pytest.approx(spec.landmarks["alpha_1"], abs=1e-9)
    assert spec.landmarks["DS_0"] == pytest.approx(1.0, abs=1e-9)


def test_legendre_rejects_concave_T():
    q = np.linspace(-1, 1, 7)
    with pytest.raises(ConvexityError):
        legendre_transform(synthetic(q, -(q**2)))


def test_legendre_affine_single_point():
    q = np.linspace(-2, 2, 9)
    spec = legendre_transform(synthetic(q, 1 - q))
    assert spec.degenerate and spec.alpha.size == 1
    assert spec.alpha[0] == pytest.approx(1.0) and spec.DS[0] == pytest.approx(1.0)


def test_affinity_needs_four_samples():
    with pytest.raises(ValueError):
        affinity_detector(synthetic([0, 1, 2], [1, 0, -1]))
    assert not affinity_detector(synthetic(Q, np.log2(0.3**Q + 0.7**Q))).degenerate


def test_two_slope_lyapunov():
    f = markov_pl([3.0, 1.5])
    sch = full_scheme(f)
    spec, _ = lyapunov_spectrum(lambda phi: InducedPressure(InducedData.from_scheme(sch, phi)), f, Q, math.log(2))
    assert np.max(np.abs(spec.DS - two_slope_lyapunov_oracle([3, 1.5], spec.alpha))) < 1e-4
    lam = spec.alpha
    assert lam.min() > math.log(1.5) and lam.max() < math.log(3)


def test_tent_lyapunov_degenerate():
    f = tent(1.0)
    sch = full_scheme(f)
    spec, _ = lyapunov_spectrum(lambda phi: InducedPressure(InducedData.from_scheme(sch, phi)), f, Q, math.log(2))
    assert spec.degenerate and spec.alpha[0] == pytest.approx(math.log(2)) and spec.DS[0] == pytest.approx(1.0)


def test_pointwise_lyapunov():
    r = pointwise_lyapunov(tent(1.0), 0.1234, 200)
    assert r.lower == pytest.approx(math.log(2), abs=1e-12) and r.upper == pytest.approx(math.log(2), abs=1e-12)
    r = pointwise_lyapunov(quadratic(4.0), 0.75, 100)
    assert r.lower == pytest.approx(math.log(2), abs=1e-12)
    hit = pointwise_lyapunov(quadratic(4.0), 0.5, 50)
    assert hit.critical_hit == 0 and hit.n == 0


def test_pointwise_dimension_fixed_point():
    f = tent(1.0)
    sch = full_scheme(f)
    phi = Potential.bernoulli(0.3)
    r = pointwise_dimension(sch, phi, 0.0, 60, gibbs=gibbs_weights(sch, phi, 12))
    assert r.d_cylinder == pytest.approx(math.log(0.3) / -math.log(2), abs=1e-12)
    assert r.agree


def test_sampled_word_deterministic():
    sch = full_scheme(tent(1.0))
    phi = Potential.bernoulli(0.3)
    w1, w2 = sample_gibbs_word(sch, phi, 500, seed=3), sample_gibbs_word(sch, phi, 500, seed=3)
    assert np.array_equal(w1, w2)
    r = pointwise_dimension_word(sch, phi, w1)
    nl = int((w1 == 0).sum())
    expect = -(nl * math.log(0.3) + (500 - nl) * math.log(0.7)) / (500 * math.log(2))
    assert r.d_cylinder == pytest.approx(expect, abs=1e-12)


def test_sampled_dimension_concentrates():
    # mean over independent samples is close to h/λ; single samples fluctuate at O(n^-1/2)
    sch = full_scheme(tent(1.0))
    phi = Potential.bernoulli(0.3)
    vals = [pointwise_dimension_word(sch, phi, sample_gibbs_word(sch, phi, 1000, seed=s)).d_cylinder for s in range(40)]
    target = -(0.3 * math.log(0.3) + 0.7 * math.log(0.7)) / math.log(2)
    assert abs(np.mean(vals) - target) < 0.01


def test_tower_visit_frequency():
    assert tower_visit_frequency(build_tower(tent(1.0)), 0.1234, 100, 0) == 1.0
    fr = tower_visit_frequency(build_tower(quadratic(3.9), level_cap=8), 0.3141, 200, 0)
    assert 0 < fr <= 1


def test_large_scale_visits_full_branch():
    f = tent(1.0)
    x, d = 0.1234, 0.1
    rep = large_scale_visits(f, x, d, 40)
    orb = f.orbit(x, rep.n_reached)
    expect = [n for n in range(rep.n_reached + 1) if d <= orb[n] <= 1 - d]
    assert rep.times == expect


def test_large_scale_visits_quadratic():
    rep = large_scale_visits(quadratic(3.9), 0.3141, 0.05, 500)
    assert rep.times and rep.truncated
