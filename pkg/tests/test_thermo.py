import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from intervalmfa.hofbauer import build_tower
from intervalmfa.inducing import build_scheme_type_a
from intervalmfa.map_model import Potential, quadratic, tent
from intervalmfa.thermo import (
    BracketError,
    DivergenceError,
    InducedData,
    InducedPressure,
    OriginalPressure,
    aitken,
    conformal_from_gibbs,
    conformality_residual,
    gibbs_weights,
    normalize_potential,
    pb_diagnostic,
    pb_diagnostic_from_tail,
    pressure_induced,
    pressure_monotone_in_t,
    pressure_original,
    project_measure,
    propagate_conformal_tower,
    solve_T,
    tq_curve,
    variation_series,
)

L2 = math.log(2)


def binomial_T(p, q):
    return math.log2(p**q + (1 - p) ** q)


@pytest.fixture(scope="module")
def tent_map():
    return tent(1.0)


@pytest.fixture(scope="module")
def full(tent_map):
    return build_scheme_type_a(build_tower(tent_map), 0, (0.0, 1.0), tau_cap=1)


@pytest.fixture(scope="module")
def half(tent_map):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_scheme_type_a(build_tower(tent_map), 0, (0.0, 0.5), tau_cap=40)


def test_aitken_geometric():
    seq = 1.0 + 0.5 ** np.arange(10)
    assert aitken(seq) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize(
    "phi,value",
    [(Potential.constant(0.0), L2), (Potential.bernoulli(0.3), 0.0), (Potential.geometric(0.5), 0.5 * L2)],
)
def test_original_pressure_tent(tent_map, phi, value):
    est = pressure_original(tent_map, phi, 10)
    assert est.converged and est.value == pytest.approx(value, abs=1e-10)


def test_original_pressure_quadratic4_geometric():
    # P(-log|Df|) = 0 for a map with an acip; the cylinder estimator is only rough near the critical point
    est = pressure_original(quadratic(4.0), Potential.geometric(1.0), 12)
    assert abs(est.value) < 0.1


def test_induced_pressure_bernoulli(full):
    assert pressure_induced(full, Potential.bernoulli(0.3)).value == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("q", [-1.0, 0.0, 0.5, 1.0, 2.0])
def test_solve_T_both_methods(tent_map, full, q):
    phi = Potential.bernoulli(0.3)
    ind = InducedPressure(InducedData.from_scheme(full, phi))
    orig = OriginalPressure(tent_map, phi, 10)
    for model in (ind, orig):
        sol = solve_T(model, q)
        assert sol.converged and sol.T == pytest.approx(binomial_T(0.3, q), abs=1e-10)


def test_solve_T_first_return_scheme(half):
    model = InducedPressure(InducedData.from_scheme(half, Potential.bernoulli(0.3)))
    for q in (-1.0, 0.0, 0.5, 1.0):
        assert solve_T(model, q).T == pytest.approx(binomial_T(0.3, q), abs=1e-6)


def test_bracket_error():
    class Flat:
        def __call__(self, t, q):
            return 1.0

    with pytest.raises(BracketError):
        solve_T(Flat(), 1.0)


def test_divergence_error():
    tau = np.repeat(np.arange(1, 12), 1)
    data = InducedData.from_values(tau, 0.1 * tau)  # weights grow with τ
    with pytest.raises(DivergenceError):
        InducedPressure(data)(0.0, 1.0)


@settings(max_examples=12, deadline=None)
@given(st.floats(0.05, 0.95))
def test_tq_convex_and_exact(p):
    sch = build_scheme_type_a(build_tower(tent(1.0)), 0, (0.0, 1.0), tau_cap=1)
    phi = Potential.bernoulli(p)
    q = np.linspace(-2, 2, 9)
    curve = tq_curve(InducedPressure(InducedData.from_scheme(sch, phi)), q)
    assert np.all(curve.second_differences() >= -1e-6)
    assert np.allclose(curve.T, [binomial_T(p, v) for v in q], atol=1e-8)


def test_constant_potential_affine(tent_map, full):
    phi = normalize_potential(tent_map, Potential.constant(0.0))
    curve = tq_curve(InducedPressure(InducedData.from_scheme(full, phi)), np.linspace(-2, 2, 11))
    assert np.allclose(curve.T, 1 - curve.q, atol=1e-10)


def test_pb_diagnostic(half):
    data = InducedData.from_scheme(half, Potential.bernoulli(0.3))
    rep = pb_diagnostic(data, 0.0, 1.0)
    assert rep.in_pb and rep.beta > 0
    assert rep.slope <= -math.log(1 / 0.7) + 0.05
    n = np.arange(1, 40)
    power = pb_diagnostic_from_tail(n, -2 * np.log(n))
    assert power.in_pb is False


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 0.9), st.integers(2, 7), st.integers(1, 6))
def test_gibbs_depth_consistency(p, n, k):
    k = min(k, n - 1)
    sch = build_scheme_type_a(build_tower(tent(1.0)), 0, (0.0, 1.0), tau_cap=1)
    phi = Potential.bernoulli(p)
    deep = gibbs_weights(sch, phi, n).aggregate(k)
    shallow = gibbs_weights(sch, phi, k)
    for w, m in zip(map(tuple, shallow.words), shallow.weights):
        assert deep[w] == pytest.approx(m, abs=1e-12)


def test_gibbs_exact_weights(full):
    g = gibbs_weights(full, Potential.bernoulli(0.3), 8)
    nl = (g.words == 0).sum(axis=1)
    assert np.max(np.abs(g.weights - 0.3**nl * 0.7 ** (8 - nl))) < 1e-12
    assert g.K == pytest.approx(1.0, abs=1e-9)


def test_kac_abramov(half):
    g = gibbs_weights(half, None, 1, t=1.0, q=0.0)
    pm = project_measure(half, g)
    assert pm.int_tau == pytest.approx(2.0, abs=1e-6)
    assert pm.h_F == pytest.approx(2 * L2, rel=1e-6)
    assert pm.h == pytest.approx(L2, rel=1e-6)
    assert np.allclose(pm.masses, 1 / pm.masses.size, atol=1e-6)


def test_projected_bernoulli_integrals(full):
    phi = Potential.bernoulli(0.3)
    pm = project_measure(full, gibbs_weights(full, phi, 1), phi)
    ent = -(0.3 * math.log(0.3) + 0.7 * math.log(0.7))
    assert pm.h == pytest.approx(ent, abs=1e-12)
    assert pm.lyapunov == pytest.approx(L2, abs=1e-12)
    assert pm.h + pm.int_phi == pytest.approx(0.0, abs=1e-12)


def test_conformal_geometric(half, tent_map):
    phi = Potential.geometric(1.0)
    g = gibbs_weights(half, phi, 1)
    m = propagate_conformal_tower(build_tower(tent_map), half, conformal_from_gibbs(half, g), phi)
    assert conformality_residual(tent_map, m, phi, max_depth=8) < 1e-12


def test_conformal_bernoulli_full_base(full, tent_map):
    phi = Potential.bernoulli(0.3)
    m = conformal_from_gibbs(full, gibbs_weights(full, phi, 6))
    assert conformality_residual(tent_map, m, phi, max_depth=5) < 1e-12


def test_induced_normalisation(tent_map, full):
    assert normalize_potential(tent_map, Potential.bernoulli(0.3), scheme=full).normalization_shift == pytest.approx(0.0, abs=1e-9)
    phi = normalize_potential(tent_map, Potential.constant(0.0), scheme=full)
    assert phi.normalization_shift == pytest.approx(L2, abs=1e-9)


def test_monotone_in_t(full):
    model = InducedPressure(InducedData.from_scheme(full, Potential.bernoulli(0.3)))
    for q in (-1.0, 0.5, 2.0):
        assert pressure_monotone_in_t(model, q, np.linspace(-2, 3, 11))


def test_variation_zero_for_locally_constant(full):
    rep = variation_series(full, Potential.bernoulli(0.3))
    assert np.allclose(rep.V, 0.0)
