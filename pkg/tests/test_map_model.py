import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from intervalmfa.map_model import (
    DomainError,
    JunctionError,
    MapValidationError,
    Potential,
    bimodal_cubic,
    check_range_condition,
    class_f_report,
    critical_points,
    estimate_topological_entropy,
    from_branches,
    growth_diagnostic,
    lap_counts,
    map_from_config,
    markov_pl,
    normalize_potential,
    potential_from_config,
    quadratic,
    tent,
)


def test_quadratic_values():
    f = quadratic(3.9)
    assert f(0.5) == pytest.approx(0.975, abs=1e-15)
    assert f.derivative(0.25) == pytest.approx(1.95, abs=1e-15)


def test_tent_junction_derivative_undefined():
    with pytest.raises(JunctionError):
        tent(1.0).derivative(0.5)


def test_domain_error():
    with pytest.raises(DomainError):
        quadratic(3.9)(1.2)


def test_validation_rejects_gap_and_nonmonotone():
    with pytest.raises(MapValidationError):
        from_branches([{"interval": [0, 0.4], "poly": [0, 2]}, {"interval": [0.5, 1], "poly": [2, -2]}])
    with pytest.raises(MapValidationError):
        from_branches([{"interval": [0, 1], "poly": [0, 4, -4]}])


def test_config_roundtrip():
    for cfg in ({"family": "tent", "s": 1.0}, {"family": "quadratic", "lambda": 3.9}, {"family": "cubic", "kappa": 3.0}):
        f = map_from_config(cfg)
        g = map_from_config(f.to_json())
        xs = np.linspace(0, 1, 101)
        assert np.array_equal(f(xs), g(xs))


def test_bimodal_cubic_has_two_quadratic_critical_points():
    f = bimodal_cubic(3.0)
    crit = critical_points(f)
    assert len(crit) == 2
    c = math.sqrt((3.0 - 1) / 9.0)
    assert [p.c for p in crit] == pytest.approx([(1 - c) / 2, (1 + c) / 2], abs=1e-10)
    for p in crit:
        assert p.order == pytest.approx(2.0, abs=1e-2)


def test_critical_order_quadratic():
    (c,) = critical_points(quadratic(3.9))
    assert c.c == 0.5 and c.order == pytest.approx(2.0, abs=1e-6)


def test_critical_points_piecewise_linear_empty_with_warning():
    with pytest.warns(UserWarning):
        assert critical_points(tent(1.0)) == []


@pytest.mark.parametrize("f,h", [(tent(1.0), math.log(2)), (quadratic(4.0), math.log(2)), (markov_pl([3, 1.5]), math.log(2))])
def test_entropy_full_branch(f, h):
    est = estimate_topological_entropy(f)
    assert est.value == pytest.approx(h, abs=1e-12)


def test_entropy_attracting_cycle_warns():
    with pytest.warns(UserWarning, match="class F"):
        est = estimate_topological_entropy(quadratic(3.5))
    assert est.warnings


@settings(max_examples=15, deadline=None)
@given(st.floats(3.6, 4.0), st.integers(1, 5), st.integers(1, 5))
def test_lap_counts_submultiplicative(lam, m, n):
    laps, _ = lap_counts(quadratic(lam), m + n)
    assert laps[m + n - 1] <= laps[m - 1] * laps[n - 1]


@settings(max_examples=30, deadline=None)
@given(st.floats(3.0, 4.0), st.floats(0.01, 0.99))
def test_inverse_branch_identity(lam, x):
    f = quadratic(lam)
    k = int(f.branch_index(x))
    assert f.inverse_branch(k, f(x)) == pytest.approx(x, abs=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.floats(2.0, 4.0), st.floats(0.001, 0.999))
def test_orientation_matches_derivative_sign(kappa, x):
    f = bimodal_cubic(kappa)
    k = int(f.branch_index(x))
    br = f.branches[k]
    if br.a < x < br.b:
        assert np.sign(f.slope(x)) == br.orientation


def test_growth_tent_exact():
    rep = growth_diagnostic(tent(1.0), 30)
    s = rep.points[0].series
    assert np.array_equal(s, 2.0 ** np.arange(1, s.size + 1))
    assert rep.regime == "exponential"


def test_growth_preperiodic_quadratic4():
    assert growth_diagnostic(quadratic(4.0), 20).preperiodic


def test_class_f_quadratic():
    assert class_f_report(quadratic(3.9)).plausible


def test_range_condition():
    f = tent(1.0)
    ok, margin = check_range_condition(f, Potential.constant(1.0), math.log(2))
    assert ok and margin == pytest.approx(math.log(2))
    with pytest.warns(UserWarning):
        ok, _ = check_range_condition(f, Potential.bernoulli(0.3), math.log(2))
    assert not ok
    ok, margin = check_range_condition(f, Potential.bernoulli(0.4), math.log(2))
    assert ok and margin == pytest.approx(math.log(2) - math.log(1.5), abs=1e-12)


def test_normalize_potential():
    f = tent(1.0)
    phi = normalize_potential(f, Potential.constant(0.0))
    assert phi.normalization_shift == pytest.approx(math.log(2), abs=1e-10)
    assert normalize_potential(f, phi) is phi
    assert normalize_potential(f, Potential.bernoulli(0.3)).normalization_shift == 0.0


def test_potential_config_roundtrip():
    for cfg in ({"kind": "bernoulli", "p": 0.3}, {"kind": "cosine", "amplitude": 0.2}, {"kind": "constant", "a": -1.0},
                {"kind": "polynomial", "coef": [0.1, 0.2]}):
        phi = potential_from_config(cfg)
        psi = potential_from_config(phi.to_json())
        xs = np.linspace(0, 1, 33)
        f = tent(1.0)
        assert np.allclose(phi(f, xs), psi(f, xs))


def test_geometric_potential_values():
    f = quadratic(3.9)
    xs = np.array([0.1, 0.3, 0.7])
    assert np.allclose(Potential.geometric(1.0)(f, xs), -np.log(np.abs(f.slope(xs))))
