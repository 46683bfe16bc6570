import math
import time
import warnings

import numpy as np
import pytest

from intervalmfa.cylinders import cylinder_at, refine_partition
from intervalmfa.hofbauer import build_tower
from intervalmfa.inducing import (
    PreconditionError,
    build_scheme_type_a,
    build_scheme_type_b,
    distortion_bound,
    induced_potential,
    is_cylinder,
    lift_independence,
    orbit_in_scheme,
    return_time_tail,
)
from intervalmfa.map_model import Potential, quadratic, tent


@pytest.fixture(scope="module")
def half():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_scheme_type_a(build_tower(tent(1.0)), 0, (0.0, 0.5), tau_cap=40)


def test_first_return_masses(half):
    w = half.widths / half.x_width
    assert np.allclose(w * 2.0 ** half.taus, 1.0, rtol=1e-12)
    assert all(br.full for br in half.branches)
    assert float(np.sum(w * half.taus)) == pytest.approx(2.0, abs=1e-6)


def test_tail_fit(half):
    tail = return_time_tail(half)
    assert tail.slope == pytest.approx(-math.log(2), rel=1e-9)
    assert np.array_equal(tail.taus[:12], np.arange(1, 13)) and np.all(tail.counts == 1)


def test_distortion_linear(half):
    K, _ = distortion_bound(half)
    assert K == pytest.approx(1.0, abs=1e-12)


def test_type_b_equals_type_a_on_tent(half):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        b = build_scheme_type_b(build_tower(tent(1.0)), (0.0, 0.5), 0.5, tau_cap=40)
    assert np.allclose(b.widths, half.widths) and np.array_equal(b.taus, half.taus)


def test_precondition():
    tw = build_tower(quadratic(3.9), level_cap=4)
    with pytest.raises(PreconditionError):
        build_scheme_type_a(tw, 1, (0.9, 0.99))
    with pytest.raises(PreconditionError):
        build_scheme_type_a(tw, 0, (0.1, 0.2))  # not a cylinder
    with pytest.raises(PreconditionError):
        build_scheme_type_a(build_tower(tent(1.0)), 0, (0.0, 1.0), strict=True)


def test_is_cylinder():
    assert is_cylinder(tent(1.0), 0.25, 0.5) == (2, 1)
    assert is_cylinder(tent(1.0), 0.2, 0.5) is None


def test_bernoulli_induced_values():
    sch = build_scheme_type_a(build_tower(tent(1.0)), 0, (0.0, 1.0), tau_cap=1)
    ip = induced_potential(sch, Potential.bernoulli(0.3))
    assert np.allclose(ip.sup, [math.log(0.3), math.log(0.7)]) and np.allclose(ip.inf, ip.sup)


def test_orbit_in_scheme_fixed_point():
    sch = build_scheme_type_a(build_tower(tent(1.0)), 0, (0.0, 1.0), tau_cap=1)
    tr = orbit_in_scheme(sch, 0.0, 20)
    assert tr.exit == "completed" and tr.branches == [0] * 20


def test_quadratic_type_b_builds_quickly():
    f = quadratic(3.9)
    tw = build_tower(f, level_cap=12)
    c = cylinder_at(refine_partition(f, 4), 0.6)
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sch = build_scheme_type_b(tw, (c.a, c.b), 0.5, tau_cap=24)
    assert time.perf_counter() - t0 < 30
    assert sch.coverage > 0.8 and sch.n_partial == 0
    # branches are disjoint and inside X
    assert np.all(sch._a[1:] >= sch._b[:-1] - 1e-15)
    assert sch._a[0] >= c.a - 1e-15 and sch._b[-1] <= c.b + 1e-15
    assert lift_independence(tw, sch.X, sch.base_domains, 24, n=50) == 0
