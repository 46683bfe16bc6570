import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from intervalmfa.cylinders import (
    RangeError,
    birkhoff_sum,
    birkhoff_trace,
    cylinder_at,
    invert_branch,
    iterate_on,
    refine_partition,
)
from intervalmfa.map_model import Potential, bimodal_cubic, lap_counts, quadratic, tent


def test_tent_depth_two():
    p = refine_partition(tent(1.0), 2)
    assert np.allclose(p.a, [0, 0.25, 0.5, 0.75]) and np.allclose(p.b, [0.25, 0.5, 0.75, 1.0])
    assert [tuple(r) for r in p.itin] == [(0, 0), (0, 1), (1, 1), (1, 0)]
    assert np.all(p.img_lo == 0) and np.all(p.img_hi == 1)


def test_count_equals_lap_number():
    f = quadratic(3.9)
    laps, _ = lap_counts(f, 12)
    for n in (4, 8, 12):
        assert len(refine_partition(f, n)) == laps[n - 1]


def test_left_tie_break():
    p = refine_partition(tent(1.0), 1)
    assert cylinder_at(p, 0.5).itinerary == (0,)


@pytest.mark.parametrize("f", [quadratic(3.9), bimodal_cubic(3.0), tent(1.0)])
def test_refinement_nested_and_covering(f):
    prev = refine_partition(f, 5)
    part = refine_partition(f, 6)
    assert part.a[0] == 0.0 and part.b[-1] == 1.0
    assert np.allclose(part.a[1:], part.b[:-1], atol=1e-13)
    par = part.parent
    assert np.all(part.a >= prev.a[par] - 1e-13) and np.all(part.b <= prev.b[par] + 1e-13)
    assert np.array_equal(part.itin[:, :-1], prev.itin[par])


@settings(max_examples=25, deadline=None)
@given(st.floats(3.7, 4.0), st.integers(1, 9), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_inverse_identity(lam, n, u, v):
    f = quadratic(lam)
    part = refine_partition(f, n)
    cyl = part[int(u * (len(part) - 1))]
    lo, hi = cyl.image
    y = lo + v * (hi - lo)
    x = invert_branch(f, cyl, y)
    assert cyl.a - 1e-12 <= x <= cyl.b + 1e-12
    assert float(iterate_on(f, cyl.itinerary, x)) == pytest.approx(y, abs=1e-8)


def test_invert_outside_image():
    f = quadratic(3.9)
    cyl = refine_partition(f, 1)[0]
    with pytest.raises(RangeError):
        invert_branch(f, cyl, 0.99)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.99), st.integers(1, 15), st.integers(1, 15))
def test_birkhoff_additivity(x, m, n):
    f = quadratic(3.9)
    phi = Potential.cosine(0.3)
    total = birkhoff_sum(f, phi, x, m + n)
    split = birkhoff_sum(f, phi, x, m) + birkhoff_sum(f, phi, f.iterate(x, m), n)
    assert total == pytest.approx(split, abs=1e-10)


def test_birkhoff_critical_sentinel():
    sums, hit = birkhoff_trace(quadratic(4.0), Potential.geometric(1.0), 0.5, 5)
    assert hit == 0 and np.all(np.isneginf(sums))
    assert math.isinf(birkhoff_sum(quadratic(4.0), Potential.geometric(1.0), 0.5, 3))


def test_tent_geometric_sum():
    assert birkhoff_sum(tent(1.0), Potential.geometric(1.0), 0.1, 7) == pytest.approx(-7 * math.log(2))
