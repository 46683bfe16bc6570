import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from intervalmfa.hofbauer import (
    TowerPoint,
    build_tower,
    census_csv,
    export_dot,
    level_census,
    lift,
    project,
    tower_orbit,
    tower_step,
    transitive_part,
)
from intervalmfa.map_model import bimodal_cubic, quadratic, tent


@pytest.mark.parametrize("f", [tent(1.0), quadratic(4.0)])
def test_full_branch_single_domain(f):
    tw = build_tower(f)
    assert len(tw.domains) == 1
    assert len(tw.out_edges(0)) == 2 and all(e.dst == 0 for e in tw.out_edges(0))


def test_quadratic_first_levels():
    tw = build_tower(quadratic(3.9), level_cap=2)
    ivs = [(d.a, d.b) for d in tw.domains]
    assert ivs[0] == (0.0, 1.0)
    assert ivs[1] == pytest.approx((0.0, 0.975), abs=1e-15)
    assert ivs[2] == pytest.approx((0.0950625, 0.975), abs=1e-12)


def test_census_bounds():
    assert not level_census(build_tower(quadratic(3.9), level_cap=12)).violations
    c = level_census(build_tower(bimodal_cubic(3.0), level_cap=8))
    assert c.bound == 4 and not c.violations


def test_step_and_projection():
    tw = build_tower(quadratic(3.9))
    p = tower_step(tw, lift(tw, 0.2))
    assert project(p) == pytest.approx(0.624) and p.domain == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 1.0))
def test_semiconjugacy(i, u):
    tw = build_tower(quadratic(3.9), level_cap=10)
    d = i % len(tw.domains)
    D = tw.domains[d]
    x = D.a + u * (D.b - D.a)
    e = tw.edge_for(d, x)
    if e.dst < 0:
        return
    p = tower_step(tw, TowerPoint(x, d))
    assert abs(project(p) - tw.f(x)) <= 1e-12
    D2 = tw.domains[p.domain]
    assert D2.a - 1e-12 <= project(p) <= D2.b + 1e-12


def test_dedup_sound():
    tw = build_tower(quadratic(3.9), level_cap=12)
    iv = np.array([(d.a, d.b) for d in tw.domains])
    for i in range(len(iv)):
        diff = np.max(np.abs(iv - iv[i]), axis=1)
        diff[i] = 1.0
        assert diff.min() > tw.tol


def test_transitive_part_closed():
    tp = transitive_part(build_tower(quadratic(3.9), level_cap=12))
    assert tp.closed and 0 not in tp.ids and 2 in tp.ids


def test_orbit_levels():
    tw = build_tower(quadratic(3.9), level_cap=4)
    o = tower_orbit(tw, 0.3, 50)
    assert o.level[0] == 0
    assert np.allclose(o.x, quadratic(3.9).orbit(0.3, 50))
    inside = o.domain >= 0
    assert np.all((o.x[inside] >= o.interval[inside, 0] - 1e-12) & (o.x[inside] <= o.interval[inside, 1] + 1e-12))


def test_exports():
    tw = build_tower(quadratic(3.9), level_cap=8)
    dot = export_dot(tw)
    assert dot.count('label="L') == sum(level_census(tw).counts.values())
    rows = census_csv(tw).strip().splitlines()
    assert rows[0].count(",") == rows[-1].count(",")
