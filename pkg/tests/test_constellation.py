"""Ring constellations, cost functions, and constraint projection."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pzdcap.constellation import (
    ConstraintSet,
    CostBudget,
    CostFunction,
    RingConstellation,
    average_cost,
    feasible,
    merge_rings,
    project,
)


def test_constellation_validation():
    c = RingConstellation((0.0, 1.0, 2.0), (0.2, 0.3, 0.5))
    assert c.n_rings == 3
    with pytest.raises(ValueError):
        RingConstellation((1.0, 0.5), (0.5, 0.5))
    with pytest.raises(ValueError):
        RingConstellation((0.0, 1.0), (0.5, 0.4))
    with pytest.raises(ValueError):
        RingConstellation((0.0, 1.0), (-0.1, 1.1))


def test_json_round_trip():
    c = RingConstellation((0.5, 1.5), (0.25, 0.75))
    assert RingConstellation.from_json(c.to_json()) == c


def test_merge_rings_collapses_duplicates():
    c = merge_rings([2.0, 1.0, 1.0 + 1e-12, 0.0], [0.1, 0.3, 0.2, 0.4], atol=1e-9)
    assert c.n_rings == 3
    assert c.radii == (0.0, 1.0, 2.0)
    assert c.probs[1] == pytest.approx(0.5)
    assert sum(c.probs) == pytest.approx(1.0)


def test_power_cost():
    cost = CostFunction(kind="power", q=4.0)
    assert cost(2.0) == pytest.approx(16.0)
    np.testing.assert_allclose(cost(np.array([0.0, 1.0, 3.0])), [0.0, 1.0, 81.0])
    with pytest.raises(ValueError):
        CostFunction(kind="power", q=0.0)


def test_table_cost_tracks_samples_and_extrapolates_linearly():
    knots_r = tuple(np.linspace(0.0, 4.0, 17))
    knots_c = tuple(r**2 for r in knots_r)
    cost = CostFunction(kind="table", knots_r=knots_r, knots_c=knots_c)
    r = np.linspace(0.0, 4.0, 41)
    np.testing.assert_allclose(cost(r), r**2, atol=5e-3)
    # beyond the last knot: linear with the final slope
    end_slope = (cost(4.0) - cost(4.0 - 1e-6)) / 1e-6
    assert cost(6.0) == pytest.approx(16.0 + 2.0 * end_slope, rel=1e-4)


def test_table_cost_validation():
    with pytest.raises(ValueError):
        CostFunction(kind="table", knots_r=(0.0, 1.0), knots_c=(0.0, 1.0))
    with pytest.raises(ValueError):
        CostFunction(kind="table", knots_r=(0.5, 1.0, 2.0), knots_c=(0.1, 1.0, 4.0))
    with pytest.raises(ValueError):
        CostFunction(kind="unknown")


def test_average_cost():
    c = RingConstellation((0.0, 2.0), (0.25, 0.75))
    cost = CostFunction(kind="power", q=2.0)
    assert average_cost(c, cost) == pytest.approx(3.0)


def test_constraint_set_validation():
    with pytest.raises(ValueError):
        ConstraintSet(regime="bogus")
    with pytest.raises(ValueError):
        ConstraintSet(regime="peak", rho=0.0)
    # the pure average regime insists on a superquadratic cost
    log_like = CostFunction(
        kind="table",
        knots_r=(0.0, 1.0, 2.0, 4.0, 8.0),
        knots_c=(0.0, 1.0, 1.5, 2.0, 2.4),
    )
    with pytest.raises(ValueError):
        ConstraintSet(regime="average", costs=(CostBudget(cost=log_like, budget=1.0),))


def test_feasible_slacks():
    s = ConstraintSet(
        regime="joint",
        rho=2.0,
        costs=(CostBudget(cost=CostFunction(kind="power", q=2.0), budget=2.0),),
    )
    good = RingConstellation((0.0, 1.0), (0.5, 0.5))
    report = feasible(good, s)
    assert report.feasible
    assert report.peak_slack == pytest.approx(1.0)
    assert report.cost_slacks[0] == pytest.approx(1.5)
    bad = RingConstellation((0.0, 3.0), (0.5, 0.5))
    assert not feasible(bad, s).feasible


def test_project_restores_feasibility():
    s = ConstraintSet(
        regime="joint",
        rho=2.0,
        costs=(CostBudget(cost=CostFunction(kind="power", q=4.0), budget=3.0),),
    )
    c = RingConstellation((0.0, 1.5, 4.0), (0.2, 0.3, 0.5))
    proj = project(c, s)
    assert feasible(proj, s).feasible
    # projection leaves feasible inputs alone
    again = project(proj, s)
    assert again.radii == pytest.approx(proj.radii)
    assert again.probs == pytest.approx(proj.probs)


@given(
    radii=st.lists(
        st.floats(min_value=0.0, max_value=6.0), min_size=1, max_size=5, unique=True
    ),
    weights=st.lists(st.floats(min_value=0.05, max_value=1.0), min_size=5, max_size=5),
    rho=st.floats(min_value=0.5, max_value=4.0),
)
@settings(max_examples=100, deadline=None)
def test_project_idempotent(radii, weights, rho):
    radii = sorted(radii)
    probs = np.asarray(weights[: len(radii)])
    probs = probs / probs.sum()
    c = RingConstellation(tuple(radii), tuple(probs))
    s = ConstraintSet(regime="peak", rho=rho)
    proj = project(c, s)
    assert feasible(proj, s).feasible
    assert max(proj.radii) <= rho * (1 + 1e-12)
    again = project(proj, s)
    np.testing.assert_allclose(again.radii, proj.radii, atol=1e-12)
    np.testing.assert_allclose(again.probs, proj.probs, atol=1e-12)
