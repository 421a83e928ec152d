"""Capacity solver and optimality certificates."""

import math

import numpy as np
import pytest

from pzdcap.channel import make_expansion
from pzdcap.constellation import (
    ConstraintSet,
    CostBudget,
    CostFunction,
    RingConstellation,
    average_cost,
    feasible,
)
from pzdcap.infomath import build_grid, mutual_information
from pzdcap.optimizer import (
    SolveConfig,
    default_expansion,
    kkt_certificate,
    lhs_envelopes,
    optimize_probs,
    optimize_radii,
    solve_capacity,
)


@pytest.fixture(scope="module")
def exp_linear(params_linear):
    return make_expansion(params_linear, r0_max=3.5, r_max=14.0, tol=1e-10)


def test_solve_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(ring_counts=(0, 4))
    with pytest.raises(ValueError):
        SolveConfig(ring_counts=(5, 2))


def test_probabilities_match_brute_force_scan(exp_linear, params_linear):
    # two fixed rings, one free probability: compare against a dense scan
    radii = (0.0, 2.5)
    s = ConstraintSet(regime="peak", rho=2.5)
    probs = optimize_probs(exp_linear, radii, s)
    grid = build_grid(exp_linear, 2.5)

    def mi(p):
        return mutual_information(
            exp_linear, RingConstellation(radii, (1.0 - p, p)), grid
        ).mi

    scan = np.linspace(0.01, 0.99, 99)
    best_scan = max(mi(p) for p in scan)
    solved = mi(probs[1])
    assert solved >= best_scan - 1e-9
    assert probs[1] == pytest.approx(0.90376, abs=2e-3)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_single_ring_peak_sits_at_the_peak(exp_linear):
    s = ConstraintSet(regime="peak", rho=2.0)
    c = optimize_radii(exp_linear, 1, s)
    assert c.n_rings == 1
    assert c.radii[0] == pytest.approx(2.0, abs=1e-4)


def test_small_peak_single_ring_value(params):
    s = ConstraintSet(regime="peak", rho=0.5)
    exp = default_expansion(params, s)
    c, breakdown, report = solve_capacity(exp, s)
    assert report.certified
    assert c.n_rings == 1
    assert breakdown.mi == pytest.approx(0.18910812194043025, abs=1e-6)


def test_radius_search_drops_redundant_rings(exp_linear):
    # at rho = 0.5 one ring is optimal; asking for three must collapse
    s = ConstraintSet(regime="peak", rho=0.5)
    c = optimize_radii(exp_linear, 3, s)
    assert c.n_rings < 3


def test_headline_solution(peak_solution):
    exp, c, breakdown, report = peak_solution
    assert report.certified
    assert c.n_rings == 2
    assert breakdown.mi == pytest.approx(0.84916570694, abs=1e-8)
    assert max(c.radii) == pytest.approx(3.0, abs=1e-6)
    assert report.nu == 0.0
    assert report.worst_violation >= -1e-3
    assert np.all(report.mass_point_residuals <= 1e-3)


def test_perturbed_candidate_fails_certification(peak_solution, peak_constraint):
    exp, c, breakdown, _ = peak_solution
    shifted = RingConstellation((c.radii[0] * 0.55, c.radii[1]), c.probs)
    grid = build_grid(exp, max(shifted.radii))
    mi = mutual_information(exp, shifted, grid).mi
    report = kkt_certificate(exp, shifted, peak_constraint, mi)
    assert not report.certified


def test_average_regime_multiplier(quartic_solution, quartic_constraint):
    exp, c, breakdown, report = quartic_solution
    assert report.certified
    assert report.nu > 0
    budget = quartic_constraint.costs[0].budget
    slack = budget - average_cost(c, quartic_constraint.costs[0].cost)
    # complementary slackness: an active multiplier forces an active budget
    assert report.nu * abs(slack) <= 1e-3
    assert abs(slack) <= 1e-6
    assert breakdown.mi == pytest.approx(0.60727011657, abs=1e-7)


def test_lhs_respects_envelopes(peak_solution, peak_constraint):
    exp, c, breakdown, report = peak_solution
    r0 = report.samples[:, 0]
    lhs = report.samples[:, 1]
    upper, lower = lhs_envelopes(
        exp, c, peak_constraint, report.nu, r0, capacity_value=breakdown.mi
    )
    assert np.all(lhs <= upper + 1e-9)
    assert np.all(lhs >= lower - 1e-9)


def test_certificate_grid_covers_constraint(peak_solution, peak_constraint):
    _, _, _, report = peak_solution
    r0 = report.samples[:, 0]
    assert r0.min() <= 1e-6
    assert r0.max() == pytest.approx(peak_constraint.rho, abs=1e-9)
    assert len(r0) >= 400


def test_solution_is_feasible(quartic_solution, quartic_constraint):
    _, c, _, _ = quartic_solution
    assert feasible(c, quartic_constraint).feasible


def test_tight_budget_certifies_single_ring(params):
    # With every mass point pinned to the budget sphere the slackness
    # residuals cannot determine the multiplier, so the certificate must
    # recover it from the LHS samples instead of aborting.
    s = ConstraintSet(
        regime="average",
        costs=(CostBudget(cost=CostFunction(kind="power", q=4.0), budget=1.0),),
    )
    exp = default_expansion(params, s)
    c, breakdown, report = solve_capacity(exp, s)
    assert report.certified
    assert report.tail_covered
    assert c.n_rings == 1
    assert c.radii[0] == pytest.approx(1.0, abs=1e-6)
    assert report.nu > 0
    assert breakdown.mi == pytest.approx(0.480374933, abs=1e-7)
