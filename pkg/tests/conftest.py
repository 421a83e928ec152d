"""Shared fixtures.

The two capacity solves (peak rho = 3 and quartic average budget 4, both at
gamma = 1, sigma^2 L = 1) are the expensive reference solutions; they are
session-scoped so the optimizer tests and the acceptance gate share them.
"""

import pytest

from pzdcap.channel import ChannelParams
from pzdcap.constellation import ConstraintSet, CostBudget, CostFunction
from pzdcap.optimizer import default_expansion, solve_capacity


@pytest.fixture(scope="session")
def params():
    return ChannelParams(gamma=1.0, sigma2=1.0, length=1.0)


@pytest.fixture(scope="session")
def params_linear():
    return ChannelParams(gamma=0.0, sigma2=1.0, length=1.0)


@pytest.fixture(scope="session")
def peak_constraint():
    return ConstraintSet(regime="peak", rho=3.0)


@pytest.fixture(scope="session")
def quartic_constraint():
    cost = CostFunction(kind="power", q=4.0)
    return ConstraintSet(regime="average", costs=(CostBudget(cost=cost, budget=4.0),))


@pytest.fixture(scope="session")
def peak_solution(params, peak_constraint):
    """(expansion, constellation, breakdown, report) for the peak solve."""
    exp = default_expansion(params, peak_constraint)
    c, breakdown, report = solve_capacity(exp, peak_constraint)
    return exp, c, breakdown, report


@pytest.fixture(scope="session")
def quartic_solution(params, quartic_constraint):
    """(expansion, constellation, breakdown, report) for the average solve."""
    exp = default_expansion(params, quartic_constraint)
    c, breakdown, report = solve_capacity(exp, quartic_constraint)
    return exp, c, breakdown, report
