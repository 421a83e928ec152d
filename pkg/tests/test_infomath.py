"""Quadrature grids, entropies, and mutual information against oracles."""

import math

import numpy as np
import pytest
from scipy import integrate

from pzdcap.channel import amplitude_pdf, make_expansion
from pzdcap.constellation import RingConstellation
from pzdcap.infomath import (
    GridSpec,
    build_grid,
    k1_constant,
    marginal_score,
    mutual_information,
    output_amplitude_entropy,
    output_amplitude_pdf,
)

TWO_PI = 2.0 * math.pi

# independent oracle: Cartesian 2-D quadrature of I(X;Y) for the linear
# channel with inputs {0, 3} at equal probabilities, sigma^2 L = 1
LINEAR_TWO_RING_MI = 1.5247774446165545

# h(R) for the Rayleigh output of a zero input: 1 + ln(sigma sqrt(L)/2) +
# euler_gamma/2 at sigma^2 L = 1
RAYLEIGH_ENTROPY = 1.0 + math.log(0.5) + 0.5772156649015329 / 2.0


@pytest.fixture(scope="module")
def exp_linear(params_linear):
    return make_expansion(params_linear, r0_max=3.5, r_max=14.0, tol=1e-12)


@pytest.fixture(scope="module")
def exp_headline(params):
    return make_expansion(params, r0_max=3.5, r_max=14.0, tol=1e-12)


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(nodes_per_panel=1)
    with pytest.raises(ValueError):
        GridSpec(angular_min=8)


def test_zero_input_has_zero_information(exp_headline):
    c = RingConstellation((0.0,), (1.0,))
    grid = build_grid(exp_headline, 0.0)
    breakdown = mutual_information(exp_headline, c, grid)
    assert abs(breakdown.mi) < 1e-10


def test_linear_two_ring_matches_cartesian_oracle(exp_linear):
    c = RingConstellation((0.0, 3.0), (0.5, 0.5))
    grid = build_grid(exp_linear, 3.0)
    breakdown = mutual_information(exp_linear, c, grid)
    assert breakdown.mi == pytest.approx(LINEAR_TWO_RING_MI, abs=1e-9)
    assert breakdown.quadrature_error_estimate < 1e-9


def test_rayleigh_output_entropy(exp_headline):
    c = RingConstellation((0.0,), (1.0,))
    grid = build_grid(exp_headline, 0.0)
    assert output_amplitude_entropy(exp_headline, c, grid) == pytest.approx(
        RAYLEIGH_ENTROPY, abs=1e-10
    )


def test_breakdown_identity(exp_headline):
    c = RingConstellation((0.5, 2.0), (0.4, 0.6))
    grid = build_grid(exp_headline, 2.0)
    b = mutual_information(exp_headline, c, grid)
    assert b.mi == pytest.approx(
        b.h_out_amplitude + math.log(TWO_PI) - b.cond_entropy, abs=1e-12
    )


def test_refinement_is_converged(exp_headline):
    c = RingConstellation((1.0, 2.5), (0.5, 0.5))
    coarse = mutual_information(exp_headline, c, build_grid(exp_headline, 2.5))
    fine_spec = GridSpec(nodes_per_panel=12, panel_width_factor=0.35)
    fine = mutual_information(exp_headline, c, build_grid(exp_headline, 2.5, fine_spec))
    assert coarse.mi == pytest.approx(fine.mi, abs=1e-9)


def test_output_pdf_is_mixture(exp_headline):
    c = RingConstellation((0.4, 1.8), (0.3, 0.7))
    r = np.linspace(0.0, 6.0, 50)
    want = 0.3 * amplitude_pdf(exp_headline, r, 0.4) + 0.7 * amplitude_pdf(
        exp_headline, r, 1.8
    )
    np.testing.assert_allclose(output_amplitude_pdf(exp_headline, c, r), want, atol=1e-14)


def test_output_pdf_normalizes(exp_headline):
    c = RingConstellation((0.4, 1.8, 3.0), (0.3, 0.5, 0.2))

    def f(r):
        return float(output_amplitude_pdf(exp_headline, c, np.atleast_1d(r))[0])

    mass, err = integrate.quad(f, 0.0, exp_headline.r_max, limit=200)
    assert mass == pytest.approx(1.0, abs=max(1e-9, 10 * err))


def test_k1_constant():
    c = RingConstellation((0.0, 2.0), (0.25, 0.75))
    assert k1_constant(c, 1.0) == pytest.approx(0.25 + 0.75 * math.exp(-4.0), rel=1e-14)


def test_marginal_score_recovers_output_entropy(exp_headline):
    # sum_i p_i Int p(r|r_i) ln p(r;F) dr = -h(R) when F matches the mixture
    c = RingConstellation((0.6, 2.2), (0.35, 0.65))
    grid = build_grid(exp_headline, 2.2)
    mixed = sum(
        p * marginal_score(exp_headline, c, r0, grid)
        for r0, p in zip(c.radii, c.probs)
    )
    assert mixed == pytest.approx(
        -output_amplitude_entropy(exp_headline, c, grid), abs=1e-10
    )


def test_mi_concave_in_probability(exp_linear):
    # two-ring linear channel: I(p) along the probability segment is concave
    grid = build_grid(exp_linear, 3.0)

    def mi(p):
        c = RingConstellation((0.0, 3.0), (1.0 - p, p))
        return mutual_information(exp_linear, c, grid).mi

    p = np.linspace(0.1, 0.9, 9)
    vals = np.array([mi(v) for v in p])
    second = vals[:-2] - 2.0 * vals[1:-1] + vals[2:]
    assert np.all(second < 0)
