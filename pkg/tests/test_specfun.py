"""Special-function building blocks against mpmath reference values."""

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pzdcap.specfun import (
    bessel_i_complex,
    bessel_i_complex_grid,
    bessel_i_scaled,
    i0_exponential_floor,
    laguerre_half,
)

mpmath.mp.dps = 40


def _mp_scaled(m: int, x: float) -> float:
    return float(mpmath.besseli(m, x) * mpmath.exp(-x))


@pytest.mark.parametrize("m", [0, 1, 2, 5, 17])
@pytest.mark.parametrize("x", [1e-12, 0.3, 2.0, 40.0, 700.0])
def test_scaled_bessel_matches_mpmath(m, x):
    assert bessel_i_scaled(m, x) == pytest.approx(_mp_scaled(m, x), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize(
    "z",
    [2.0 + 3.0j, 0.5 - 0.2j, 30.0 + 30.0j, -4.0 + 1.0j, 1e-8 + 1e-8j, 200.0 + 150.0j],
)
@pytest.mark.parametrize("m", [0, 1, 3, 10])
def test_complex_bessel_matches_mpmath(m, z):
    ref = mpmath.besseli(m, mpmath.mpc(z))
    got = bessel_i_complex(m, z)
    assert got.log_magnitude == pytest.approx(float(mpmath.log(abs(ref))), rel=1e-10, abs=1e-10)
    # arguments agree modulo 2 pi
    delta = got.phase - float(mpmath.arg(ref))
    assert abs(math.remainder(delta, 2.0 * math.pi)) < 1e-10


def test_complex_bessel_grid_broadcasts():
    m = np.array([0, 1, 2, 5])
    z = np.array([[1.0 + 2.0j], [0.3 - 0.7j], [12.0 + 9.0j]])
    log_mag, arg = bessel_i_complex_grid(m, z)
    assert log_mag.shape == (3, 4) and arg.shape == (3, 4)
    for i in range(3):
        for j in range(4):
            one = bessel_i_complex(int(m[j]), complex(z[i, 0]))
            assert log_mag[i, j] == pytest.approx(one.log_magnitude, rel=1e-13, abs=1e-13)
            assert arg[i, j] == pytest.approx(one.phase, abs=1e-13)


@pytest.mark.parametrize("x", [0.0, 0.1, 1.0, 7.5, 40.0, 300.0])
def test_laguerre_half_matches_mpmath(x):
    ref = float(mpmath.laguerre(mpmath.mpf("0.5"), 0, -x))
    assert laguerre_half(-x) == pytest.approx(ref, rel=1e-11)


def test_laguerre_half_vectorized():
    x = np.linspace(0.0, -25.0, 11)
    vals = laguerre_half(x)
    assert vals.shape == x.shape
    assert np.all(np.diff(vals) > 0)


def test_exponential_floor_is_a_floor():
    eps = 0.1
    k = i0_exponential_floor(eps)
    assert k > 0
    x = np.linspace(0.0, 400.0, 4001)
    lhs = np.log(np.vectorize(bessel_i_scaled)(0, x)) + x
    assert np.all(lhs - math.log(k) - (1.0 - eps) * x >= -1e-12)
    # the constant is tight: some x nearly attains it
    assert np.min(lhs - math.log(k) - (1.0 - eps) * x) < 1e-3


@given(
    m=st.integers(min_value=0, max_value=20),
    x=st.floats(min_value=1e-6, max_value=500.0),
)
@settings(max_examples=200, deadline=None)
def test_scaled_bessel_bounded_and_ordered(m, x):
    value = bessel_i_scaled(m, x)
    assert 0.0 <= value <= 1.0
    # orders are strictly interleaved: I_{m+1} < I_m for x > 0
    assert bessel_i_scaled(m + 1, x) < value or value == 0.0
