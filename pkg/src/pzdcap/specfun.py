"""Scaled modified Bessel functions and the Laguerre function L_{1/2}.

Every density, bound, and moment in this package reduces to integer-order
modified Bessel functions of the first kind, evaluated either at real
arguments (amplitude laws) or at complex arguments (phase-series
coefficients), plus the Laguerre function L_{1/2} that gives the Rician mean.
All evaluations are exponentially scaled or log-space so that nothing
overflows for amplitudes up to 1e4.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy import special


@dataclass(frozen=True)
class LogBessel:
    """I_m(z) in log-magnitude/phase form: I_m(z) = exp(log_magnitude + i*phase).

    log_magnitude is the natural log of |I_m(z)| (-inf when I_m(z) = 0, which
    happens only at z = 0 for m >= 1); phase is the argument in radians, 0 for
    real positive values.
    """

    log_magnitude: float
    phase: float

    def value(self) -> complex:
        """Reconstruct the (possibly overflowing) complex value."""
        if self.log_magnitude == -math.inf:
            return 0j
        return cmath.exp(complex(self.log_magnitude, self.phase))


def _check_order(m) -> int:
    if not (isinstance(m, (int, np.integer)) or float(m).is_integer()):
        raise ValueError(f"order must be an integer, got {m!r}")
    m = int(m)
    if m < 0:
        raise ValueError(f"order must be non-negative, got {m}")
    return m


def bessel_i_scaled(m, x: float) -> float:
    """Exponentially scaled modified Bessel function e^{-x} I_m(x).

    Parameters
    ----------
    m : int
        Non-negative integer order.
    x : float
        Non-negative argument.

    Returns
    -------
    float
        e^{-x} I_m(x), which lies in [0, 1]; strictly positive for x > 0 and
        equal to 1 only at (m, x) = (0, 0).
    """
    m = _check_order(m)
    x = float(x)
    if not math.isfinite(x) or x < 0:
        raise ValueError(f"argument must be finite and >= 0, got {x!r}")
    return float(special.ive(m, x))


def bessel_i_complex(m, z: complex) -> LogBessel:
    """I_m(z) for complex z, in overflow-safe log-magnitude/phase form.

    Uses the exponentially scaled routine ive(m, z) = I_m(z) e^{-|Re z|} and
    adds |Re z| back in log space, so the result is meaningful even when
    I_m(z) itself would overflow a double.  When the scaled value underflows
    (tiny |z| with large m) the leading series term (z/2)^m / m! is used
    instead; its first correction is relatively O(|z|^2/(4(m+1))).
    """
    m = _check_order(m)
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"argument must be finite, got {z!r}")
    if z == 0:
        return LogBessel(0.0 if m == 0 else -math.inf, 0.0)
    scaled = complex(special.ive(m, z))
    if scaled != 0:
        return LogBessel(math.log(abs(scaled)) + abs(z.real), cmath.phase(scaled))
    # ive underflowed: fall back to the leading series term in log space.
    log_mag = m * math.log(abs(z) / 2.0) - math.lgamma(m + 1)
    phase = math.remainder(m * cmath.phase(z), 2.0 * math.pi)
    return LogBessel(log_mag, phase)


def bessel_i_complex_grid(m: np.ndarray, z: np.ndarray):
    """Vectorized log|I_m(z)| and arg I_m(z) for broadcastable (m, z) arrays.

    Entries whose scaled value underflows to 0 are replaced by the leading
    series term, like bessel_i_complex.  Returns (log_magnitude, phase).
    """
    m = np.asarray(m)
    z = np.asarray(z, dtype=complex)
    scaled = special.ive(m, z)
    mag = np.abs(scaled)
    with np.errstate(divide="ignore"):
        log_mag = np.log(mag) + np.abs(z.real)
    phase = np.angle(scaled)
    dead = (mag == 0) & (z != 0)
    if np.any(dead):
        mb, zb = np.broadcast_arrays(m, z)
        mm = mb[dead].astype(float)
        zz = zb[dead]
        log_mag = np.array(log_mag, copy=True)
        phase = np.array(phase, copy=True)
        log_mag[dead] = mm * np.log(np.abs(zz) / 2.0) - special.gammaln(mm + 1)
        phase[dead] = np.remainder(mm * np.angle(zz) + np.pi, 2 * np.pi) - np.pi
    return log_mag, phase


def laguerre_half(x):
    """Laguerre function L_{1/2}(x) for x <= 0; scalars or arrays.

    Evaluated through the scaled-Bessel representation
    L_{1/2}(x) = e^{x/2} [ (1-x) I_0(-x/2) - x I_1(-x/2) ], which for x <= 0
    is a sum of non-negative terms (no cancellation).  L_{1/2}(0) = 1,
    L_{1/2} is increasing as x -> -inf with L_{1/2}(x) ~ 2 sqrt(|x|/pi).
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("argument must be finite")
    if np.any(x > 0):
        raise ValueError("argument must be <= 0")
    y = -0.5 * x
    out = (1.0 - x) * special.i0e(y) - x * special.i1e(y)
    return out if out.ndim else float(out)


def i0_exponential_floor(eps: float) -> float:
    """Largest K with I_0(x) >= K e^{(1-eps)x} for all x >= 0.

    K(eps) = min_{x>=0} e^{(eps-1)x} I_0(x), located by golden-section search
    after bracketing the interior minimum (the objective starts at 1 with
    negative slope and grows like e^{eps x}/sqrt(2 pi x) for large x).
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")

    def f(x):
        # e^{(eps-1)x} I_0(x) = e^{eps x} * (e^{-x} I_0(x))
        return math.exp(eps * x) * float(special.i0e(x))

    hi = 1.0
    while f(hi) < 1.0:
        hi *= 2.0
    res = _golden_min(f, 0.0, hi)
    if not res > 0:
        raise ArithmeticError("scaled-I0 floor came out non-positive")
    return res


def _golden_min(f, a: float, b: float, tol: float = 1e-12) -> float:
    """Golden-section minimum value of a unimodal f on [a, b]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol * (1.0 + abs(a) + abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return min(fc, fd)
