"""Conditional density of the zero-dispersion fiber channel.

The channel multiplies the noisy field X + W(L) by the Kerr phase
e^{j gamma Int_0^L |X + W(l)|^2 dl}.  Conditioned on the input amplitude r0,
the output density in polar coordinates is an angular Fourier series

    p(r, phi | r0, phi0) = sum_{m in Z} P_m(r | r0) e^{j m (phi - phi0 - gamma r0^2 L)}

with P_0 = p_{R|R0}(r|r0) / (2 pi) the Rician amplitude law over 2 pi and,
for m >= 1,

    P_m = (1/pi) r b_m e^{-a_m (r^2 + r0^2)} I_m(2 b_m r r0),   P_{-m} = P_m*,

where a_m = w coth(w) / (sigma^2 L), b_m = w / (sigma^2 L sinh w), and
w = beta_m (1 + j) with beta_m = sqrt(m gamma / 2) sigma L.  This module owns
the coefficients, a certified truncation policy for the series, evaluation of
the amplitude/joint densities, and the analytic sandwich bounds on the
conditional density.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .specfun import bessel_i_complex_grid

TWO_PI = 2.0 * math.pi


class EnvelopeError(ValueError):
    """Evaluation point outside the rectangle the truncation was certified on."""


class TruncationError(RuntimeError):
    """Requested tolerance cannot be certified, or a certified bound failed.

    Attributes
    ----------
    best_bound : float
        The smallest truncation-error bound that could be certified.
    """

    def __init__(self, message: str, best_bound: float = math.nan):
        super().__init__(message)
        self.best_bound = best_bound


@dataclass(frozen=True)
class ChannelParams:
    """Physical channel parameters.

    gamma : nonlinearity coefficient, 1/(W km)
    sigma2 : in-band noise power per unit length (sigma0^2 * W), W/km
    length : fiber length L, km
    """

    gamma: float
    sigma2: float
    length: float

    def __post_init__(self):
        for name in ("gamma", "sigma2", "length"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.sigma2 <= 0:
            raise ValueError(f"sigma2 must be > 0, got {self.sigma2}")
        if self.length <= 0:
            raise ValueError(f"length must be > 0, got {self.length}")

    @property
    def noise_power(self) -> float:
        """Total accumulated noise power sigma^2 L."""
        return self.sigma2 * self.length


@dataclass(frozen=True)
class PolarPoint:
    """A point (r, phi) in polar coordinates; phi is wrapped into [0, 2 pi)."""

    r: float
    phi: float = 0.0

    def __post_init__(self):
        r = float(self.r)
        phi = float(self.phi)
        if not math.isfinite(r) or r < 0:
            raise ValueError(f"amplitude must be finite and >= 0, got {r!r}")
        if not math.isfinite(phi):
            raise ValueError(f"phase must be finite, got {phi!r}")
        phi = phi % TWO_PI
        if phi == TWO_PI:  # guard against rounding up
            phi = 0.0
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "phi", phi)


def t_tau(x: float) -> tuple[float, float]:
    """The real/imaginary coefficient profiles t(x), tau(x).

    t(x) = x (sinh 2x + sin 2x) / (2 (sinh^2 x + sin^2 x)) and tau(x) is the
    same with minus signs; Re(a_m) = t(beta_m)/(sigma^2 L) and
    Im(a_m) = tau(beta_m)/(sigma^2 L).  t(0) = 1, tau(0) = 0 by continuity,
    and both approach x as x -> +inf.
    """
    x = float(x)
    if not math.isfinite(x) or x < 0:
        raise ValueError(f"argument must be finite and >= 0, got {x!r}")
    t, tau = _t_tau_arrays(np.asarray([x]))
    return float(t[0]), float(tau[0])


def _t_tau_arrays(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    t = np.empty_like(x)
    tau = np.empty_like(x)

    small = x < 0.25
    mid = (~small) & (x < 19.0)
    big = x >= 19.0

    if np.any(small):
        xs = x[small]
        u = 2.0 * xs
        # sinh u - sin u = 2(u^3/3! + u^7/7! + u^11/11! + ...): avoids the
        # catastrophic cancellation of the direct difference near 0.
        diff = 2.0 * (u**3 / 6.0 + u**7 / 5040.0 + u**11 / 39916800.0)
        den = 2.0 * (np.sinh(xs) ** 2 + np.sin(xs) ** 2)
        with np.errstate(invalid="ignore", divide="ignore"):
            t[small] = np.where(xs > 0, xs * (np.sinh(u) + np.sin(u)) / den, 1.0)
            tau[small] = np.where(xs > 0, xs * diff / den, 0.0)

    if np.any(mid):
        xm = x[mid]
        u = 2.0 * xm
        den = 2.0 * (np.sinh(xm) ** 2 + np.sin(xm) ** 2)
        t[mid] = xm * (np.sinh(u) + np.sin(u)) / den
        tau[mid] = xm * (np.sinh(u) - np.sin(u)) / den

    if np.any(big):
        xb = x[big]
        e2 = np.exp(-2.0 * xb)
        den = (1.0 - e2) ** 2 + 4.0 * np.sin(xb) ** 2 * e2
        s2 = 2.0 * np.sin(2.0 * xb) * e2
        t[big] = xb * ((1.0 - e2**2) + s2) / den
        tau[big] = xb * ((1.0 - e2**2) - s2) / den

    return t, tau


def _log_abs_sinh_cplx(beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """log|sinh(beta(1+j))| and arg sinh(beta(1+j)), overflow-free.

    |sinh(beta + j beta)|^2 = sinh^2 beta + sin^2 beta.
    """
    beta = np.asarray(beta, dtype=float)
    log_abs = np.empty_like(beta)
    ang = np.empty_like(beta)
    lo = beta < 20.0
    if np.any(lo):
        b = beta[lo]
        log_abs[lo] = 0.5 * np.log(np.sinh(b) ** 2 + np.sin(b) ** 2)
        ang[lo] = np.arctan2(np.cosh(b) * np.sin(b), np.sinh(b) * np.cos(b))
    hi = ~lo
    if np.any(hi):
        b = beta[hi]
        e2 = np.exp(-2.0 * b)
        log_abs[hi] = b + 0.5 * np.log((1.0 - e2) ** 2 / 4.0 + np.sin(b) ** 2 * e2)
        ang[hi] = np.arctan2(np.sin(b) * (1.0 + e2), np.cos(b) * (1.0 - e2))
    return log_abs, ang


def _coefficients(params: ChannelParams, m: np.ndarray):
    """Series coefficients for the orders in m (>= 1).

    Returns (a, b, beta, log_abs_b, phase_b) where a and b are complex arrays
    and b is reconstructed from its log form (0.0 when it underflows).
    """
    nl = params.noise_power
    m = np.asarray(m, dtype=float)
    beta = np.sqrt(m * params.gamma / 2.0) * math.sqrt(params.sigma2) * params.length

    t, tau = _t_tau_arrays(beta)
    a = (t + 1j * tau) / nl

    log_abs_b = np.empty_like(beta)
    phase_b = np.empty_like(beta)
    zero = beta == 0.0
    if np.any(zero):
        log_abs_b[zero] = -math.log(nl)
        phase_b[zero] = 0.0
    pos = ~zero
    if np.any(pos):
        b_ = beta[pos]
        log_sinh, ang_sinh = _log_abs_sinh_cplx(b_)
        log_abs_b[pos] = np.log(math.sqrt(2.0) * b_) - log_sinh - math.log(nl)
        phase_b[pos] = np.remainder(math.pi / 4.0 - ang_sinh + math.pi, TWO_PI) - math.pi

    with np.errstate(under="ignore"):
        b = np.exp(log_abs_b + 1j * phase_b)
    b[log_abs_b < -700.0] = 0.0
    return a, b, beta, log_abs_b, phase_b


@dataclass(frozen=True)
class SeriesExpansion:
    """Truncated coefficient table for the conditional-density series.

    The truncation order is certified: on the rectangle
    [0, r_max] x [0, r0_max] the discarded tail of the series is bounded in
    absolute value by tail_bound.
    """

    params: ChannelParams
    truncation_m: int
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)
    tail_bound: float
    r_max: float
    r0_max: float
    log_abs_b: np.ndarray = field(repr=False)
    phase_b: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.a, self.b, self.beta, self.log_abs_b, self.phase_b):
            arr.setflags(write=False)

    def check_envelope(self, r, r0) -> None:
        rmax = float(np.max(r)) if np.size(r) else 0.0
        r0max = float(np.max(r0)) if np.size(r0) else 0.0
        if rmax > self.r_max * (1.0 + 1e-12) or r0max > self.r0_max * (1.0 + 1e-12):
            raise EnvelopeError(
                f"point (r={rmax:g}, r0={r0max:g}) outside certified rectangle "
                f"[0, {self.r_max:g}] x [0, {self.r0_max:g}]"
            )


def _tail_per_order(params: ChannelParams, m: np.ndarray, r_max: float, r0_max: float):
    """Certified upper bound on sup |P_m| over [0, r_max] x [0, r0_max].

    Two routes, combined by minimum:

    * factorial route: |I_m(w)| <= (|w|/2)^m / m! * e^{|w|^2/(4(m+1))} and
      e^{-Re(a_m)(r^2+r0^2)} <= e^{-2 r r0 / (sigma^2 L)} reduce the supremum
      to a one-dimensional maximization in v = |b_m| r r0 whose candidates
      (the right edge and one interior stationary point) are closed-form;
    * prefactor route: |P_m| <= sqrt(2) (r/(pi sigma^2 L)) beta_m/sinh(beta_m)
      e^{-(r-r0)^2/(sigma^2 L)}, which decays like e^{-beta_m}.
    """
    nl = params.noise_power
    _, _, beta, log_abs_b, _ = _coefficients(params, m)
    mf = np.asarray(m, dtype=float)

    # factorial route, all in log space
    log_vmax = log_abs_b + math.log(r_max * r0_max)
    kappa_vmax = 2.0 * r_max * r0_max / nl  # kappa * v_max, independent of b
    with np.errstate(under="ignore", over="ignore"):
        vmax = np.exp(log_vmax)
        g_edge = mf * log_vmax - kappa_vmax + vmax**2 / (mf + 1.0)
        kappa = 2.0 / nl * np.exp(-log_abs_b)
        disc = (kappa * (mf + 1.0)) ** 2 - 8.0 * mf * (mf + 1.0)
        has_root = disc >= 0
        sq = np.sqrt(np.where(has_root, disc, 0.0))
        v1 = (kappa * (mf + 1.0) - sq) / 4.0
        interior = has_root & (v1 > 0) & (v1 < vmax)
        g_int = np.where(
            interior,
            mf * np.log(np.where(interior, v1, 1.0)) - kappa * v1 + v1**2 / (mf + 1.0),
            -np.inf,
        )
    g = np.maximum(g_edge, g_int)
    log_fact = math.log(r_max / math.pi) + log_abs_b + g - special.gammaln(mf + 1.0)

    # prefactor route (constant in m when gamma == 0)
    log_ratio = np.zeros_like(beta)
    pos = beta > 0
    if np.any(pos):
        log_sinh_real = np.where(
            beta[pos] < 20.0,
            np.log(np.sinh(np.minimum(beta[pos], 20.0))),
            beta[pos] - math.log(2.0) + np.log1p(-np.exp(-2.0 * np.minimum(beta[pos], 350.0))),
        )
        log_ratio[pos] = np.log(beta[pos]) - log_sinh_real
    log_pref = math.log(math.sqrt(2.0) * r_max / (math.pi * nl)) + log_ratio

    with np.errstate(under="ignore"):
        return np.exp(np.minimum(log_fact, log_pref))


def _far_tail(params: ChannelParams, m0: int, r_max: float, r0_max: float) -> float:
    """Closed-form bound on sum_{m > m0} sup |P_m| via |b_m| <= sqrt(2)/(sigma^2 L)."""
    nl = params.noise_power
    big_b = math.sqrt(2.0) / nl
    v_cap = big_b * r_max * r0_max
    q = v_cap / (m0 + 2.0)
    if q >= 1.0:
        return math.inf
    log_term = (
        math.log(r_max * big_b / math.pi)
        + (m0 + 1.0) * math.log(v_cap)
        - special.gammaln(m0 + 2.0)
        + v_cap**2 / (m0 + 2.0)
    )
    return math.exp(log_term) / (1.0 - q) if log_term < 700 else math.inf


M_SEARCH_CAP = 10_000


def make_expansion(
    params: ChannelParams, tol: float, r_max: float, r0_max: float
) -> SeriesExpansion:
    """Smallest truncation whose certified series tail is below tol.

    The tail bound covers the whole rectangle [0, r_max] x [0, r0_max]:
    |p_truncated - p| <= tail_bound <= tol everywhere on it.  Raises
    TruncationError (carrying the best achievable bound) when even
    M = 10^4 cannot certify tol.
    """
    if not (tol > 0):
        raise ValueError(f"tol must be > 0, got {tol!r}")
    if not (r_max > 0 and r0_max > 0):
        raise ValueError("envelopes r_max and r0_max must be > 0")

    orders = np.arange(1, M_SEARCH_CAP + 1)
    per_order = _tail_per_order(params, orders, r_max, r0_max)
    far = _far_tail(params, M_SEARCH_CAP, r_max, r0_max)
    # tail_after[k] = bound when truncating at M = k+1 (i.e. orders > k+1 dropped)
    suffix = np.concatenate([np.cumsum(per_order[::-1])[::-1], [0.0]]) + far
    tails = 2.0 * suffix[1:]  # tails[k] = certified pdf error for M = k+1

    ok = np.nonzero(tails <= tol)[0]
    if ok.size == 0:
        raise TruncationError(
            f"cannot certify tail <= {tol:g} within M <= {M_SEARCH_CAP}; "
            f"best achievable bound is {tails[-1]:g}",
            best_bound=float(tails[-1]),
        )
    m_trunc = int(ok[0]) + 1

    kept = np.arange(1, m_trunc + 1)
    a, b, beta, log_abs_b, phase_b = _coefficients(params, kept)
    if np.any(np.abs(b.real) > (1.0 + 1e-12) / params.noise_power):
        raise TruncationError("coefficient bound |Re b_m| <= 1/(sigma^2 L) failed")
    return SeriesExpansion(
        params=params,
        truncation_m=m_trunc,
        a=a,
        b=b,
        beta=beta,
        tail_bound=float(tails[m_trunc - 1]),
        r_max=float(r_max),
        r0_max=float(r0_max),
        log_abs_b=log_abs_b,
        phase_b=phase_b,
    )


def amplitude_pdf(exp: SeriesExpansion, r, r0):
    """Conditional amplitude density p_{R|R0}(r | r0): Rician with
    parameters (r0, sigma^2 L / 2).

    Overflow-free for amplitudes up to 1e4; accepts scalars or arrays in r.
    """
    nl = exp.params.noise_power
    r = np.asarray(r, dtype=float)
    r0 = float(r0)
    if np.any(r < 0) or r0 < 0 or not np.all(np.isfinite(r)) or not math.isfinite(r0):
        raise ValueError("amplitudes must be finite and >= 0")
    with np.errstate(under="ignore"):
        out = (2.0 * r / nl) * np.exp(-((r - r0) ** 2) / nl) * special.ive(0, 2.0 * r * r0 / nl)
    return out if out.ndim else float(out)


def _phase_coefficients(exp: SeriesExpansion, r: np.ndarray, r0: float) -> np.ndarray:
    """Complex coefficients P_m(r | r0), m = 1..M, for each radial node.

    Returns an (len(r), M) array.  Assembled in log space so that nothing
    overflows; entries whose magnitude underflows double precision are 0,
    which is far below the certified tail bound.
    """
    nl = exp.params.noise_power
    r = np.asarray(r, dtype=float)
    rsq = r * r + r0 * r0
    z = 2.0 * r0 * np.outer(r, exp.b)  # (N, M)
    m_row = np.arange(1, exp.truncation_m + 1)[None, :]
    log_i, arg_i = bessel_i_complex_grid(m_row, z)
    with np.errstate(divide="ignore", under="ignore"):
        log_mag = (
            np.log(r / math.pi)[:, None]
            + exp.log_abs_b[None, :]
            - np.outer(rsq, exp.a.real)
            + log_i
        )
        phase = exp.phase_b[None, :] - np.outer(rsq, exp.a.imag) + arg_i
        coeff = np.exp(np.where(log_mag > -745.0, log_mag, -745.0) + 1j * phase)
    coeff[log_mag <= -745.0] = 0.0
    return coeff


def joint_pdf_grid(
    exp: SeriesExpansion,
    r: np.ndarray,
    phi: np.ndarray,
    r0: float,
    phi0: float = 0.0,
) -> np.ndarray:
    """Joint conditional density p(r_i, phi_k | r0, phi0) on a product grid.

    Returns an (len(r), len(phi)) array.  Values are clamped at 0 when a
    negative excursion stays within the certified tail bound; an excursion
    beyond it signals a mis-sized truncation and raises TruncationError.
    """
    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)
    exp.check_envelope(r, r0)

    # The coefficients P_m already carry the deterministic Kerr rotation
    # (their phase is asymmetric in m), so the angular basis is plain
    # exp(jm(phi - phi0)); simulation of the channel map pins this down.
    theta = phi - phi0
    coeff = _phase_coefficients(exp, r, r0)
    basis = np.exp(1j * np.outer(np.arange(1, exp.truncation_m + 1), theta))
    base = amplitude_pdf(exp, r, r0) / TWO_PI
    p = base[:, None] + 2.0 * np.real(coeff @ basis)

    neg = float(p.min(initial=0.0))
    if neg < -(exp.tail_bound + 1e-12 * max(1.0, float(p.max(initial=0.0)))):
        raise TruncationError(
            f"series went {neg:g} below zero, beyond the certified tail "
            f"bound {exp.tail_bound:g}; truncation order is mis-sized"
        )
    return np.maximum(p, 0.0)


def joint_pdf(exp: SeriesExpansion, y: PolarPoint, x0: PolarPoint) -> float:
    """Joint conditional density p(r, phi | r0, phi0) at a single point."""
    grid = joint_pdf_grid(exp, np.asarray([y.r]), np.asarray([y.phi]), x0.r, x0.phi)
    return float(grid[0, 0])


def joint_pdf_pairs(
    exp: SeriesExpansion,
    r: np.ndarray,
    phi: np.ndarray,
    r0: float,
    phi0: float = 0.0,
) -> np.ndarray:
    """Joint conditional density at paired points (r_k, phi_k), one value each.

    Unlike joint_pdf_grid this does not form the product grid, so it suits
    scattered samples.  Work is chunked so the coefficient table never holds
    more than a few million entries at once.
    """
    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if r.shape != phi.shape:
        raise ValueError("r and phi must have matching shapes")
    exp.check_envelope(r, r0)

    theta = phi - phi0
    m_row = np.arange(1, exp.truncation_m + 1)[None, :]
    out = np.empty(r.shape, dtype=float)
    step = max(1, 4_000_000 // max(1, exp.truncation_m))
    for lo in range(0, r.size, step):
        sl = slice(lo, lo + step)
        coeff = _phase_coefficients(exp, r[sl], r0)
        basis = np.exp(1j * theta[sl, None] * m_row)
        base = amplitude_pdf(exp, r[sl], r0) / TWO_PI
        out[sl] = base + 2.0 * np.sum(np.real(coeff) * np.real(basis)
                                      - np.imag(coeff) * np.imag(basis), axis=1)

    neg = float(out.min(initial=0.0))
    if neg < -(exp.tail_bound + 1e-12 * max(1.0, float(out.max(initial=0.0)))):
        raise TruncationError(
            f"series went {neg:g} below zero, beyond the certified tail "
            f"bound {exp.tail_bound:g}; truncation order is mis-sized"
        )
    return np.maximum(out, 0.0)


@functools.lru_cache(maxsize=32)
def phase_series_sum(params: ChannelParams) -> tuple[float, float, int]:
    """S = sum_{m>=1} beta_m / sinh(beta_m) with a certified tail.

    Returns (S, tail_bound, cutoff).  The sum diverges for gamma = 0
    (every term is 1): S is +inf there.
    """
    if params.gamma == 0.0:
        return math.inf, 0.0, 0
    c = math.sqrt(params.gamma / 2.0) * math.sqrt(params.sigma2) * params.length
    total = 0.0
    m0 = 0
    block = 1024
    while True:
        m = np.arange(m0 + 1, m0 + block + 1, dtype=float)
        beta = c * np.sqrt(m)
        with np.errstate(under="ignore", over="ignore"):
            term = np.where(beta < 350.0, beta / np.sinh(np.minimum(beta, 350.0)), 0.0)
        total += float(np.sum(term))
        m0 += block
        u0 = c * math.sqrt(m0)
        if u0 > 1.0:
            damp = 2.0 / (1.0 - math.exp(-2.0 * u0))
            integral = (2.0 / c**2) * (u0 * u0 + 2.0 * u0 + 2.0) * math.exp(-u0)
            tail = damp * (beta[-1] / math.sinh(min(beta[-1], 350.0)) + integral)
            if tail <= 1e-15:
                return total, tail, m0
        if m0 > 50_000_000:
            raise TruncationError("series constant did not converge")


def pdf_bound_constants(params: ChannelParams) -> tuple[float, float]:
    """(k_u, S): the uniform conditional-density ceiling constant and the
    underlying series sum.  k_u = (1 + 2 sqrt(2) S) / (2 pi); both are +inf
    in the linear (gamma = 0) limit."""
    s, _, _ = phase_series_sum(params)
    return (1.0 + 2.0 * math.sqrt(2.0) * s) / TWO_PI, s


def xi_factor(exp: SeriesExpansion, r0):
    """Relative half-width xi(r0) of the conditional-density sandwich;
    scalars or arrays.

    xi(r0) = 2 sqrt(2) S e^{-(Re a_1 - 1/(sigma^2 L)) r0^2}; decreasing in r0
    and -> 0, so the lower bound (1 - xi) p_{R|R0} / (2 pi) is eventually
    non-vacuous.  +inf when gamma = 0.
    """
    r0 = np.asarray(r0, dtype=float)
    _, s = pdf_bound_constants(exp.params)
    if math.isinf(s):
        out = np.full_like(r0, math.inf)
        return out if out.ndim else math.inf
    gap = exp.a[0].real - 1.0 / exp.params.noise_power
    with np.errstate(under="ignore"):
        out = 2.0 * math.sqrt(2.0) * s * np.exp(-gap * r0 * r0)
    return out if out.ndim else float(out)


def conditional_bounds(
    exp: SeriesExpansion, y: PolarPoint, x0: PolarPoint
) -> tuple[float, float, float, float]:
    """Analytic sandwich for the conditional density at (y | x0).

    Returns (lower, upper, k_u, xi_r0) with
    lower = p_{R|R0}(1 - xi(r0))/(2 pi) (possibly negative, then vacuous) and
    upper = k_u p_{R|R0}.  For gamma = 0 both envelopes are vacuous
    (lower = -inf, upper = +inf).
    """
    exp.check_envelope(y.r, x0.r)
    k_u, s = pdf_bound_constants(exp.params)
    p_amp = amplitude_pdf(exp, y.r, x0.r)
    if math.isinf(s):
        return -math.inf, math.inf, k_u, math.inf
    xi = xi_factor(exp, x0.r)
    return (p_amp / TWO_PI) * (1.0 - xi), k_u * p_amp, k_u, xi


def rician_mean(params: ChannelParams, r0: float) -> float:
    """Closed-form conditional mean E[R | r0] = sqrt(pi sigma^2 L)/2 *
    L_{1/2}(-r0^2/(sigma^2 L))."""
    from .specfun import laguerre_half

    nl = params.noise_power
    return 0.5 * math.sqrt(math.pi * nl) * laguerre_half(-r0 * r0 / nl)


def rician_second_moment(params: ChannelParams, r0: float) -> float:
    """Closed-form conditional second moment E[R^2 | r0] = sigma^2 L + r0^2."""
    return params.noise_power + r0 * r0
