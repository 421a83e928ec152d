"""Executable audit of the analytic bounds behind the capacity machinery.

Every inequality the optimality argument leans on is re-checked numerically:
Bessel-function bounds, the conditional-density sandwich, output-density
envelopes, the closed-form amplitude moments, the series-coefficient
inequalities, and the two closed-form envelopes on the optimality LHS.
Points come from a scrambled low-discrepancy sequence plus adversarial
corners (the axis, the envelope edge), so runs are deterministic under a
fixed seed.  Failures are returned as results, never raised: the audit is a
measurement, not an assertion.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from numpy.polynomial import legendre
from scipy import special
from scipy.stats import qmc

from .channel import (
    ChannelParams,
    EnvelopeError,
    SeriesExpansion,
    amplitude_pdf,
    joint_pdf_pairs,
    make_expansion,
    pdf_bound_constants,
    phase_series_sum,
    rician_mean,
    rician_second_moment,
    xi_factor,
)
from .constellation import (
    ConstraintSet,
    CostBudget,
    CostFunction,
    RingConstellation,
    average_cost,
)
from .infomath import build_grid, mutual_information, output_amplitude_pdf
from .optimizer import SolveConfig, kkt_certificate, lhs_envelopes
from .specfun import bessel_i_complex_grid, i0_exponential_floor

TWO_PI = 2.0 * math.pi

# Epsilon in the exponential floor I_0(x) >= K e^{(1-eps)x}; any value in
# (0, 1) works, smaller makes the far-field ceiling tighter.
_FLOOR_EPS = 0.1

# Identity checks (quadrature vs closed form) get an absolute-plus-relative
# tolerance budget instead of a one-sided margin.
_IDENTITY_TOL = 1e-8


@dataclasses.dataclass(frozen=True)
class AuditResult:
    """Outcome of one inequality checked at many points.

    worst_margin is the minimum of (bound - quantity) over the points, so
    anything >= 0 is a clean pass and the slack absorbs roundoff.
    """

    lemma_id: str
    points_checked: int
    worst_margin: float
    passed: bool
    points_skipped: int = 0

    def __post_init__(self):
        if not self.lemma_id:
            raise ValueError("lemma_id must be a non-empty slug")
        if self.points_checked < 0 or self.points_skipped < 0:
            raise ValueError("point counts must be >= 0")


def _result(lemma_id: str, margins, slack: float, skipped: int = 0) -> AuditResult:
    margins = np.asarray(margins, dtype=float)
    finite = margins[np.isfinite(margins)]
    worst = float(finite.min()) if finite.size else math.inf
    return AuditResult(
        lemma_id=lemma_id,
        points_checked=int(margins.size),
        worst_margin=worst,
        passed=bool(worst >= -slack),
        points_skipped=skipped + int(margins.size - finite.size),
    )


def _log_i0(x: np.ndarray) -> np.ndarray:
    x = np.abs(x)
    return x + np.log(special.i0e(x))


def _log_im(m: int, x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return x + np.log(special.ive(m, x))


def _bessel_results(u: np.ndarray, slack: float) -> list[AuditResult]:
    orders = np.arange(0, 9)
    x = np.concatenate([u[:, 0] * 60.0, [0.0, 1e-12, 1e-6, 60.0]])

    unit = _log_i0(x)
    nonneg = np.concatenate([special.ive(m, x) for m in orders])

    z = 40.0 * (2.0 * u[:, 0] - 1.0) + 40.0j * (2.0 * u[:, 1] - 1.0)
    z = np.concatenate([z, [0.0 + 0.0j, 1e-9 + 0j, 40.0 + 40.0j, -40.0 + 40.0j]])
    log_mag, _ = bessel_i_complex_grid(orders[:, None], np.broadcast_to(z, (orders.size, z.size)))
    modulus = _log_i0(z.real)[None, :] - log_mag

    with np.errstate(divide="ignore"):
        real_cap = np.concatenate([-np.log(special.ive(m, x)) for m in orders])

    small = np.exp(1j * TWO_PI * u[:200, 1]) * (0.3 * u[:200, 0] + 1e-12)
    small_margins = []
    for m in range(0, 7):
        lm, am = bessel_i_complex_grid(np.array([[m]]), small[None, :])
        log_rel = lm[0] + math.lgamma(m + 1) - m * np.log(np.abs(small) / 2.0)
        arg_rel = am[0] - m * np.angle(small)
        ratio = np.exp(log_rel + 1j * arg_rel)
        bound = np.expm1(np.abs(small) ** 2 / (4.0 * (m + 1)))
        small_margins.append(bound - np.abs(ratio - 1.0))

    k_eps = i0_exponential_floor(_FLOOR_EPS)
    floor = _log_i0(x) - math.log(k_eps) - (1.0 - _FLOOR_EPS) * x

    x1 = np.sort(60.0 * u[:, 2])
    x2 = x1 + 60.0 * u[:, 3] + 1e-9
    monotone = np.concatenate([_log_im(m, x2) - _log_im(m, x1) for m in orders])

    return [
        _result("bessel-zero-order-unit-floor", unit, slack),
        _result("bessel-nonnegative-real-axis", nonneg, slack),
        _result("bessel-complex-modulus-cap", modulus.ravel(), slack),
        _result("bessel-real-axis-exponential-cap", real_cap, slack),
        _result("bessel-small-argument-limit", np.concatenate(small_margins), slack),
        _result("bessel-exponential-floor", floor, slack),
        _result("bessel-monotone-in-argument", monotone, slack),
    ]


def _group_sizes(total: int, groups: int) -> list[int]:
    base, extra = divmod(total, groups)
    return [base + (1 if g < extra else 0) for g in range(groups)]


def _conditional_ceiling(
    exp: SeriesExpansion, u: np.ndarray, slack: float
) -> AuditResult:
    k_u, _ = pdf_bound_constants(exp.params)
    groups = min(64, u.shape[0])
    margins = []
    offset = 0
    for g, size in enumerate(_group_sizes(u.shape[0], groups)):
        r0 = float(u[g, 2]) * exp.r0_max
        phi0 = float(u[g, 3]) * TWO_PI
        block = u[offset : offset + size]
        offset += size
        r = np.concatenate([block[:, 0] * exp.r_max, [0.0, 1e-9, exp.r_max]])
        phi = np.concatenate([block[:, 1] * TWO_PI, [0.0, math.pi, TWO_PI - 1e-9]])
        p = joint_pdf_pairs(exp, r, phi, r0, phi0)
        if math.isinf(k_u):
            margins.append(np.full_like(p, math.inf))
        else:
            margins.append(k_u * amplitude_pdf(exp, r, r0) - p)
    return _result("conditional-density-ceiling", np.concatenate(margins), slack)


def _nonvacuous_r0(params: ChannelParams) -> float:
    """Smallest r0 where the sandwich floor has width, i.e. xi(r0) < 0.9."""
    _, s = pdf_bound_constants(params)
    base = make_expansion(params, r0_max=1.0, r_max=2.0, tol=1e-8)
    gap = base.a[0].real - 1.0 / params.noise_power
    return math.sqrt(max(0.0, math.log(2.0 * math.sqrt(2.0) * s / 0.9)) / gap)


def _conditional_floor(
    params: ChannelParams, u: np.ndarray, slack: float, tol: float
) -> AuditResult:
    _, s = pdf_bound_constants(params)
    if math.isinf(s):
        return AuditResult(
            "conditional-density-floor", 0, math.inf, True, points_skipped=u.shape[0]
        )
    r0_lo = _nonvacuous_r0(params)
    r0_hi = r0_lo + 3.0
    nl = params.noise_power
    ext = make_expansion(
        params, r0_max=r0_hi, r_max=r0_hi + 10.0 * math.sqrt(nl), tol=tol
    )
    groups = min(64, u.shape[0])
    margins = []
    skipped = 0
    offset = 0
    for g, size in enumerate(_group_sizes(u.shape[0], groups)):
        r0 = r0_lo + float(u[g, 2]) * (r0_hi - r0_lo)
        xi = xi_factor(ext, r0)
        block = u[offset : offset + size]
        offset += size
        if xi >= 1.0:
            skipped += block.shape[0]
            continue
        r = block[:, 0] * ext.r_max
        phi = block[:, 1] * TWO_PI
        p = joint_pdf_pairs(ext, r, phi, r0, 0.0)
        floor = amplitude_pdf(ext, r, r0) / TWO_PI * (1.0 - xi)
        margins.append(p - floor)
    pooled = np.concatenate(margins) if margins else np.zeros(0)
    return _result("conditional-density-floor", pooled, slack, skipped=skipped)


def _output_density_results(
    exp: SeriesExpansion,
    constellations: list[RingConstellation],
    u: np.ndarray,
    slack: float,
    tol: float,
) -> list[AuditResult]:
    params = exp.params
    nl = params.noise_power
    k_u, s = pdf_bound_constants(params)
    quartic = CostFunction(kind="power", q=4.0)
    r = np.concatenate([u[:, 0] * exp.r_max, [0.0, 1e-9, exp.r_max]])

    far_lo = math.inf if math.isinf(s) else _nonvacuous_r0(params)
    peak, avg, floor, far = [], [], [], []
    far_skipped = 0
    for c in constellations:
        p_out = output_amplitude_pdf(exp, c, r)
        joint = p_out / TWO_PI
        rho = max(c.radii)
        k_1 = float(np.dot(c.probs, np.exp(-np.square(c.radii) / nl)))

        with np.errstate(over="ignore", invalid="ignore"):
            cap_peak = (2.0 * k_u * r / nl) * np.exp(-(r * r - 2.0 * r * rho) / nl)
        peak.append(cap_peak - joint if math.isfinite(k_u) else np.full_like(r, math.inf))

        budget = average_cost(c, quartic)
        with np.errstate(divide="ignore", invalid="ignore"):
            cap_avg = (2.0 * k_u * r / nl) * (
                np.exp(-r * r / (4.0 * nl)) + budget / quartic(r / 2.0)
            )
        avg.append(cap_avg - joint if math.isfinite(k_u) else np.full_like(r, math.inf))

        floor.append(p_out - (2.0 * k_1 * r / nl) * np.exp(-r * r / nl))

        if math.isinf(far_lo):
            far_skipped += r.size
            continue
        ext = make_expansion(
            params, r0_max=max(rho, 1.0), r_max=far_lo + 5.0, tol=tol
        )
        r_far = far_lo + np.concatenate([u[:, 1], [0.0, 1.0]]) * (ext.r_max - far_lo)
        xi_far = np.asarray(xi_factor(ext, r_far))
        live = xi_far < 1.0
        far_skipped += int(r_far.size - live.sum())
        joint_far = output_amplitude_pdf(ext, c, r_far[live]) / TWO_PI
        floor_far = (
            (k_1 * r_far[live] / (math.pi * nl))
            * np.exp(-np.square(r_far[live]) / nl)
            * (1.0 - xi_far[live])
        )
        far.append(joint_far - floor_far)

    return [
        _result("output-density-peak-ceiling", np.concatenate(peak), slack),
        _result("output-density-average-ceiling", np.concatenate(avg), slack),
        _result("output-density-floor", np.concatenate(floor), slack),
        _result(
            "output-density-floor-far-tail",
            np.concatenate(far) if far else np.zeros(0),
            slack,
            skipped=far_skipped,
        ),
    ]


def _moment_results(
    exp: SeriesExpansion, u: np.ndarray, slack: float
) -> list[AuditResult]:
    params = exp.params
    nl = params.noise_power
    r0s = np.concatenate([u[:, 2] * exp.r0_max, [0.0, exp.r0_max]])

    r_hi = min(exp.r0_max + 12.0 * math.sqrt(nl), exp.r_max)
    nodes, weights = legendre.leggauss(8)
    panels = max(8, int(math.ceil(r_hi / (0.5 * math.sqrt(nl)))))
    edges = np.linspace(0.0, r_hi, panels + 1)
    half = 0.5 * np.diff(edges)
    centers = 0.5 * (edges[1:] + edges[:-1])
    rr = (centers[:, None] + half[:, None] * nodes[None, :]).ravel()
    ww = (half[:, None] * weights[None, :]).ravel()

    mean_m, power_m = [], []
    for r0 in r0s:
        p = amplitude_pdf(exp, rr, float(r0))
        mean_q = float(np.dot(ww, rr * p))
        power_q = float(np.dot(ww, rr * rr * p))
        mean_c = rician_mean(params, float(r0))
        power_c = rician_second_moment(params, float(r0))
        mean_m.append(_IDENTITY_TOL * max(1.0, abs(mean_c)) - abs(mean_q - mean_c))
        power_m.append(_IDENTITY_TOL * max(1.0, abs(power_c)) - abs(power_q - power_c))
    return [
        _result("amplitude-mean-identity", mean_m, slack),
        _result("amplitude-power-identity", power_m, slack),
    ]


def _coefficient_results(exp: SeriesExpansion, slack: float) -> list[AuditResult]:
    nl = exp.params.noise_power
    beta = np.asarray(exp.beta)
    a_floor = exp.a.real - 1.0 / nl
    a_monotone = np.diff(exp.a.real, prepend=exp.a.real[0])
    b_cap = 1.0 / nl - exp.b.real
    with np.errstate(invalid="ignore"):
        ratio = np.where(beta > 0.0, beta / np.sinh(beta), 1.0)
    b_mag = math.sqrt(2.0) * ratio / nl - np.abs(exp.b)
    return [
        _result("coefficient-decay-floor", np.concatenate([a_floor, a_monotone]), slack),
        _result("coefficient-oscillation-cap", b_cap, slack),
        _result("coefficient-magnitude-cap", b_mag, slack),
    ]


def _sandwich_decay(
    exp: SeriesExpansion, u: np.ndarray, slack: float
) -> AuditResult:
    _, s = pdf_bound_constants(exp.params)
    if math.isinf(s):
        return AuditResult(
            "sandwich-width-decay", 0, math.inf, True, points_skipped=u.shape[0]
        )
    base = make_expansion(exp.params, r0_max=1.0, r_max=2.0, tol=1e-8)
    gap = base.a[0].real - 1.0 / exp.params.noise_power
    far = 6.0 / math.sqrt(gap)
    r0 = np.sort(np.concatenate([u[:, 3] * far, [0.0, far]]))
    xi = np.asarray(xi_factor(exp, r0))
    margins = np.concatenate([-np.diff(xi), [1e-6 - float(xi_factor(exp, far))]])
    return _result("sandwich-width-decay", margins, slack)


def _phase_sum_tail(params: ChannelParams, slack: float) -> AuditResult:
    _, tail, _ = phase_series_sum(params)
    return _result("phase-sum-tail-residual", [1e-14 - tail], slack)


def _envelope_results(
    exp: SeriesExpansion,
    constellations: list[RingConstellation],
    slack: float,
) -> list[AuditResult]:
    cfg = SolveConfig(kkt_points=64)
    quartic = CostFunction(kind="power", q=4.0)
    params = exp.params
    _, s = pdf_bound_constants(params)
    upper_m, lower_m = [], []
    upper_skip = 0
    for c in constellations:
        grid = build_grid(exp, max_radius=max(c.radii))
        cap = mutual_information(exp, c, grid).mi

        # A larger declared peak keeps c feasible while pushing part of the
        # certificate grid into the region where the ceiling is finite, so
        # the comparison is not vacuous.
        if math.isfinite(s):
            rho = _nonvacuous_r0(params) + 2.0
            exp_peak = make_expansion(
                params,
                r0_max=rho,
                r_max=rho + 10.0 * math.sqrt(params.noise_power),
                tol=1e-10,
            )
        else:
            rho = max(c.radii)
            exp_peak = exp
        s_peak = ConstraintSet(regime="peak", rho=rho)
        rep = kkt_certificate(exp_peak, c, s_peak, cap, cfg)
        r0 = rep.samples[:, 0]
        upper, _ = lhs_envelopes(exp_peak, c, s_peak, 0.0, r0, capacity_value=cap)
        live = np.isfinite(upper)
        upper_skip += int(r0.size - live.sum())
        upper_m.append(upper[live] - rep.samples[live, 1])

        budget = average_cost(c, quartic)
        s_avg = ConstraintSet(
            regime="average", costs=(CostBudget(quartic, budget),)
        )
        try:
            rep = kkt_certificate(exp, c, s_avg, cap, cfg)
        except EnvelopeError:
            continue
        r0 = rep.samples[:, 0]
        _, lower = lhs_envelopes(exp, c, s_avg, rep.nu, r0, capacity_value=cap)
        lower_m.append(rep.samples[:, 1] - lower)

    return [
        _result(
            "optimality-ceiling-far-field",
            np.concatenate(upper_m) if upper_m else np.zeros(0),
            slack,
            skipped=upper_skip,
        ),
        _result(
            "optimality-floor-far-field",
            np.concatenate(lower_m) if lower_m else np.zeros(0),
            slack,
        ),
    ]


DEFAULT_CONSTELLATIONS = (
    RingConstellation(radii=(0.0, 1.2, 2.4), probs=(0.3, 0.4, 0.3)),
    RingConstellation(radii=(1.8,), probs=(1.0,)),
)


def audit_all(
    exp: SeriesExpansion,
    constellations: list[RingConstellation] | None = None,
    point_count: int = 10_000,
    seed: int = 0,
) -> list[AuditResult]:
    """Run the whole battery and return one result per inequality.

    The expansion's input envelope must cover the constellation radii
    (DEFAULT_CONSTELLATIONS reach 2.4 when none are given).
    """
    if point_count < 16:
        raise ValueError("point_count must be at least 16")
    if constellations is None:
        constellations = list(DEFAULT_CONSTELLATIONS)
    slack = max(10.0 * exp.tail_bound, 1e-9)
    tol = 1e-10
    u = qmc.Halton(d=4, scramble=True, seed=seed).random(point_count)

    results = _bessel_results(u, slack)
    results.append(_conditional_ceiling(exp, u, slack))
    results.append(_conditional_floor(exp.params, u, slack, tol))
    results.extend(_output_density_results(exp, constellations, u, slack, tol))
    results.extend(_moment_results(exp, u, slack))
    results.extend(_coefficient_results(exp, slack))
    results.append(_sandwich_decay(exp, u, slack))
    results.append(_phase_sum_tail(exp.params, slack))
    results.extend(_envelope_results(exp, constellations, slack))
    return results


def format_table(results: list[AuditResult]) -> str:
    """Fixed-width table, one audited inequality per line."""
    width = max(len(r.lemma_id) for r in results)
    lines = [
        f"{'check':<{width}}  {'points':>7}  {'skipped':>7}  {'worst margin':>13}  result"
    ]
    for r in results:
        lines.append(
            f"{r.lemma_id:<{width}}  {r.points_checked:>7}  {r.points_skipped:>7}  "
            f"{r.worst_margin:>13.3e}  {'pass' if r.passed else 'FAIL'}"
        )
    return "\n".join(lines)
