"""Monte-Carlo validation of the channel law.

The exact input-output map is simulated directly: a Brownian path W on
[0, L] is drawn as independent circularly symmetric Gaussian increments,
the nonlinear phase integral of |x + W| squared is accumulated by a
left-endpoint Riemann sum, and the output is

    Y = [x + W(L)] * exp(j * gamma * integral).

Everything else here is cross-validation of the analytic machinery:
histogram comparison of (|Y|, arg Y) against the series density, and a
mutual-information estimate from the log-ratio ln p(Y|X) - ln p(Y; F)
evaluated with the same series densities it is meant to check.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from numpy.polynomial import legendre
from scipy import stats

from .channel import (
    ChannelParams,
    EnvelopeError,
    PolarPoint,
    SeriesExpansion,
    joint_pdf_grid,
    joint_pdf_pairs,
)
from .constellation import RingConstellation
from .infomath import output_amplitude_pdf

TWO_PI = 2.0 * math.pi

# Complex path entries held in memory at once while sampling.
_CHUNK_ENTRIES = 2**21


@dataclasses.dataclass(frozen=True)
class SimConfig:
    """Simulation setup: channel, path resolution, sample budget, seed."""

    params: ChannelParams
    steps: int = 1000
    samples: int = 100_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.steps < 100:
            raise ValueError("steps must be at least 100")
        if self.samples < 10_000:
            raise ValueError("samples must be at least 10000")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


@dataclasses.dataclass(frozen=True)
class GoodnessReport:
    """Chi-square and total-variation comparison of samples vs the series pdf."""

    statistic: float
    dof: int
    p_value: float
    tv_distance: float
    cells_used: int
    cells_merged: int
    samples: int


@dataclasses.dataclass(frozen=True)
class MiEstimate:
    """Sample mean and standard error of the mutual-information log-ratio."""

    mi: float
    stderr: float
    samples_used: int
    samples_discarded: int


class BinningError(ValueError):
    """Histogram resolution incompatible with the sample budget."""


def _sample_chunk(
    rng: np.random.Generator,
    params: ChannelParams,
    steps: int,
    x: complex | np.ndarray,
    count: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw `count` outputs for input field x (scalar or per-sample array)."""
    dt = params.length / steps
    scale = math.sqrt(params.sigma2 * dt / 2.0)
    z = rng.standard_normal((count, 2 * steps))
    path = scale * (z[:, 0::2] + 1j * z[:, 1::2])
    del z
    np.cumsum(path, axis=1, out=path)
    w_end = path[:, -1].copy()
    # Left endpoints of the Riemann sum: W = 0, W(dt), ..., W(L - dt).
    path[:, 1:] = path[:, :-1]
    path[:, 0] = 0.0
    path += x[:, None] if np.ndim(x) else x
    integral = dt * ((path.real**2).sum(axis=1) + (path.imag**2).sum(axis=1))
    y = (w_end + (x if np.ndim(x) else x)) * np.exp(1j * params.gamma * integral)
    return np.abs(y), np.angle(y)


def _sample_batch(
    rng: np.random.Generator,
    params: ChannelParams,
    steps: int,
    x: complex | np.ndarray,
    count: int,
) -> tuple[np.ndarray, np.ndarray]:
    chunk = max(1, _CHUNK_ENTRIES // steps)
    r = np.empty(count)
    phi = np.empty(count)
    for lo in range(0, count, chunk):
        hi = min(lo + chunk, count)
        xs = x[lo:hi] if np.ndim(x) else x
        r[lo:hi], phi[lo:hi] = _sample_chunk(rng, params, steps, xs, hi - lo)
    return r, phi


def sample_output(cfg: SimConfig, x0: PolarPoint) -> PolarPoint:
    """One draw of the channel output for input x0.

    The draw is the first element of the stream determined by cfg.seed, so
    repeated calls with the same config return the same point.
    """
    rng = np.random.default_rng(cfg.seed)
    x = x0.r * complex(math.cos(x0.phi), math.sin(x0.phi))
    r, phi = _sample_chunk(rng, cfg.params, cfg.steps, x, 1)
    return PolarPoint(float(r[0]), float(phi[0]))


def sample_outputs(
    cfg: SimConfig,
    x0: PolarPoint,
    count: int | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw `count` outputs (default cfg.samples) as polar arrays (r, phi)."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if count is None:
        count = cfg.samples
    x = x0.r * complex(math.cos(x0.phi), math.sin(x0.phi))
    return _sample_batch(rng, cfg.params, cfg.steps, x, count)


def _cell_probabilities(
    exp: SeriesExpansion,
    x0: PolarPoint,
    edges_r: np.ndarray,
    edges_phi: np.ndarray,
) -> np.ndarray:
    """Integral of the series pdf over each histogram cell (4-point panels)."""
    nodes, weights = legendre.leggauss(4)

    def panelize(edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        centers = 0.5 * (edges[1:] + edges[:-1])
        halves = 0.5 * np.diff(edges)
        pts = centers[:, None] + halves[:, None] * nodes[None, :]
        wts = halves[:, None] * weights[None, :]
        return pts.ravel(), wts.reshape(-1, nodes.size)

    r_pts, r_wts = panelize(edges_r)
    phi_pts, phi_wts = panelize(edges_phi)
    vals = joint_pdf_grid(exp, r_pts, phi_pts, x0.r, x0.phi)
    vals = vals.reshape(edges_r.size - 1, nodes.size, edges_phi.size - 1, nodes.size)
    return np.einsum("ai,bj,aibj->ab", r_wts, phi_wts, vals)


def validate_pdf(
    cfg: SimConfig,
    exp: SeriesExpansion,
    x0: PolarPoint,
    bins: tuple[int, int] = (32, 32),
) -> GoodnessReport:
    """Compare a sampled (r, phi) histogram against the series density.

    Cells whose expected count falls below 5 are merged into a single rest
    cell together with everything outside the histogram window; the
    chi-square statistic runs over the surviving cells plus that rest cell,
    while the total-variation distance is taken over the unmerged grid.
    """
    n_r, n_phi = bins
    if n_r < 2 or n_phi < 2:
        raise ValueError("need at least a 2x2 histogram")

    nl = cfg.params.noise_power
    lo = max(0.0, x0.r - 8.0 * math.sqrt(nl))
    hi = min(x0.r + 8.0 * math.sqrt(nl), exp.r_max)
    edges_r = np.linspace(lo, hi, n_r + 1)
    edges_phi = np.linspace(-math.pi, math.pi, n_phi + 1)

    r, phi = sample_outputs(cfg, x0)
    obs = np.histogram2d(r, phi, bins=(edges_r, edges_phi))[0].ravel()
    probs = _cell_probabilities(exp, x0, edges_r, edges_phi).ravel()
    probs = np.maximum(probs, 0.0)

    n = cfg.samples
    rest_prob = max(0.0, 1.0 - probs.sum())
    rest_obs = n - obs.sum()
    tv = 0.5 * (np.abs(obs / n - probs).sum() + abs(rest_obs / n - rest_prob))

    keep = n * probs >= 5.0
    if keep.sum() < 8:
        raise BinningError(
            f"only {int(keep.sum())} of {probs.size} cells reach the minimum "
            f"expected count of 5; retry with bins around "
            f"({max(2, n_r // 2)}, {max(2, n_phi // 2)}) or more samples"
        )
    rest_exp = n * (rest_prob + probs[~keep].sum())
    rest_obs = n - obs[keep].sum()
    dev = obs[keep] - n * probs[keep]
    statistic = float((dev * dev / (n * probs[keep])).sum())
    if rest_exp > 0.0:
        statistic += (rest_obs - rest_exp) ** 2 / rest_exp
    dof = int(keep.sum())

    return GoodnessReport(
        statistic=statistic,
        dof=dof,
        p_value=float(stats.chi2.sf(statistic, dof)),
        tv_distance=float(tv),
        cells_used=int(keep.sum()),
        cells_merged=int(probs.size - keep.sum()),
        samples=n,
    )


def mc_mutual_information(
    cfg: SimConfig, exp: SeriesExpansion, c: RingConstellation
) -> MiEstimate:
    """Estimate I(F) as the sample mean of ln p(Y|X) - ln [p(|Y|; F) / 2pi].

    Inputs are drawn from the constellation with uniform phase.  Samples
    whose output amplitude leaves the certified envelope (or lands where the
    clamped series vanishes) are discarded and counted; more than 0.1% of
    them indicates an undersized envelope and raises EnvelopeError.
    """
    exp.check_envelope(0.0, max(c.radii))
    rng = np.random.default_rng(cfg.seed)
    n = cfg.samples
    ring_idx = rng.choice(c.n_rings, size=n, p=np.asarray(c.probs))
    theta = rng.uniform(0.0, TWO_PI, size=n)

    terms = []
    discarded = 0
    for i, radius in enumerate(c.radii):
        mask = ring_idx == i
        count = int(mask.sum())
        if count == 0:
            continue
        x = radius * np.exp(1j * theta[mask])
        r, phi = _sample_batch(rng, cfg.params, cfg.steps, x, count)

        inside = r <= exp.r_max
        discarded += count - int(inside.sum())
        # Phase covariance: p(r, phi | r0, theta) = p(r, phi - theta | r0, 0).
        num = joint_pdf_pairs(exp, r[inside], phi[inside] - theta[mask][inside], radius)
        den = output_amplitude_pdf(exp, c, r[inside]) / TWO_PI
        ok = (num > 0.0) & (den > 0.0)
        discarded += int(inside.sum()) - int(ok.sum())
        terms.append(np.log(num[ok]) - np.log(den[ok]))

    if discarded > 1e-3 * n:
        raise EnvelopeError(
            f"{discarded} of {n} samples fell outside the certified envelope; "
            f"rebuild the expansion with a larger r_max"
        )
    values = np.concatenate(terms) if terms else np.zeros(0)
    used = values.size
    mi = float(values.mean()) if used else 0.0
    stderr = float(values.std(ddof=1) / math.sqrt(used)) if used > 1 else math.inf
    return MiEstimate(mi=mi, stderr=stderr, samples_used=used, samples_discarded=discarded)
