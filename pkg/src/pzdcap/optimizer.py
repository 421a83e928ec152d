"""Capacity search over ring constellations with a first-order certificate.

The mutual information is concave in the input law, so for fixed ring radii
the probabilities solve a convex problem: projected gradient ascent over the
probability simplex (intersected with the average-cost half-spaces), stopped
by the Frank-Wolfe duality gap.  The radii themselves are improved by
multi-start projected ascent with central-difference gradients.  A candidate
is accepted only when the KKT left-hand side

    LHS(r0) = C - ln 2pi + marginal_score(r0) + h(R, Phi | r0)
              [+ nu (C(r0) - A) in average-cost regimes]

is non-negative on a dense amplitude grid and vanishes at every mass point;
that condition is necessary and sufficient for the ring distribution to be
capacity-achieving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize, special

from .channel import (
    EnvelopeError,
    SeriesExpansion,
    amplitude_pdf,
    make_expansion,
    pdf_bound_constants,
    xi_factor,
)
from .constellation import (
    ConstraintSet,
    RingConstellation,
    average_cost,
    merge_rings,
)
from .infomath import (
    GridSpec,
    build_grid,
    conditional_entropy_ring,
    k1_constant,
    mutual_information,
)
from .specfun import i0_exponential_floor, laguerre_half

LOG_2PI = math.log(2.0 * math.pi)

# Probability below which a ring does not count as a point of increase.
_MASS_FLOOR = 1e-9
# Ring-count search stops after two consecutive gains below this (nats).
_PLATEAU_NATS = 1e-5
# epsilon in the peak-regime LHS upper envelope; any value in (0, 1/2) works.
_ENVELOPE_EPS = 0.1


class ConvergenceError(RuntimeError):
    """An ascent loop hit its iteration cap before reaching tolerance."""

    def __init__(self, message, last_iterate=None, gradient_norm=math.nan):
        super().__init__(message)
        self.last_iterate = (
            None if last_iterate is None else np.asarray(last_iterate, dtype=float)
        )
        self.gradient_norm = float(gradient_norm)


@dataclass(frozen=True)
class SolveConfig:
    """Knobs for the capacity search.

    ring_counts bounds the search over the number of rings.  prob_tol is the
    Frank-Wolfe gap at which the inner (probability) ascent stops, radius_tol
    the outer step size below which the radii count as converged, kkt_tol the
    certificate tolerance, all in their natural units (probability mass,
    amplitude, nats).  kkt_points is the minimum LHS sampling density and
    multiplier_bracket the search interval for the average-cost multiplier.
    """

    ring_counts: tuple = (1, 12)
    kkt_tol: float = 1e-3
    prob_tol: float = 1e-9
    radius_tol: float = 1e-5
    grid: GridSpec = field(default_factory=GridSpec)
    multiplier_bracket: tuple = (0.0, 32.0)
    kkt_points: int = 400
    multi_starts: int = 5
    stage_iters: int = 30
    max_outer_iters: int = 200
    inner_iter_cap: int = 20000

    def __post_init__(self):
        lo, hi = self.ring_counts
        if not 1 <= int(lo) <= int(hi):
            raise ValueError(f"bad ring_counts {self.ring_counts!r}")
        for name in ("kkt_tol", "prob_tol", "radius_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.kkt_points < 2:
            raise ValueError(f"kkt_points must be >= 2, got {self.kkt_points}")
        if self.multiplier_bracket[0] < 0 or not (
            self.multiplier_bracket[1] > self.multiplier_bracket[0]
        ):
            raise ValueError(f"bad multiplier_bracket {self.multiplier_bracket!r}")


@dataclass(frozen=True)
class KktReport:
    """First-order optimality certificate for a candidate constellation.

    samples holds (r0, LHS(r0)) rows in nats over the certification grid,
    worst_violation the minimum sampled LHS, mass_point_residuals the |LHS|
    at the rings carrying probability.  tail_covered says whether the
    analytic lower envelope accounts for every radius past the grid (always
    true in peak regimes, where the grid itself reaches the peak radius).
    certified is True exactly when the tail is covered, worst_violation >=
    -kkt_tol and every residual is <= kkt_tol.
    """

    regime: str
    nu: float
    samples: np.ndarray
    worst_violation: float
    mass_point_residuals: np.ndarray
    certified: bool
    tail_covered: bool = True

    def __post_init__(self):
        samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        residuals = np.atleast_1d(np.asarray(self.mass_point_residuals, dtype=float))
        samples.setflags(write=False)
        residuals.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "mass_point_residuals", residuals)
        object.__setattr__(self, "nu", float(self.nu))
        if self.nu < 0:
            raise ValueError(f"nu must be >= 0, got {self.nu}")


# ---------------------------------------------------------------------------
# projections and linear subproblems over the feasible probability polytope


def _simplex_project(y):
    """Euclidean projection onto the probability simplex (sort algorithm)."""
    y = np.asarray(y, dtype=float)
    u = np.sort(y)[::-1]
    thresholds = (np.cumsum(u) - 1.0) / np.arange(1.0, y.size + 1.0)
    k = np.nonzero(u > thresholds)[0][-1]
    return np.maximum(y - thresholds[k], 0.0)


def _project_probs(y, cost_rows, budgets):
    """Project y onto the simplex intersected with {cost_rows @ p <= budgets}."""
    x = _simplex_project(y)
    if cost_rows is None or np.all(cost_rows @ x <= budgets + 1e-12):
        return x
    if cost_rows.shape[0] == 1:
        # c @ proj(y - lam c) is non-increasing in lam, so bisect to the
        # active boundary.
        c = cost_rows[0]
        cap = float(budgets[0])
        lo, hi = 0.0, 1.0
        while float(c @ _simplex_project(y - hi * c)) > cap:
            hi *= 2.0
            if hi > 1e18:
                raise ConvergenceError(
                    "cost half-space projection found no feasible point", y
                )
        for _ in range(120):
            mid = 0.5 * (lo + hi)
            if float(c @ _simplex_project(y - mid * c)) > cap:
                lo = mid
            else:
                hi = mid
        return _simplex_project(y - hi * c)
    # Several active costs: Dykstra's alternating projections.
    sets = [None] + list(range(cost_rows.shape[0]))
    x = np.asarray(y, dtype=float)
    corrections = np.zeros((len(sets), x.size))
    for _ in range(1000):
        x_prev = x
        for idx, which in enumerate(sets):
            z = x + corrections[idx]
            if which is None:
                x = _simplex_project(z)
            else:
                c = cost_rows[which]
                excess = float(c @ z) - float(budgets[which])
                x = z - (max(excess, 0.0) / float(c @ c)) * c
            corrections[idx] = z - x
        if float(np.max(np.abs(x - x_prev))) < 1e-15:
            break
    return _simplex_project(x)


def _lp_argmax(g, cost_rows, budgets):
    """Maximize g @ v over the feasible polytope (vertex enumeration for at
    most one cost, LP otherwise)."""
    n = g.size
    if cost_rows is None:
        v = np.zeros(n)
        v[int(np.argmax(g))] = 1.0
        return v
    if cost_rows.shape[0] == 1:
        c = cost_rows[0]
        cap = float(budgets[0])
        cheap = np.nonzero(c <= cap)[0]
        dear = np.nonzero(c > cap)[0]
        best_val = -math.inf
        best = None
        for i in cheap:
            if g[i] > best_val:
                best_val = float(g[i])
                best = np.zeros(n)
                best[i] = 1.0
        for i in cheap:
            for j in dear:
                theta = (c[j] - cap) / (c[j] - c[i])
                val = theta * g[i] + (1.0 - theta) * g[j]
                if val > best_val:
                    best_val = float(val)
                    best = np.zeros(n)
                    best[i] = theta
                    best[j] = 1.0 - theta
        if best is None:
            raise ConvergenceError("no feasible vertex under the cost budget", g)
        return best
    res = optimize.linprog(
        -g,
        A_ub=cost_rows,
        b_ub=budgets,
        A_eq=np.ones((1, n)),
        b_eq=np.ones(1),
        bounds=(0.0, None),
        method="highs",
    )
    if not res.success:
        raise ConvergenceError("linear subproblem failed: " + res.message, g)
    return np.asarray(res.x, dtype=float)


# ---------------------------------------------------------------------------
# inner convex problem: probabilities for fixed radii


class _RingCache:
    """Memo of per-ring quantities on one (expansion, grid) pair."""

    def __init__(self, exp: SeriesExpansion, grid):
        self.exp = exp
        self.grid = grid
        self._rows = {}
        self._entropy = {}

    def row(self, r0: float) -> np.ndarray:
        key = round(float(r0), 12)
        out = self._rows.get(key)
        if out is None:
            out = amplitude_pdf(self.exp, self.grid.radial_r, key)
            out.setflags(write=False)
            self._rows[key] = out
        return out

    def entropy(self, r0: float) -> float:
        key = round(float(r0), 12)
        out = self._entropy.get(key)
        if out is None:
            out = conditional_entropy_ring(self.exp, key, self.grid)
            self._entropy[key] = out
        return out


def _cost_arrays(s: ConstraintSet, radii):
    if not s.has_cost:
        return None, None
    radii = np.asarray(radii, dtype=float)
    rows = np.vstack([np.atleast_1d(cb.cost(radii)) for cb in s.costs]).astype(float)
    budgets = np.array([cb.budget for cb in s.costs], dtype=float)
    return rows, budgets


def _polish_probs(p, rows, w, value_grad, cost_rows, budgets):
    """Active-set Newton endgame on the current face of the polytope.

    Projected ascent identifies the optimal face quickly but crawls along it;
    a few Newton steps on the support (with the simplex and any active cost
    as equality constraints) reach machine precision.  Returns the improved
    point; on any numerical trouble returns the input unchanged.
    """
    p = p.copy()
    support = p > 1e-13
    if not support.any():
        support[int(np.argmax(p))] = True
    active = []
    if cost_rows is not None:
        active = [
            k
            for k in range(cost_rows.shape[0])
            if budgets[k] - float(cost_rows[k] @ p) <= 1e-11 * max(1.0, budgets[k])
        ]
    for _ in range(100):
        f, g = value_grad(p)
        idx = np.flatnonzero(support)
        pf = p @ rows
        with np.errstate(divide="ignore"):
            inv = np.where(pf > 0.0, 1.0 / np.where(pf > 0.0, pf, 1.0), 0.0)
        hess = -(rows[idx] * (w * inv)) @ rows[idx].T
        normals = [np.ones(idx.size)] + [cost_rows[k][idx] for k in active]
        a_mat = np.vstack(normals)
        m = a_mat.shape[0]
        kkt = np.block([[hess, a_mat.T], [a_mat, np.zeros((m, m))]])
        try:
            sol = np.linalg.solve(
                kkt, np.concatenate([-g[idx], np.zeros(m)])
            )
        except np.linalg.LinAlgError:
            return p
        dp = sol[: idx.size]
        mult = sol[idx.size :]
        if float(np.max(np.abs(dp), initial=0.0)) < 1e-15:
            # Stationary on the working set; only here is the multiplier
            # sign test meaningful, so release a wrongly-signed cost first
            # and otherwise admit the best entering coordinate.
            if active and min(mult[1:]) < -1e-12:
                active.pop(int(np.argmin(mult[1:])))
                continue
            shadow = g - mult[0]
            for j, k in enumerate(active):
                shadow = shadow - mult[1 + j] * cost_rows[k]
            entering = np.flatnonzero(~support & (shadow > 1e-12))
            if entering.size == 0:
                return p
            support[entering[int(np.argmax(shadow[entering]))]] = True
            continue
        t = 1.0
        block_coord = None
        block_cost = None
        for i_local, i in enumerate(idx):
            if dp[i_local] < 0.0 and -p[i] / dp[i_local] < t:
                t = -p[i] / dp[i_local]
                block_coord = i
        if cost_rows is not None:
            for k in range(cost_rows.shape[0]):
                if k in active:
                    continue
                rate = float(cost_rows[k][idx] @ dp)
                if rate > 0.0:
                    tmax = (budgets[k] - float(cost_rows[k] @ p)) / rate
                    if tmax < t:
                        t = tmax
                        block_cost, block_coord = k, None
        for _ in range(50):
            trial = p.copy()
            trial[idx] = np.maximum(p[idx] + t * dp, 0.0)
            trial /= trial.sum()
            fc, _ = value_grad(trial)
            if fc >= f - 1e-13 * (1.0 + abs(f)):
                break
            t *= 0.5
            block_coord = block_cost = None
        else:
            # No ascent left along this direction: treat the iterate as
            # face-stationary and release a wrongly-signed cost if any.
            if active and min(mult[1:]) < -1e-12:
                active.pop(int(np.argmin(mult[1:])))
                continue
            return p
        p = trial
        if block_cost is not None:
            active.append(block_cost)
        elif block_coord is not None:
            support[block_coord] = False
            p[block_coord] = 0.0
            p /= p.sum()
    return p


def _inner_solve(cache: _RingCache, radii, s: ConstraintSet, cfg: SolveConfig, probs0=None):
    """Maximize mi over the probabilities for fixed radii.

    Returns (probs, mi_nats, fw_gap).  Objective and gradient share one
    radial grid, so the returned Frank-Wolfe gap bounds the suboptimality of
    the discrete problem itself.  Projected gradient ascent does the global
    work; a Newton endgame on the identified face reaches prob_tol.
    """
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    n = radii.size
    w = cache.grid.radial_w
    rows = np.vstack([cache.row(r) for r in radii])
    mass = rows @ w
    h_cond = np.array([cache.entropy(r) for r in radii])
    cost_rows, budgets = _cost_arrays(s, radii)
    if cost_rows is not None:
        # Costs increase with radius, so the smallest ring is the cheapest
        # point of the simplex; it decides feasibility.
        cheapest = int(np.argmin(radii))
        if np.any(cost_rows[:, cheapest] > budgets):
            raise ValueError("no probability vector satisfies the cost budgets")

    def value_grad(p):
        pf = p @ rows
        with np.errstate(divide="ignore", under="ignore"):
            log_pf = np.where(pf > 0.0, np.log(np.where(pf > 0.0, pf, 1.0)), 0.0)
            h_out = -float(np.dot(w, special.xlogy(pf, pf)))
        val = h_out + LOG_2PI - float(p @ h_cond)
        grad = -(rows @ (w * log_pf)) - mass - h_cond
        return val, grad

    if n == 1:
        p = np.ones(1)
        return p, value_grad(p)[0], 0.0

    def fw_gap(p, g):
        v = _lp_argmax(g, cost_rows, budgets)
        return float(g @ (v - p))

    coarse_tol = max(cfg.prob_tol, 1e-6)
    p = np.full(n, 1.0 / n) if probs0 is None else np.asarray(probs0, dtype=float)
    p = _project_probs(p, cost_rows, budgets)
    f, g = value_grad(p)
    step = 1.0
    stalls = 0
    cheap_gap = cost_rows is None or cost_rows.shape[0] == 1
    for it in range(cfg.inner_iter_cap):
        if cheap_gap or it % 16 == 0:
            if fw_gap(p, g) <= coarse_tol:
                break
        step = min(step * 2.0, 1e6)
        improved = False
        while step >= 1e-18:
            cand = _project_probs(p + step * g, cost_rows, budgets)
            d = cand - p
            slope = float(g @ d)
            if slope <= 0.0:
                break
            fc, gc = value_grad(cand)
            if fc >= f + 1e-4 * slope:
                p, f, g = cand, fc, gc
                improved = True
                break
            step *= 0.5
        if improved:
            stalls = 0
        else:
            stalls += 1
            if stalls >= 3:
                break
    gap = fw_gap(p, g)
    if gap > cfg.prob_tol:
        p = _polish_probs(p, rows, w, value_grad, cost_rows, budgets)
        f, g = value_grad(p)
        gap = fw_gap(p, g)
    if gap <= cfg.prob_tol:
        return p, f, gap
    raise ConvergenceError(
        f"probability ascent stalled with duality gap {gap:.3e}",
        last_iterate=p,
        gradient_norm=float(np.linalg.norm(g)),
    )


def optimize_probs(exp: SeriesExpansion, radii, s: ConstraintSet, cfg: SolveConfig = None):
    """Capacity-achieving probabilities for fixed ring radii.

    Projected gradient ascent on the probability simplex, intersected with
    the average-cost half-spaces when present, stopped once the Frank-Wolfe
    duality gap drops below cfg.prob_tol.
    """
    cfg = cfg or SolveConfig()
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if radii.size == 0:
        raise ValueError("need at least one radius")
    if s.has_peak and float(radii.max()) > s.rho + 1e-12:
        raise ValueError("radii exceed the peak constraint")
    grid = build_grid(exp, max_radius=float(radii.max()), spec=cfg.grid)
    cache = _RingCache(exp, grid)
    probs, _, _ = _inner_solve(cache, radii, s, cfg)
    return probs


# ---------------------------------------------------------------------------
# outer problem: radii


def _radius_cap(exp: SeriesExpansion, s: ConstraintSet) -> float:
    if s.has_peak:
        if exp.r0_max + 1e-12 < s.rho:
            raise EnvelopeError(
                f"expansion input envelope {exp.r0_max} is smaller than the "
                f"peak radius {s.rho}"
            )
        return float(s.rho)
    return float(exp.r0_max)


def _separate(radii, r_hi: float, min_sep: float):
    """Sort radii into [0, r_hi] with pairwise separation >= min_sep."""
    r = np.sort(np.asarray(radii, dtype=float))
    r = np.clip(r, 0.0, r_hi)
    r = np.minimum(r, r_hi - min_sep * np.arange(r.size - 1, -1, -1.0))
    r[0] = max(r[0], 0.0)
    for i in range(1, r.size):
        if r[i] - r[i - 1] < min_sep:
            r[i] = r[i - 1] + min_sep
    return r


def _budget_shrink(radii, s: ConstraintSet) -> np.ndarray:
    """Scale a radii spread down until the uniform-probability average cost
    meets every budget (identity when already within budget)."""
    if not s.has_cost:
        return radii
    uniform = np.full(radii.size, 1.0 / radii.size)

    def within(t):
        return all(
            float(uniform @ np.atleast_1d(cb.cost(t * radii))) <= cb.budget
            for cb in s.costs
        )

    if within(1.0):
        return radii
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if within(mid):
            lo = mid
        else:
            hi = mid
    return lo * radii


def _repair_feasible(radii, s: ConstraintSet) -> np.ndarray:
    """Pull the smallest radius inside the cost ball so that at least one
    probability vector is feasible (rings above budget are fine in mixtures,
    a cheapest ring above budget is not)."""
    if not s.has_cost:
        return radii
    affordable = min(cb.cost.inverse(cb.budget) for cb in s.costs)
    radii = np.asarray(radii, dtype=float)
    if radii.min() > affordable:
        radii = radii.copy()
        radii[int(np.argmin(radii))] = affordable * (1.0 - 1e-9)
    return radii


def _starts(n: int, r_hi: float, warm, s: ConstraintSet):
    """Deterministic multi-start radii: quantile spreads at several powers
    and scales (shrunk onto the cost-budget surface in average regimes), a
    zero-anchored spread, and the warm start when given."""
    quantiles = np.arange(1.0, n + 1.0) / n
    raw = [r_hi * quantiles**q for q in (0.5, 1.0, 2.0)]
    raw.append(0.6 * r_hi * quantiles)
    raw.append(0.3 * r_hi * quantiles)
    if n >= 2:
        raw.append(r_hi * np.arange(n) / (n - 1.0))
    else:
        raw.append(np.array([0.5 * r_hi]))
    raw = [_budget_shrink(r, s) for r in raw]
    if warm is not None:
        warm = np.asarray(warm, dtype=float)
        if warm.size == n:
            raw.insert(0, warm)
    out, seen = [], set()
    for r in raw:
        key = tuple(np.round(r / max(r_hi, 1e-300), 9))
        if key not in seen:
            seen.add(key)
            out.append(r)
    return out


def _ascend_radii(cache, radii0, s, cfg, r_hi, iters, probs0=None):
    """Projected gradient ascent on the radii with an exact inner solve per
    evaluation; returns (radii, probs, mi)."""
    scale = max(r_hi, 1.0)
    min_sep = 1e-7 * scale
    h_fd = 1e-4 * scale
    radii = _repair_feasible(_separate(radii0, r_hi, min_sep), s)
    probs, f, _ = _inner_solve(cache, radii, s, cfg, probs0)
    step = 0.1 * scale
    small = 0
    for _ in range(iters):
        grad = np.zeros_like(radii)
        for i in range(radii.size):
            up = min(h_fd, r_hi - radii[i])
            dn = min(h_fd, radii[i])
            if up + dn <= 0.0:
                continue
            f_up = f
            f_dn = f
            if up > 0.0:
                trial = radii.copy()
                trial[i] += up
                try:
                    _, f_up, _ = _inner_solve(cache, trial, s, cfg, probs)
                except ValueError:
                    # Trial pushed the cheapest ring over budget; one-sided.
                    up = 0.0
                    f_up = f
            if dn > 0.0:
                trial = radii.copy()
                trial[i] -= dn
                _, f_dn, _ = _inner_solve(cache, trial, s, cfg, probs)
            if up + dn <= 0.0:
                continue
            grad[i] = (f_up - f_dn) / (up + dn)
        if not np.any(grad):
            break
        step = min(step * 2.0, scale)
        improved = False
        move = 0.0
        while step >= 1e-12 * scale:
            cand = _separate(radii + step * grad, r_hi, min_sep)
            d = cand - radii
            slope = float(grad @ d)
            move = float(np.max(np.abs(d)))
            if move == 0.0 or slope <= 0.0:
                step *= 0.5
                continue
            try:
                pc, fc, _ = _inner_solve(cache, cand, s, cfg, probs)
            except ValueError:
                step *= 0.5
                continue
            if fc >= f + 1e-4 * step * slope:
                radii, probs, f = cand, pc, fc
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        if move < cfg.radius_tol:
            small += 1
            if small >= 2:
                break
        else:
            small = 0
    return radii, probs, f


def optimize_radii(
    exp: SeriesExpansion,
    n_rings: int,
    s: ConstraintSet,
    cfg: SolveConfig = None,
    *,
    warm_start=None,
    cache: _RingCache = None,
) -> RingConstellation:
    """Best constellation with at most n_rings rings.

    Multi-start projected ascent on the radii around the exact convex inner
    step.  Rings that merge within radius_tol or end up carrying no
    probability are dropped, so the result may have fewer rings than asked.
    """
    cfg = cfg or SolveConfig()
    if n_rings < 1:
        raise ValueError(f"n_rings must be >= 1, got {n_rings}")
    r_hi = _radius_cap(exp, s)
    if cache is None:
        cache = _RingCache(exp, build_grid(exp, max_radius=r_hi, spec=cfg.grid))
    staged = [
        _ascend_radii(cache, radii0, s, cfg, r_hi, cfg.stage_iters)
        for radii0 in _starts(n_rings, r_hi, warm_start, s)
    ]
    radii, probs, _ = max(staged, key=lambda t: t[2])
    radii, probs, _ = _ascend_radii(
        cache, radii, s, cfg, r_hi, cfg.max_outer_iters, probs
    )
    keep = probs > _MASS_FLOOR
    merged = merge_rings(radii[keep], probs[keep], atol=cfg.radius_tol)
    final_radii = np.asarray(merged.radii, dtype=float)
    final_probs, _, _ = _inner_solve(cache, final_radii, s, cfg)
    if not s.has_peak and float(final_radii.max()) > r_hi * (1.0 - 1e-3):
        raise EnvelopeError(
            "optimal radii press against the expansion input envelope "
            f"({final_radii.max():.6g} of {r_hi:.6g}); enlarge the expansion"
        )
    return RingConstellation(radii=final_radii, probs=final_probs)


# ---------------------------------------------------------------------------
# KKT certificate


@lru_cache(maxsize=1)
def _k_floor() -> float:
    return i0_exponential_floor(_ENVELOPE_EPS)


def lhs_envelopes(
    exp: SeriesExpansion,
    c: RingConstellation,
    s: ConstraintSet,
    nu: float,
    r0,
    capacity_value: float = None,
):
    """Closed-form sandwich for the optimality LHS at amplitude r0.

    Returns (upper, lower) in nats, vectorized in r0.  The upper envelope
    requires a peak radius and is +inf where its sandwich factor xi(r0) >= 1
    or in regimes without one; both envelopes degenerate (to +/-inf) when the
    bound constants do, e.g. at gamma = 0.  The lower envelope grows like the
    cost for superquadratic average costs, which is what caps the KKT grid.
    """
    r0 = np.asarray(r0, dtype=float)
    params = exp.params
    nl = params.noise_power
    if capacity_value is None:
        grid = build_grid(exp, max_radius=float(np.max(c.radii)), spec=GridSpec())
        capacity_value = mutual_information(exp, c, grid).mi
    cap_nats = float(capacity_value)
    lag = laguerre_half(-r0 * r0 / nl)
    root = math.sqrt(math.pi / nl)
    k_u, _ = pdf_bound_constants(params)
    quad = r0 * r0 / nl

    if s.has_peak and math.isfinite(k_u):
        xi = np.asarray(xi_factor(exp, r0), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            guard = np.where(xi < 1.0, -np.log1p(-np.minimum(xi, 1.0)), math.inf)
        upper = (
            cap_nats
            - math.log(_k_floor())
            + quad
            + guard
            + (s.rho - (1.0 - _ENVELOPE_EPS) * r0) * root * lag
        )
    else:
        upper = np.full_like(r0, math.inf)

    k1 = k1_constant(c, nl)
    if math.isfinite(k_u) and k1 > 0.0:
        lower = cap_nats + math.log(k1 / (2.0 * math.pi * k_u)) + quad - r0 * root * lag
        if s.has_cost:
            cb = s.costs[0]
            lower = lower + nu * (np.asarray(cb.cost(r0), dtype=float) - cb.budget)
    else:
        lower = np.full_like(r0, -math.inf)

    if upper.ndim == 0:
        return float(upper), float(lower)
    return upper, lower


def _kkt_range(exp, c, s, nu, cap_nats, r_cap):
    """(grid end, tail covered) for the certificate (average regimes only).

    The grid can stop where the analytic lower envelope certifies LHS > 0
    for every larger radius.  When the envelope only clears +1 nat beyond
    the expansion input envelope, a larger expansion would certify, so
    EnvelopeError is raised; when it clears nowhere (e.g. the fitted nu is
    too small to beat the quadratic decay), no enlargement can help and the
    tail is reported uncovered instead."""
    k_u, _ = pdf_bound_constants(exp.params)
    if not math.isfinite(k_u):
        return r_cap, True
    probe = np.linspace(0.0, r_cap, 257)
    _, lower = lhs_envelopes(exp, c, s, nu, probe, capacity_value=cap_nats)
    below = np.nonzero(~(lower > 1.0))[0]
    if below.size == 0:
        return r_cap, True
    last = float(probe[below[-1]])
    if last < r_cap - 1e-9:
        return min(r_cap, last + 0.05 * r_cap), True
    far = np.linspace(r_cap, 8.0 * r_cap, 257)
    _, lower_far = lhs_envelopes(exp, c, s, nu, far, capacity_value=cap_nats)
    if bool(np.any(lower_far > 1.0)):
        raise EnvelopeError(
            "lower LHS envelope clears +1 nat only beyond the expansion "
            "input envelope; enlarge the expansion to certify"
        )
    return r_cap, False


def kkt_certificate(
    exp: SeriesExpansion,
    c: RingConstellation,
    s: ConstraintSet,
    capacity_value: float,
    cfg: SolveConfig = None,
    *,
    cache: _RingCache = None,
) -> KktReport:
    """Sample the optimality LHS on a dense amplitude grid and certify.

    The multiplier nu is fitted by minimizing the worst mass-point residual
    (complementary slackness forces nu = 0 whenever the cost is slack); the
    grid covers [0, rho] for peak/joint regimes and [0, r*] for average
    regimes, where r* is the radius past which the analytic lower envelope
    already guarantees LHS > 0.
    """
    cfg = cfg or SolveConfig()
    if s.has_cost and len(s.costs) > 1:
        raise ValueError("the certificate handles a single average cost")
    r_cap = _radius_cap(exp, s)
    if cache is None:
        cache = _RingCache(exp, build_grid(exp, max_radius=r_cap, spec=cfg.grid))
    grid = cache.grid
    w = grid.radial_w
    cap_nats = float(capacity_value)

    radii = np.asarray(c.radii, dtype=float)
    probs = np.asarray(c.probs, dtype=float)
    pf = probs @ np.vstack([cache.row(r) for r in radii])
    with np.errstate(divide="ignore"):
        w_log_pf = w * np.where(pf > 0.0, np.log(np.where(pf > 0.0, pf, 1.0)), 0.0)

    def lhs_base(points):
        out = np.empty(points.size)
        for k, r0 in enumerate(points):
            ms = float(cache.row(r0) @ w_log_pf)
            out[k] = cap_nats - LOG_2PI + ms + cache.entropy(r0)
        return out

    mass_r = radii[probs > _MASS_FLOOR]
    base_mass = lhs_base(mass_r)

    nu = 0.0
    cost_shift_mass = np.zeros_like(base_mass)
    if s.has_cost:
        cb = s.costs[0]
        slack = cb.budget - average_cost(c, cb.cost)
        direction = np.asarray(cb.cost(mass_r), dtype=float) - cb.budget
        if slack <= max(1e-6 * cb.budget, 1e-9) and mass_r.size > 0:
            if float(np.max(np.abs(direction), initial=0.0)) <= 1e-9 * max(
                1.0, cb.budget
            ):
                # Every mass point sits exactly on the budget sphere, so
                # the residuals cannot pin nu; pick the multiplier lifting
                # the sampled LHS highest instead.
                probe_r = np.unique(
                    np.concatenate([np.linspace(0.0, r_cap, 129), mass_r])
                )
                probe_base = lhs_base(probe_r)
                probe_dir = np.asarray(cb.cost(probe_r), dtype=float) - cb.budget
                res = optimize.minimize_scalar(
                    lambda v: -float(np.min(probe_base + v * probe_dir)),
                    bounds=cfg.multiplier_bracket,
                    method="bounded",
                    options={"xatol": 1e-12},
                )
            else:
                res = optimize.minimize_scalar(
                    lambda v: float(np.max(np.abs(base_mass + v * direction))),
                    bounds=cfg.multiplier_bracket,
                    method="bounded",
                    options={"xatol": 1e-12},
                )
            nu = max(0.0, float(res.x))
        cost_shift_mass = nu * direction

    if s.has_peak:
        hi, covered = min(float(s.rho), r_cap), True
    else:
        hi, covered = _kkt_range(exp, c, s, nu, cap_nats, r_cap)
    points = np.unique(np.concatenate([np.linspace(0.0, hi, cfg.kkt_points), mass_r]))
    lhs = lhs_base(points)
    if s.has_cost:
        cb = s.costs[0]
        lhs = lhs + nu * (np.asarray(cb.cost(points), dtype=float) - cb.budget)

    residuals = np.abs(base_mass + cost_shift_mass)
    worst = float(lhs.min())
    certified = (
        covered
        and worst >= -cfg.kkt_tol
        and (residuals.size == 0 or float(residuals.max()) <= cfg.kkt_tol)
    )
    return KktReport(
        regime=s.regime,
        nu=nu,
        samples=np.column_stack([points, lhs]),
        worst_violation=worst,
        mass_point_residuals=residuals,
        certified=bool(certified),
        tail_covered=bool(covered),
    )


# ---------------------------------------------------------------------------
# top-level search


def default_expansion(
    params, s: ConstraintSet, tol: float = 1e-10, tail_sigmas: float = 10.0
) -> SeriesExpansion:
    """Series expansion sized for a constraint set: the input box covers every
    admissible radius (peak) or a generous multiple of the cost ball
    (average), the output box adds a Gaussian tail margin."""
    if s.has_peak:
        r0 = float(s.rho)
    else:
        r0 = max(cb.cost.inverse(1000.0 * cb.budget) for cb in s.costs)
        r0 = max(r0, 3.0 * max(cb.cost.inverse(cb.budget) for cb in s.costs), 1.0)
    r_max = r0 + tail_sigmas * math.sqrt(params.noise_power)
    return make_expansion(params, r0_max=r0, r_max=r_max, tol=tol)


def _enlarge(exp: SeriesExpansion) -> SeriesExpansion:
    margin = exp.r_max - exp.r0_max
    r0 = 1.5 * exp.r0_max
    return make_expansion(
        exp.params,
        r0_max=r0,
        r_max=r0 + margin,
        tol=max(exp.tail_bound, 1e-13),
    )


def _grow_warm(radii, n: int, r_hi: float, noise_scale: float):
    """Extend a warm-start radii set to n rings by splitting the widest gap.

    The top edge is a few noise widths above the current largest ring, not
    the full exploration cap, so new rings start where they can matter.
    """
    if radii is None:
        return None
    r = sorted(float(x) for x in np.asarray(radii, dtype=float))
    top = min(r_hi, r[-1] + 3.0 * noise_scale)
    while len(r) < n:
        edges = [0.0] + r + [top]
        widths = np.diff(edges)
        i = int(np.argmax(widths))
        if widths[i] <= 0.0:
            break
        r.insert(i, 0.5 * (edges[i] + edges[i + 1]))
        r.sort()
    return np.asarray(r[:n], dtype=float)


def _solve_once(exp, s, cfg):
    n_min, n_max = (int(v) for v in cfg.ring_counts)
    r_hi = _radius_cap(exp, s)
    cache = _RingCache(exp, build_grid(exp, max_radius=r_hi, spec=cfg.grid))
    best = None
    prev_mi = None
    flat = 0
    warm = None
    noise_scale = math.sqrt(exp.params.noise_power)
    for n in range(n_min, n_max + 1):
        c = optimize_radii(
            exp, n, s, cfg, warm_start=_grow_warm(warm, n, r_hi, noise_scale), cache=cache
        )
        breakdown = mutual_information(exp, c, cache.grid)
        report = kkt_certificate(exp, c, s, breakdown.mi, cfg, cache=cache)
        if best is None or breakdown.mi > best[1].mi:
            best = (c, breakdown, report)
        if report.certified:
            return c, breakdown, report
        if prev_mi is not None:
            flat = flat + 1 if breakdown.mi - prev_mi < _PLATEAU_NATS else 0
            if flat >= 2:
                break
        prev_mi = breakdown.mi
        warm = c.radii
    return best


def solve_capacity(exp: SeriesExpansion, s: ConstraintSet, cfg: SolveConfig = None):
    """Search ring counts, certify, and return (constellation, mi, report).

    The ring count grows from the configured minimum until the certificate
    passes or two consecutive increments gain less than 1e-5 nats; the best
    candidate found is returned either way (its report says whether it is
    certified).  An expansion whose envelope turns out too small for the
    optimal radii or for the certificate is enlarged and the search re-run.
    """
    cfg = cfg or SolveConfig()
    for attempt in range(4):
        try:
            return _solve_once(exp, s, cfg)
        except EnvelopeError:
            if attempt == 3:
                raise
            exp = _enlarge(exp)
