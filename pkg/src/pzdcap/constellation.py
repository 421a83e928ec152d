"""Ring constellations, cost functions, and input-constraint regimes.

The capacity-achieving input of the zero-dispersion channel has uniform phase
and finitely many amplitude atoms, so candidate inputs are "ring
constellations": a list of strictly increasing radii with probabilities.
The uniform phase is implicit and never stored.  Three constraint regimes are
supported: a peak amplitude rho, an average cost budget E[C(R0)] <= A, and
their combination.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

PROB_ATOL = 1e-12


@dataclass(frozen=True)
class RingConstellation:
    """Finite amplitude distribution: radii (strictly increasing, >= 0) with
    probabilities summing to 1."""

    radii: tuple
    probs: tuple

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        probs = tuple(float(p) for p in self.probs)
        if len(radii) == 0 or len(radii) != len(probs):
            raise ValueError("radii and probs must be non-empty and equal length")
        if any(not math.isfinite(r) or r < 0 for r in radii):
            raise ValueError("radii must be finite and >= 0")
        if any(radii[i] >= radii[i + 1] for i in range(len(radii) - 1)):
            raise ValueError("radii must be strictly increasing")
        if any(not math.isfinite(p) or p < 0 for p in probs):
            raise ValueError("probabilities must be finite and >= 0")
        if abs(sum(probs) - 1.0) > PROB_ATOL:
            raise ValueError(f"probabilities sum to {sum(probs)!r}, not 1")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "probs", probs)

    @property
    def n_rings(self) -> int:
        return len(self.radii)

    def to_json(self) -> str:
        return json.dumps({"radii": list(self.radii), "probs": list(self.probs)})

    @classmethod
    def from_json(cls, text: str) -> "RingConstellation":
        doc = json.loads(text)
        return cls(radii=tuple(doc["radii"]), probs=tuple(doc["probs"]))


def merge_rings(radii, probs, atol: float = 0.0) -> RingConstellation:
    """Build a constellation from unsorted radii, merging (near-)duplicates by
    summing their probabilities and renormalizing."""
    radii = np.asarray(radii, dtype=float)
    probs = np.asarray(probs, dtype=float)
    order = np.argsort(radii, kind="stable")
    radii, probs = radii[order], np.maximum(probs[order], 0.0)
    out_r: list[float] = []
    out_p: list[float] = []
    for r, p in zip(radii, probs):
        if out_r and r - out_r[-1] <= atol:
            out_p[-1] += p
        else:
            out_r.append(float(r))
            out_p.append(float(p))
    total = sum(out_p)
    if total <= 0:
        return RingConstellation(radii=(0.0,), probs=(1.0,))
    return RingConstellation(
        radii=tuple(out_r), probs=tuple(p / total for p in out_p)
    )


@dataclass(frozen=True)
class CostFunction:
    """A cost C(r0) with C(0) = 0, non-decreasing and unbounded.

    kind = "power": C(r) = r^q with exponent q > 0.
    kind = "table": monotone shape-preserving interpolation of sampled
    (r, C(r)) pairs, extended linearly (with the last slope) beyond the last
    knot so that monotonicity survives extrapolation.

    Growth classes are checked numerically for tables:
    - superquadratic (needed by the pure average regime): C(r)/r^2 increasing
      beyond a knee;
    - superlogarithmic (enough for the joint regime): C(r)/log(r) increasing
      beyond a knee.
    Analyticity of the cost is the caller's obligation; it cannot be checked
    from samples.
    """

    kind: str
    q: float = 0.0
    knots_r: tuple = ()
    knots_c: tuple = ()
    _spline: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind == "power":
            if not (self.q > 0 and math.isfinite(self.q)):
                raise ValueError(f"power-law exponent must be finite and > 0, got {self.q}")
        elif self.kind == "table":
            r = np.asarray(self.knots_r, dtype=float)
            c = np.asarray(self.knots_c, dtype=float)
            if r.size < 3 or r.size != c.size:
                raise ValueError("tabulated cost needs >= 3 (r, C) pairs")
            if r[0] != 0.0 or c[0] != 0.0:
                raise ValueError("tabulated cost must start at C(0) = 0")
            if np.any(np.diff(r) <= 0) or np.any(np.diff(c) < 0):
                raise ValueError("tabulated cost must be non-decreasing in increasing r")
            object.__setattr__(self, "knots_r", tuple(map(float, r)))
            object.__setattr__(self, "knots_c", tuple(map(float, c)))
            object.__setattr__(self, "_spline", PchipInterpolator(r, c, extrapolate=False))
        else:
            raise ValueError(f"unknown cost kind {self.kind!r}")

    def __call__(self, r):
        r_arr = np.asarray(r, dtype=float)
        if self.kind == "power":
            out = r_arr**self.q
        else:
            r_hi = self.knots_r[-1]
            inside = self._spline(np.minimum(r_arr, r_hi))
            slope = self._end_slope()
            out = np.where(r_arr <= r_hi, inside, self.knots_c[-1] + slope * (r_arr - r_hi))
        return out if out.ndim else float(out)

    def _end_slope(self) -> float:
        return max(
            float(self._spline.derivative()(self.knots_r[-1])),
            (self.knots_c[-1] - self.knots_c[0]) / (self.knots_r[-1] - self.knots_r[0]),
        )

    def inverse(self, budget: float, hi: float = 1.0) -> float:
        """Smallest r with C(r) >= budget (bisection; C is monotone)."""
        if budget <= 0:
            return 0.0
        while self(hi) < budget:
            hi *= 2.0
            if hi > 1e12:
                raise ValueError("cost never reaches the requested budget")
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self(mid) < budget:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def is_superquadratic(self) -> bool:
        """C(r) = omega(r^2): required of at least one cost in the pure
        average regime (it forces the optimality score to blow up)."""
        if self.kind == "power":
            return self.q > 2
        r = np.geomspace(self.knots_r[-1] * 0.5, self.knots_r[-1] * 64.0, 24)
        ratio = self(r) / r**2
        return bool(np.all(np.diff(ratio) > 0))

    def is_superlogarithmic(self) -> bool:
        """C(r) = omega(log r): enough when a peak constraint is also active."""
        if self.kind == "power":
            return True
        r = np.geomspace(max(self.knots_r[-1], 2.0), max(self.knots_r[-1], 2.0) * 64.0, 24)
        ratio = self(r) / np.log(r)
        return bool(np.all(np.diff(ratio) > 0))


@dataclass(frozen=True)
class CostBudget:
    cost: CostFunction
    budget: float

    def __post_init__(self):
        if not (self.budget > 0 and math.isfinite(self.budget)):
            raise ValueError(f"budget must be finite and > 0, got {self.budget}")


@dataclass(frozen=True)
class ConstraintSet:
    """Input constraints: regime "peak" (max radius <= rho), "average"
    (E[C(R0)] <= A for every listed cost), or "joint" (both).

    Several average costs may be listed; in the pure average regime at least
    one must be superquadratic, in the joint regime superlogarithmic."""

    regime: str
    rho: float = 0.0
    costs: tuple = ()

    def __post_init__(self):
        if self.regime not in ("peak", "average", "joint"):
            raise ValueError(f"unknown regime {self.regime!r}")
        costs = tuple(self.costs)
        object.__setattr__(self, "costs", costs)
        if self.regime in ("peak", "joint"):
            if not (self.rho > 0 and math.isfinite(self.rho)):
                raise ValueError(f"rho must be finite and > 0, got {self.rho}")
        if self.regime in ("average", "joint"):
            if not costs:
                raise ValueError(f"regime {self.regime!r} needs at least one cost")
            if self.regime == "average" and not any(
                cb.cost.is_superquadratic() for cb in costs
            ):
                raise ValueError("average regime needs a superquadratic cost")
            if self.regime == "joint" and not any(
                cb.cost.is_superlogarithmic() for cb in costs
            ):
                raise ValueError("joint regime needs a superlogarithmic cost")

    @property
    def has_peak(self) -> bool:
        return self.regime in ("peak", "joint")

    @property
    def has_cost(self) -> bool:
        return self.regime in ("average", "joint")


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    peak_slack: float  # rho - max radius (+inf when no peak constraint)
    cost_slacks: tuple  # A_k - E[C_k(R0)] per cost, signed


def average_cost(c: RingConstellation, cost: CostFunction) -> float:
    r = np.asarray(c.radii)
    p = np.asarray(c.probs)
    return float(np.dot(p, cost(r)))


def feasible(c: RingConstellation, s: ConstraintSet) -> FeasibilityReport:
    """Check c against s; slacks are signed (negative = violated)."""
    peak_slack = math.inf
    if s.has_peak:
        peak_slack = s.rho - max(c.radii)
    cost_slacks = tuple(
        cb.budget - average_cost(c, cb.cost) for cb in (s.costs if s.has_cost else ())
    )
    ok = peak_slack >= 0 and all(sl >= 0 for sl in cost_slacks)
    return FeasibilityReport(feasible=ok, peak_slack=peak_slack, cost_slacks=cost_slacks)


def project(c: RingConstellation, s: ConstraintSet) -> RingConstellation:
    """Nearest-in-spirit feasible constellation: radii clipped to [0, rho]
    (collisions merged, probabilities renormalized), then average-cost
    violations repaired by the largest radial shrink factor t <= 1 with
    E[C(t R0)] <= A for every cost (bisection to 1e-10).

    Idempotent, never increases a radius, and always succeeds (the zero ring
    is feasible for every constraint set)."""
    if feasible(c, s).feasible:
        return c
    radii = np.asarray(c.radii, dtype=float)
    probs = np.asarray(c.probs, dtype=float)
    if s.has_peak:
        radii = np.minimum(radii, s.rho)
    merged = merge_rings(radii, probs)
    if not s.has_cost:
        return merged

    radii = np.asarray(merged.radii)
    probs = np.asarray(merged.probs)

    def cost_ok(t: float) -> bool:
        return all(
            float(np.dot(probs, cb.cost(t * radii))) <= cb.budget for cb in s.costs
        )

    if cost_ok(1.0):
        return merged
    lo, hi = 0.0, 1.0
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if cost_ok(mid):
            lo = mid
        else:
            hi = mid
    return merge_rings(lo * radii, probs)
