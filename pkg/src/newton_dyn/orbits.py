"""Forward-orbit classification, cycle detection, and the tau census.

A classification is one of four terminal verdicts.  Unresolved is the honest
failure mode: parabolic and Julia-adjacent orbits are flagged, never forced
into a basin.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

from .errors import NotACycleError, PoleError
from .newton_map import (
    INFINITY,
    CriticalPoint,
    NewtonMap,
    SpherePoint,
    apply,
    chordal,
    critical_set,
    derivative,
    is_infinity,
    poles,
)

POLE_HIT_TOL = 1e-13
CONFIRM_ATTEMPT_CAP = 60
CONFIRM_PERIOD_CAP = 4096


@dataclass(frozen=True)
class OrbitBudget:
    max_iter: int
    eps_root: float
    eps_cycle: float
    contraction_margin: float
    chart_radius: float

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if min(self.eps_root, self.eps_cycle, self.chart_radius) <= 0:
            raise ValueError("tolerances and chart radius must be positive")
        if not 0 < self.contraction_margin < 1:
            raise ValueError("contraction_margin must lie in (0, 1)")


DEFAULT_BUDGET = OrbitBudget(
    max_iter=20000,
    eps_root=1e-9,
    eps_cycle=1e-9,
    contraction_margin=0.05,
    chart_radius=1e8,
)

# slower, tighter profile used by search oracles
DEEP_BUDGET = OrbitBudget(
    max_iter=200000,
    eps_root=1e-11,
    eps_cycle=1e-11,
    contraction_margin=0.02,
    chart_radius=1e8,
)


@dataclass(frozen=True)
class ConvergedToRoot:
    root_index: int
    hitting_time: int


@dataclass(frozen=True)
class AttractingCycle:
    period: int
    representative: SpherePoint
    multiplier: complex
    hitting_time: int


@dataclass(frozen=True)
class LandsOnInfinity:
    step: int


@dataclass(frozen=True)
class Unresolved:
    reason: str  # "slow_or_none" | "suspected_parabolic" | "suspected_julia"


OrbitClassification = Union[ConvergedToRoot, AttractingCycle, LandsOnInfinity, Unresolved]


def in_basin(c: OrbitClassification) -> bool:
    """True when the orbit verifiably sits in the basin of an attracting cycle."""
    return isinstance(c, (ConvergedToRoot, AttractingCycle))


def _finite_ok(z: complex) -> bool:
    return math.isfinite(z.real) and math.isfinite(z.imag)


def _divisors(q: int) -> list[int]:
    return [p for p in range(1, q + 1) if q % p == 0]


def _confirm_cycle(f, z, q, budget, t):
    """Walk q steps from z and, if it truly closes up, classify the cycle.

    Returns an OrbitClassification, the string "parabolic" for a near-unit
    multiplier, or None when the proximity was a false alarm.
    """
    pts = [z]
    w = z
    for _ in range(q):
        w = apply(f, w)
        if is_infinity(w) or not _finite_ok(w):
            return None
        pts.append(w)
    if chordal(pts[q], pts[0]) > budget.eps_cycle:
        return None
    period = q
    for p in _divisors(q):
        if chordal(pts[p], pts[0]) <= budget.eps_cycle:
            period = p
            break
    cycle = pts[:period]
    # a "cycle" hugging a root is just slow convergence to that root
    for w in cycle:
        idx, dist = f.roots.nearest(w)
        if dist <= 10 * budget.eps_root:
            return ConvergedToRoot(root_index=idx, hitting_time=t)
    try:
        lam = 1 + 0j
        for w in cycle:
            lam *= derivative(f, w)
    except (PoleError, OverflowError):
        return None
    m = abs(lam)
    if m <= 1 - budget.contraction_margin:
        rep = min(cycle, key=lambda c: (c.real, c.imag))
        return AttractingCycle(
            period=period, representative=rep, multiplier=lam, hitting_time=t
        )
    if m < 1 + budget.contraction_margin:
        return "parabolic"
    return None


def classify(
    f: NewtonMap, z0: SpherePoint, budget: OrbitBudget = DEFAULT_BUDGET
) -> OrbitClassification:
    """Iterate z0 under f within the budget and return a terminal verdict.

    Checks, in order per step: landing at infinity, root capture with verified
    contraction, pole proximity, and Brent-style cycle proximity against a
    doubling anchor with multiplier confirmation.
    """
    pole_list = poles(f)
    roots = f.roots
    z = z0
    t = 0
    anchor = z0
    anchor_t = 0
    next_power = 1
    parabolic_flag = False
    near_periodic = False
    confirms = 0
    recent = deque(maxlen=100)

    while True:
        if is_infinity(z):
            return LandsOnInfinity(step=t)
        if not _finite_ok(z):
            return LandsOnInfinity(step=t)
        idx, dist = roots.nearest(z)
        if dist <= budget.eps_root:
            if dist == 0:
                return ConvergedToRoot(root_index=idx, hitting_time=t)
            nxt = apply(f, z)
            if not is_infinity(nxt) and _finite_ok(nxt):
                a = roots.locations[idx]
                if abs(nxt - a) <= (1 - budget.contraction_margin) * dist:
                    return ConvergedToRoot(root_index=idx, hitting_time=t)
        for b, _ in pole_list:
            if abs(z - b) <= POLE_HIT_TOL * (1 + abs(b)):
                return LandsOnInfinity(step=t + 1)
        if t > anchor_t and not is_infinity(anchor):
            gap = chordal(z, anchor)
            if gap <= budget.eps_cycle and confirms < CONFIRM_ATTEMPT_CAP:
                q = t - anchor_t
                if q <= CONFIRM_PERIOD_CAP:
                    confirms += 1
                    res = _confirm_cycle(f, z, q, budget, t)
                    if res == "parabolic":
                        parabolic_flag = True
                    elif res is not None:
                        return res
            elif gap <= 1e-3:
                near_periodic = True
        if t == next_power:
            anchor = z
            anchor_t = t
            next_power *= 2
        if t >= budget.max_iter:
            break
        znew = apply(f, z)
        if not is_infinity(znew):
            recent.append(chordal(znew, z))
        z = znew
        t += 1

    if parabolic_flag:
        return Unresolved(reason="suspected_parabolic")
    mean_step = sum(recent) / len(recent) if recent else 0.0
    if near_periodic and mean_step <= 1e-2:
        return Unresolved(reason="suspected_parabolic")
    shrinking = len(recent) == recent.maxlen and recent[-1] < 0.9 * recent[0]
    if mean_step <= 1e-3 and shrinking:
        return Unresolved(reason="suspected_parabolic")
    if mean_step > 1e-2:
        return Unresolved(reason="suspected_julia")
    return Unresolved(reason="slow_or_none")


def cycle_multiplier(
    f: NewtonMap, cycle: list[SpherePoint], eps: float = 1e-9
) -> complex:
    """Product of chart-aware derivatives along a verified cycle."""
    n = len(cycle)
    if n == 0:
        raise NotACycleError("empty cycle")
    for i in range(n):
        for j in range(i + 1, n):
            if chordal(cycle[i], cycle[j]) <= eps:
                raise NotACycleError(f"cycle points {i} and {j} coincide")
    for i in range(n):
        img = apply(f, cycle[i])
        nxt = cycle[(i + 1) % n]
        if chordal(img, nxt) > eps:
            raise NotACycleError(
                f"point {i} maps {chordal(img, nxt):.3e} away from its successor"
            )
    lam = 1 + 0j
    for w in cycle:
        lam *= derivative(f, w)
    return lam


@dataclass(frozen=True)
class HyperbolicityCertificate:
    status: str  # "certified" | "not_certified"
    per_critical: tuple[tuple[CriticalPoint, OrbitClassification], ...]
    tau: int

    @property
    def is_certified(self) -> bool:
        return self.status == "certified"


def tau(f: NewtonMap, budget: OrbitBudget = DEFAULT_BUDGET) -> int:
    """Critical points (with multiplicity local_degree-1) verified inside basins.

    A lower bound for the true count: Unresolved orbits are never counted.
    """
    total = 0
    for cp in critical_set(f):
        if in_basin(classify(f, cp.location, budget)):
            total += cp.local_degree - 1
    return total


def certify_hyperbolic(
    f: NewtonMap, budget: OrbitBudget = DEFAULT_BUDGET
) -> HyperbolicityCertificate:
    """Certified iff every critical point verifiably reaches an attracting cycle.

    Sound but incomplete: "not_certified" is inconclusive, not a disproof.
    """
    per = []
    total = 0
    for cp in critical_set(f):
        c = classify(f, cp.location, budget)
        per.append((cp, c))
        if in_basin(c):
            total += cp.local_degree - 1
    status = "certified" if total == 2 * f.degree - 2 else "not_certified"
    return HyperbolicityCertificate(status=status, per_critical=tuple(per), tau=total)
