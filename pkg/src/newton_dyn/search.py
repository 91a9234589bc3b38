"""Parameter-space operations in the normalized real family.

Coordinates are the free coefficients of p(z) = z^d + a_{d-2} z^{d-2} + ...
+ a_1 z + 1.  The module walks tau over grids, continues attracting cycles
between nearby parameters, and hunts for certified hyperbolic neighbors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.stats import qmc

from .algebra import Polynomial, find_roots
from .errors import ContinuationLostError, DiscriminantZeroError, PoleError
from .kneading import in_family_Y
from .newton_map import INFINITY, NewtonMap, SpherePoint, apply, build, derivative, is_infinity
from .orbits import (
    DEFAULT_BUDGET,
    HyperbolicityCertificate,
    OrbitBudget,
    certify_hyperbolic,
    cycle_multiplier,
    tau,
)

# roots closer than this collapse the parameter onto the discriminant locus
SEPARATION_FLOOR = 1e-6

NEWTON_CAP = 50
MIN_DAMPING = 1.0 / 64.0


@dataclass(frozen=True)
class ParameterPoint:
    a: tuple[float, ...]
    d: int

    def __post_init__(self):
        if self.d < 3:
            raise ValueError("family needs degree >= 3")
        if len(self.a) != self.d - 2:
            raise ValueError(f"degree {self.d} takes {self.d - 2} coordinates")
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))


@dataclass(frozen=True)
class SearchConfig:
    radii: tuple[float, ...]
    samples_per_radius: int
    budget: OrbitBudget
    require_Y: bool
    rng_seed: int

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        object.__setattr__(self, "radii", radii)
        if not radii:
            raise ValueError("need at least one search radius")
        if any(r <= 0 for r in radii) or any(
            b <= a for a, b in zip(radii, radii[1:])
        ):
            raise ValueError("radii must be positive and strictly increasing")
        if self.samples_per_radius < 1:
            raise ValueError("samples_per_radius must be >= 1")


@dataclass(frozen=True)
class SearchTraceEntry:
    radius: float
    evaluated: int
    certified: int
    rejected_membership: int
    discriminant_failures: int


@dataclass(frozen=True)
class FoundHyperbolic:
    point: ParameterPoint
    certificate: HyperbolicityCertificate
    distance: float
    samples_tried: int


@dataclass(frozen=True)
class ApproxResult:
    found: Optional[FoundHyperbolic]
    trace: tuple[SearchTraceEntry, ...]


DEFAULT_RADII = tuple(float(r) for r in np.geomspace(1e-4, 0.5, 10))


def default_search_config(
    budget: OrbitBudget = DEFAULT_BUDGET, require_Y: bool = True, rng_seed: int = 0
) -> SearchConfig:
    return SearchConfig(
        radii=DEFAULT_RADII,
        samples_per_radius=64,
        budget=budget,
        require_Y=require_Y,
        rng_seed=rng_seed,
    )


def map_of(pp: ParameterPoint) -> NewtonMap:
    """Build the Newton map of the family member at pp.

    Rejects parameters on the discriminant locus: any repeated root, or two
    roots closer than the separation floor.
    """
    coeffs = (1.0,) + pp.a + (0.0, 1.0)
    p = Polynomial(tuple(complex(c) for c in coeffs))
    rs = find_roots(p)
    if any(m > 1 for _, m in rs.roots):
        raise DiscriminantZeroError(f"repeated root at parameter {pp.a}")
    locs = rs.locations
    for i in range(len(locs)):
        for j in range(i + 1, len(locs)):
            if abs(locs[i] - locs[j]) < SEPARATION_FLOOR:
                raise DiscriminantZeroError(
                    f"root separation below {SEPARATION_FLOOR} at parameter {pp.a}"
                )
    return build(p)


def params_of(f: NewtonMap) -> ParameterPoint:
    if not f.normalized:
        raise ValueError("params_of needs a normalized map")
    d = f.degree
    middle = f.p.coeffs[1 : d - 1]
    if any(abs(c.imag) > 1e-12 for c in middle):
        raise ValueError("params_of needs real coefficients")
    return ParameterPoint(tuple(c.real for c in middle), d)


def tau_grid(
    d: int,
    box: Sequence[tuple[float, float]],
    resolution: Union[int, Sequence[int]],
    budget: OrbitBudget = DEFAULT_BUDGET,
) -> np.ndarray:
    """tau at every node of a rectangular parameter grid; -1 marks nodes on
    the discriminant locus.  At most two axes may carry more than one node;
    higher-degree studies pass degenerate intervals for the fixed coordinates.
    """
    dim = d - 2
    if len(box) != dim:
        raise ValueError(f"degree {d} takes {dim} box intervals")
    if isinstance(resolution, int):
        res = [resolution] * dim
    else:
        res = list(resolution)
    if len(res) != dim or any(int(r) != r or r < 1 for r in res):
        raise ValueError("resolution must give a positive count per axis")
    res = [int(r) for r in res]
    if sum(1 for r in res if r > 1) > 2:
        raise ValueError("grids support at most two swept axes; fix the rest")
    axes = []
    for (lo, hi), r in zip(box, res):
        if hi < lo:
            raise ValueError("box intervals must satisfy lo <= hi")
        axes.append(np.linspace(lo, hi, r))
    grid = np.empty(tuple(res), dtype=int)
    for idx in np.ndindex(*res):
        a = tuple(axes[k][idx[k]] for k in range(dim))
        try:
            grid[idx] = tau(map_of(ParameterPoint(a, d)), budget)
        except DiscriminantZeroError:
            grid[idx] = -1
    return grid


class _OrbitBlownUp(Exception):
    pass


def _return_map(f: NewtonMap, z: complex, q: int) -> tuple[complex, complex]:
    """Value and derivative of w -> f^q(w) - w at z."""
    w = z
    deriv = 1.0 + 0j
    for _ in range(q):
        try:
            deriv *= derivative(f, w)
            w = apply(f, w)
        except PoleError:
            raise _OrbitBlownUp
        if is_infinity(w) or not (np.isfinite(w.real) and np.isfinite(w.imag)):
            raise _OrbitBlownUp
    return w - z, deriv - 1.0


def _track_point(f: NewtonMap, z0: complex, q: int) -> complex:
    z = z0
    try:
        fv, fd = _return_map(f, z, q)
    except _OrbitBlownUp:
        raise ContinuationLostError("seed orbit runs into a pole")
    for _ in range(NEWTON_CAP):
        if abs(fv) <= 1e-11 * (1 + abs(z)):
            return z
        if abs(fd) < 1e-14:
            raise ContinuationLostError("return map critically degenerate")
        step = -fv / fd
        lam = 1.0
        while lam >= MIN_DAMPING:
            cand = z + lam * step
            try:
                cv, cd = _return_map(f, cand, q)
            except _OrbitBlownUp:
                lam *= 0.5
                continue
            if abs(cv) < abs(fv):
                z, fv, fd = cand, cv, cd
                break
            lam *= 0.5
        else:
            raise ContinuationLostError("damped Newton stalled")
    raise ContinuationLostError("periodic point correction did not converge")


def continue_cycle(
    pp0: ParameterPoint,
    cycle: Sequence[SpherePoint],
    pp1: ParameterPoint,
) -> tuple[SpherePoint, ...]:
    """Follow an attracting or repelling cycle from pp0 to a nearby pp1.

    Each cycle point seeds a damped Newton solve of f^q(z) = z under the new
    parameter.  The result is revalidated as a cycle; losing attraction (or
    repulsion) on the way raises ContinuationLost.
    """
    f0 = map_of(pp0)
    lam0 = cycle_multiplier(f0, list(cycle))
    if all(is_infinity(z) for z in cycle):
        return tuple(cycle)
    f1 = map_of(pp1)
    q = len(cycle)
    moved = tuple(_track_point(f1, z, q) for z in cycle)
    try:
        lam1 = cycle_multiplier(f1, list(moved))
    except Exception as exc:
        raise ContinuationLostError(f"continued points no longer form a cycle: {exc}")
    if (abs(lam0) < 1) != (abs(lam1) < 1):
        raise ContinuationLostError(
            f"multiplier crossed the unit circle: {abs(lam0):.6g} -> {abs(lam1):.6g}"
        )
    return moved


def _linf(x: tuple[float, ...], y: tuple[float, ...]) -> float:
    return max(abs(u - v) for u, v in zip(x, y))


def find_hyperbolic_near(pp: ParameterPoint, cfg: SearchConfig) -> ApproxResult:
    """Scan outward for the closest certifiable hyperbolic parameter.

    The center goes first, then scrambled Halton samples in growing l-inf
    balls; the first certified sample (passing the family filter when
    require_Y) wins.  An empty result is a valid outcome.
    """
    dim = pp.d - 2
    trace: list[SearchTraceEntry] = []
    total = 0

    def run_bucket(radius: float, points: list[tuple[float, ...]]):
        nonlocal total
        evaluated = certified = rejected = degenerate = 0
        hit = None
        for coords in points:
            evaluated += 1
            total += 1
            candidate = ParameterPoint(coords, pp.d)
            try:
                f = map_of(candidate)
            except DiscriminantZeroError:
                degenerate += 1
                continue
            cert = certify_hyperbolic(f, cfg.budget)
            if not cert.is_certified:
                continue
            certified += 1
            if cfg.require_Y and in_family_Y(f, cfg.budget) != "yes":
                rejected += 1
                continue
            hit = FoundHyperbolic(
                point=candidate,
                certificate=cert,
                distance=_linf(candidate.a, pp.a),
                samples_tried=total,
            )
            break
        trace.append(
            SearchTraceEntry(radius, evaluated, certified, rejected, degenerate)
        )
        return hit

    found = run_bucket(0.0, [pp.a])
    if found is None:
        for ridx, radius in enumerate(cfg.radii):
            rng = np.random.default_rng((cfg.rng_seed, ridx))
            sampler = qmc.Halton(d=dim, scramble=True, seed=rng)
            offsets = sampler.random(cfg.samples_per_radius)
            points = [
                tuple(pp.a[k] + radius * (2.0 * row[k] - 1.0) for k in range(dim))
                for row in offsets
            ]
            found = run_bucket(radius, points)
            if found is not None:
                break
    return ApproxResult(found=found, trace=tuple(trace))
