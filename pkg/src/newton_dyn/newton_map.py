"""The Newton map f = z - p/p' as a rational map of the Riemann sphere.

Finite points are plain complex numbers; the point at infinity is the
module-level sentinel ``INFINITY``.  Beyond ``CHART_RADIUS`` evaluation moves
to the reciprocal chart w = 1/z so that huge orbits never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

from .algebra import Polynomial, RootSet, find_roots, is_normalized_family
from .errors import (
    CountMismatchError,
    DegreeError,
    IndeterminateError,
    PoleError,
)

CHART_RADIUS = 1e8


class _Infinity:
    """Sentinel for the point at infinity on the sphere."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITY"


INFINITY = _Infinity()

SpherePoint = Union[complex, _Infinity]


def is_infinity(z: SpherePoint) -> bool:
    return z is INFINITY


def chordal(a: SpherePoint, b: SpherePoint) -> float:
    """Chordal metric on the sphere; chordal(z, INFINITY) = 2/sqrt(1+|z|^2)."""
    ainf, binf = a is INFINITY, b is INFINITY
    if ainf and binf:
        return 0.0
    if ainf or binf:
        w = abs(b) if ainf else abs(a)
        return 2.0 / math.hypot(1.0, w)
    ma, mb = abs(a), abs(b)
    if max(ma, mb) > 1e150:
        # the metric is invariant under z -> 1/z; invert to dodge overflow
        ia = INFINITY if a == 0 else 1 / a
        ib = INFINITY if b == 0 else 1 / b
        return chordal(ia, ib)
    return 2.0 * abs(a - b) / (math.hypot(1.0, ma) * math.hypot(1.0, mb))


@dataclass(frozen=True)
class NewtonMap:
    """Immutable bundle: polynomial, cached derivatives, roots, distinct count."""

    p: Polynomial
    dp: Polynomial
    ddp: Polynomial
    roots: RootSet
    degree: int  # number of distinct roots
    normalized: bool


@dataclass(frozen=True)
class CriticalPoint:
    location: complex
    local_degree: int
    kind: str  # "root_center" | "pole" | "flex" | "other"
    root_index: int | None = None


@dataclass(frozen=True)
class FixedPointDatum:
    location: SpherePoint
    multiplier: complex


@dataclass(frozen=True)
class HeadVerifyResult:
    ok: bool
    n_vector: tuple[int, ...]
    messages: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.ok


def build(p: Polynomial, tol: float = 1e-12) -> NewtonMap:
    """Construct the Newton map of p with cached derivatives and root data."""
    if p.degree < 2:
        raise DegreeError("Newton map needs a polynomial of degree >= 2")
    roots = find_roots(p, tol)
    if len(roots) < 2:
        raise DegreeError("Newton map needs at least 2 distinct roots")
    dp = p.derive()
    return NewtonMap(
        p=p,
        dp=dp,
        ddp=dp.derive(),
        roots=roots,
        degree=len(roots),
        normalized=is_normalized_family(p, tol=1e-9),
    )


@lru_cache(maxsize=512)
def _derive_cached(p: Polynomial) -> Polynomial:
    return p.derive()


@lru_cache(maxsize=512)
def _wchart_coeffs(p: Polynomial) -> tuple[tuple[complex, ...], tuple[complex, ...]]:
    # P(w) = w^n p(1/w), Q(w) = w^(n-1) p'(1/w), both polynomials in w
    n = p.degree
    a = p.coeffs
    big_p = tuple(a[n - j] for j in range(n + 1))
    big_q = tuple((n - j) * a[n - j] for j in range(n + 1))
    return big_p, big_q


def _apply_finite(f: NewtonMap, z: complex) -> SpherePoint:
    pv = f.p(z)
    dv = f.dp(z)
    if dv == 0:
        if pv == 0:
            idx, dist = f.roots.nearest(z)
            if dist <= 1e-9 * (1 + abs(z)):
                return f.roots.locations[idx]
            raise IndeterminateError(
                f"p and p' both vanish at {z} but no root accounts for it"
            )
        return INFINITY
    return z - pv / dv


def _apply_wchart(f: NewtonMap, z: complex) -> SpherePoint:
    big_p, big_q = _wchart_coeffs(f.p)
    w = 1 / z
    pv = 0j
    for c in reversed(big_p):
        pv = pv * w + c
    qv = 0j
    for c in reversed(big_q):
        qv = qv * w + c
    num = qv - pv
    den = w * qv
    if den == 0:
        return INFINITY
    return num / den


def apply(f: NewtonMap, z: SpherePoint) -> SpherePoint:
    """One step of the map; Infinity is fixed, poles map to Infinity."""
    if z is INFINITY:
        return INFINITY
    if abs(z) > CHART_RADIUS:
        return _apply_wchart(f, z)
    return _apply_finite(f, z)


def derivative(f: NewtonMap, z: SpherePoint) -> complex:
    """Chart-aware derivative of the map.

    At Infinity this is the multiplier of the fixed point there, d/(d-1) with
    d the number of distinct roots.  At a multiple root (a removable 0/0 of
    the raw formula) the limit value is computed by extrapolation.
    """
    if z is INFINITY:
        d = f.degree
        return complex(d / (d - 1))
    dv = f.dp(z)
    if dv == 0:
        if f.p(z) == 0:
            idx, dist = f.roots.nearest(z)
            if dist <= 1e-9 * (1 + abs(z)) and f.roots.multiplicities[idx] >= 2:
                return _shared_zero_multiplier(f, idx)
            raise IndeterminateError(
                f"p and p' both vanish at {z} with no multiple root to explain it"
            )
        raise PoleError(f"derivative requested at the pole {z}")
    # Quotient rule on the stored numerator/denominator; when dp really is
    # derive(p) this collapses to p p'' / p'^2, and when it is not, the value
    # honestly differentiates the map actually being iterated.
    pv = f.p(z)
    pd = _derive_cached(f.p)(z)
    ddv = f.ddp(z)
    return 1 - (pd * dv - pv * ddv) / (dv * dv)


def _deflate(coeffs: tuple[complex, ...], a: complex, k: int) -> list[complex]:
    """Divide out (z-a)^k by synthetic division, discarding remainders."""
    c = list(coeffs)
    for _ in range(k):
        out = [0j] * (len(c) - 1)
        acc = c[-1]
        for i in range(len(c) - 2, -1, -1):
            out[i] = acc
            acc = c[i] + a * acc
        c = out
    return c


def _shared_zero_multiplier(f: NewtonMap, idx: int) -> complex:
    """Multiplier at a multiple root, with the removable 0/0 cancelled exactly.

    Writing p = (z-a)^n A and dp = (z-a)^(n-1) C, the limit of the map's
    derivative at a is 1 - A(a)/C(a); for an honest derivative this equals
    1 - 1/n.
    """
    a, n = f.roots.roots[idx]
    num = Polynomial(tuple(_deflate(f.p.coeffs, a, n)))
    den = Polynomial(tuple(_deflate(f.dp.coeffs, a, n - 1)))
    cv = den(a)
    if abs(cv) <= 1e-12 * (1 + den.coeff_scale()):
        raise IndeterminateError(
            f"denominator vanishes to higher order than expected at the root {a}"
        )
    return 1 - num(a) / cv


def fixed_point_data(f: NewtonMap) -> list[FixedPointDatum]:
    """All d+1 fixed points with computed multipliers (roots plus Infinity)."""
    out = []
    for i, (loc, mult) in enumerate(f.roots.roots):
        if mult == 1:
            lam = derivative(f, loc)
        else:
            lam = _shared_zero_multiplier(f, i)
        out.append(FixedPointDatum(location=loc, multiplier=lam))
    d = f.degree
    out.append(FixedPointDatum(location=INFINITY, multiplier=complex(d / (d - 1))))
    return out


def head_verify(f: NewtonMap, tol: float = 1e-8) -> HeadVerifyResult:
    """Consistency gate: every multiplier must look like 1 - 1/n for integer n.

    Recovers the multiplicity vector from the computed multipliers alone and
    cross-checks it against deg p; any corruption of the cached derivative
    shifts a multiplier off the lattice and fails the gate.
    """
    messages: list[str] = []
    n_vector: list[int] = []
    data = fixed_point_data(f)
    finite = [d for d in data if not is_infinity(d.location)]
    inf_entries = [d for d in data if is_infinity(d.location)]
    for datum in finite:
        lam = datum.multiplier
        denom = 1 - lam
        if abs(denom) < 1e-12:
            messages.append(f"multiplier {lam} at {datum.location} is parabolic-like")
            n_vector.append(0)
            continue
        n_hat = round((1 / denom).real)
        if n_hat < 1:
            messages.append(f"multiplier {lam} at {datum.location} gives n={n_hat}")
            n_vector.append(0)
            continue
        if abs(lam - (1 - 1 / n_hat)) > tol:
            messages.append(
                f"multiplier {lam} at {datum.location} is {abs(lam - (1 - 1 / n_hat)):.3e} "
                f"from the nearest lattice value 1-1/{n_hat}"
            )
        n_vector.append(n_hat)
    if sum(n_vector) != f.p.degree:
        messages.append(
            f"recovered multiplicities {n_vector} sum to {sum(n_vector)}, "
            f"expected deg p = {f.p.degree}"
        )
    d = f.degree
    if len(inf_entries) != 1 or abs(inf_entries[0].multiplier - d / (d - 1)) > tol:
        messages.append("multiplier at infinity is off d/(d-1)")
    locs = [datum.location for datum in finite]
    for i in range(len(locs)):
        for j in range(i + 1, len(locs)):
            if abs(locs[i] - locs[j]) <= 1e-9 * (1 + abs(locs[i])):
                messages.append(f"fixed points {locs[i]} and {locs[j]} collide")
    if len(finite) != d:
        messages.append(f"{len(finite)} finite fixed points, expected {d}")
    return HeadVerifyResult(
        ok=not messages, n_vector=tuple(n_vector), messages=tuple(messages)
    )


def _match_index(z: complex, locations, tol_rel: float = 1e-9) -> int | None:
    for i, w in enumerate(locations):
        if abs(z - w) <= tol_rel * (1 + abs(z)):
            return i
    return None


@lru_cache(maxsize=256)
def critical_set(f: NewtonMap) -> tuple[CriticalPoint, ...]:
    """All finite critical points with local degrees; Infinity is never critical.

    Simple roots are superattracting centers (local degree 2, more if p'' also
    vanishes there); multiple roots are not critical; zeros of p' of order
    k >= 2 away from roots are poles of local degree k; remaining zeros of p''
    are flexes of local degree (order + 1).  The total must satisfy
    sum(local_degree - 1) = 2 d - 2.
    """
    root_locs = f.roots.locations
    dp_zeros = find_roots(f.dp).roots if f.dp.degree >= 1 else ()
    ddp_zeros = find_roots(f.ddp).roots if f.ddp.degree >= 1 else ()

    crits: list[CriticalPoint] = []
    for i, (a, n) in enumerate(f.roots.roots):
        if n != 1:
            continue
        extra = 0
        for c, m in ddp_zeros:
            if abs(c - a) <= 1e-9 * (1 + abs(a)):
                extra += m
        crits.append(
            CriticalPoint(location=a, local_degree=2 + extra, kind="root_center", root_index=i)
        )
    pole_locs = []
    for b, k in dp_zeros:
        if _match_index(b, root_locs) is not None:
            continue
        pole_locs.append(b)
        if k >= 2:
            crits.append(CriticalPoint(location=b, local_degree=k, kind="pole"))
    for c, m in ddp_zeros:
        if _match_index(c, root_locs) is not None:
            continue
        if _match_index(c, pole_locs) is not None:
            continue
        crits.append(CriticalPoint(location=c, local_degree=m + 1, kind="flex"))

    total = sum(c.local_degree - 1 for c in crits)
    expected = 2 * f.degree - 2
    if total != expected:
        raise CountMismatchError(
            f"critical local degrees sum to {total}, Riemann-Hurwitz needs {expected}"
        )
    return tuple(crits)


@lru_cache(maxsize=256)
def poles(f: NewtonMap) -> tuple[tuple[complex, int], ...]:
    """Finite preimages of Infinity: zeros of p' that are not roots of p."""
    if f.dp.degree < 1:
        return ()
    out = []
    for b, k in find_roots(f.dp).roots:
        if _match_index(b, f.roots.locations) is None:
            out.append((b, k))
    return tuple(out)
