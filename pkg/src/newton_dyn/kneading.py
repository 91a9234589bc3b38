"""Symbolic itineraries of free real critical orbits.

A real map with free real critical points c_1 < ... < c_k cuts the line into
k+1 open intervals.  Each free orbit is recorded as a string over the symbols
Interval(j), starred CriticalHit(j), and a terminal infinity marker for orbits
that leave the line through a pole.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .errors import LengthMismatchError, NonRealMapError
from .newton_map import INFINITY, NewtonMap, apply, critical_set, is_infinity, poles
from .orbits import (
    DEFAULT_BUDGET,
    POLE_HIT_TOL,
    ConvergedToRoot,
    OrbitBudget,
    OrbitClassification,
    Unresolved,
    classify,
)

# equality tolerance for the starred "orbit hits a critical point" test; exact
# hits only occur at postcritically finite parameters, desk scale needs slack
EPS_EQ = 1e-9

REAL_POINT_TOL = 1e-9


@dataclass(frozen=True)
class Interval:
    """Symbol j: the orbit point lies in the j-th open interval, 1-based."""

    index: int


@dataclass(frozen=True)
class CriticalHit:
    """Starred symbol: the orbit point coincides with free critical c_index."""

    index: int


@dataclass(frozen=True)
class InfinityMarker:
    """Terminal symbol for an orbit that left the real line through a pole."""


KneadingSymbol = Union[Interval, CriticalHit, InfinityMarker]


@dataclass(frozen=True)
class FreeCriticalSet:
    points: tuple[float, ...]
    provenance: tuple[OrbitClassification, ...]


@dataclass(frozen=True)
class KneadingSequence:
    symbols: tuple[tuple[KneadingSymbol, ...], ...]
    periodic: tuple[Optional[tuple[int, int]], ...]
    length: int


def _require_real(f: NewtonMap) -> None:
    if not f.p.is_real:
        raise NonRealMapError("kneading data needs a map with real coefficients")


def _is_real_point(z: complex) -> bool:
    return abs(z.imag) <= REAL_POINT_TOL * (1 + abs(z.real))


def free_real_criticals(f: NewtonMap, b: OrbitBudget = DEFAULT_BUDGET) -> FreeCriticalSet:
    """Real critical points not absorbed by a root basin, sorted increasing.

    Unresolved orbits count as free; membership claims stay conservative.
    """
    _require_real(f)
    found = []
    for cp in critical_set(f):
        if not _is_real_point(cp.location):
            continue
        verdict = classify(f, complex(cp.location.real, 0.0), b)
        if isinstance(verdict, ConvergedToRoot):
            continue
        found.append((cp.location.real + 0.0, verdict))
    found.sort(key=lambda item: item[0])
    return FreeCriticalSet(
        points=tuple(x for x, _ in found),
        provenance=tuple(v for _, v in found),
    )


def _symbol_at(x: float, points: tuple[float, ...]) -> KneadingSymbol:
    for j, c in enumerate(points, start=1):
        if abs(x - c) <= EPS_EQ:
            return CriticalHit(j)
    below = sum(1 for c in points if x > c)
    return Interval(below + 1)


def _detect_period(row: tuple[KneadingSymbol, ...], n: int) -> Optional[tuple[int, int]]:
    if len(row) < n:
        return None
    for p in range(1, n // 2 + 1):
        for q in range(0, n - 2 * p + 1):
            if all(row[i] == row[i + p] for i in range(q, n - p)):
                return (q, p)
    return None


def kneading_sequence(
    f: NewtonMap, n: int, b: OrbitBudget = DEFAULT_BUDGET
) -> KneadingSequence:
    """Itineraries of all free real critical orbits, truncated to n symbols.

    A pole hit ends the row with the infinity marker; the fixed point at
    infinity never returns, so nothing follows it.
    """
    if n < 1:
        raise ValueError("truncation length must be >= 1")
    _require_real(f)
    free = free_real_criticals(f, b)
    real_poles = [w.real for w, _ in poles(f) if _is_real_point(w)]
    rows = []
    claims = []
    for c in free.points:
        row: list[KneadingSymbol] = []
        z: complex = complex(c, 0.0)
        hit_infinity = False
        for step in range(n):
            if hit_infinity or is_infinity(z):
                row.append(InfinityMarker())
                break
            x = z.real
            row.append(_symbol_at(x, free.points))
            if step + 1 < n:
                if any(abs(x - w) <= POLE_HIT_TOL * (1 + abs(w)) for w in real_poles):
                    hit_infinity = True
                else:
                    nxt = apply(f, z)
                    if is_infinity(nxt):
                        hit_infinity = True
                    else:
                        z = nxt
        rows.append(tuple(row))
        claims.append(_detect_period(tuple(row), n))
    return KneadingSequence(symbols=tuple(rows), periodic=tuple(claims), length=n)


def _symbol_text(s: KneadingSymbol) -> str:
    if isinstance(s, InfinityMarker):
        return "inf"
    if isinstance(s, CriticalHit):
        return f"{s.index}*"
    return str(s.index)


def kneading_text(k: KneadingSequence) -> str:
    """Comma-joined symbols per critical point, rows joined by semicolons."""
    return ";".join(",".join(_symbol_text(s) for s in row) for row in k.symbols)


def kneading_equal(k1: KneadingSequence, k2: KneadingSequence) -> bool:
    if k1.length != k2.length:
        raise LengthMismatchError(
            f"truncation lengths differ: {k1.length} vs {k2.length}"
        )
    return k1.symbols == k2.symbols


def in_family_Y(f: NewtonMap, b: OrbitBudget = DEFAULT_BUDGET) -> str:
    """Membership test for the real maps whose free criticals are all real.

    Returns "yes", "no", or "unknown".  Only normalized real maps qualify;
    every critical point off the real line must fall into a root basin.
    """
    if not f.p.is_real or not f.normalized:
        return "no"
    verdict = "yes"
    for cp in critical_set(f):
        if _is_real_point(cp.location):
            continue
        cls = classify(f, cp.location, b)
        if isinstance(cls, ConvergedToRoot):
            continue
        if isinstance(cls, Unresolved):
            verdict = "unknown"
            continue
        return "no"
    return verdict
