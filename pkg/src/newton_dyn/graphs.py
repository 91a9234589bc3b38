"""Invariant graph tracing: Böttcher charts, fixed internal rays, pullbacks.

The level-0 graph is the union of the fixed internal rays of every immediate
root basin together with infinity.  Deeper levels are inverse images, kept
connected through the vertex at infinity.  Faces come from the dart rotation
system, so the planarity of each traced level is checked by Euler's formula
rather than assumed.
"""

from __future__ import annotations

import cmath
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from .algebra import Polynomial, find_roots, taylor_shift
from .errors import (
    ChartFailureError,
    DegreeError,
    EmbeddingError,
    LandingAmbiguityError,
    LevelNotReachedError,
    LiftError,
    NonSimpleRootsError,
    RayTraceError,
)
from .newton_map import (
    INFINITY,
    NewtonMap,
    SpherePoint,
    apply,
    chordal,
    critical_set,
    derivative,
    is_infinity,
    poles,
)
from .orbits import DEFAULT_BUDGET, ConvergedToRoot, OrbitBudget, Unresolved, classify

ON_GRAPH = -1


@dataclass(frozen=True)
class TraceConfig:
    step_max: float = 0.05
    tube_tol: float = 1e-6
    vertex_tol: float = 1e-6
    branch_tol: float = 1e-4
    far_radius: float = 1e8
    chart_order: int = 20
    chart_defect_tol: float = 1e-8
    samples_per_segment: int = 24
    max_segments: int = 400
    newton_tol: float = 1e-12
    max_refine: int = 8


DEFAULT_TRACE = TraceConfig()


# ---------------------------------------------------------------------------
# truncated power series helpers (ascending coefficient arrays)


def _smul(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    return np.convolve(a, b)[: n + 1]


def _sdiv(num: np.ndarray, den: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n + 1, dtype=complex)
    for m in range(n + 1):
        acc = num[m] if m < len(num) else 0.0
        top = min(m, len(den) - 1)
        for k in range(1, top + 1):
            acc -= den[k] * out[m - k]
        out[m] = acc / den[0]
    return out


def _spow(a: np.ndarray, k: int, n: int) -> np.ndarray:
    out = np.zeros(n + 1, dtype=complex)
    out[0] = 1.0
    for _ in range(k):
        out = _smul(out, a, n)
    return out


def _scompose(outer: np.ndarray, inner: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n + 1, dtype=complex)
    for m in range(len(outer) - 1, -1, -1):
        out = _smul(out, inner, n)
        out[0] += outer[m]
    return out


# ---------------------------------------------------------------------------
# Böttcher charts at superattracting root centers


@dataclass(frozen=True)
class BottcherChart:
    basin_index: int
    center: complex
    local_degree: int
    coefficients: tuple[complex, ...]
    radius: float

    def value(self, z: complex) -> complex:
        u = z - self.center
        acc = 0j
        for c in reversed(self.coefficients):
            acc = acc * u + c
        return acc

    def _deriv(self, z: complex) -> complex:
        u = z - self.center
        acc = 0j
        for m in range(len(self.coefficients) - 1, 0, -1):
            acc = acc * u + m * self.coefficients[m]
        return acc

    def invert(self, w: complex) -> complex:
        """Point of the basin with chart value w, for |w| well inside the disk."""
        u = w / self.coefficients[1]
        for _ in range(80):
            val = 0j
            for c in reversed(self.coefficients):
                val = val * u + c
            dv = 0j
            for m in range(len(self.coefficients) - 1, 0, -1):
                dv = dv * u + m * self.coefficients[m]
            step = (val - w) / dv
            u -= step
            if abs(step) <= 1e-15 * (1 + abs(u)):
                break
        if abs(u) > 1.5 * self.radius:
            raise RayTraceError("chart inversion left the validity disk")
        return self.center + u


def _special_points(f: NewtonMap, skip: complex) -> list[complex]:
    pts = [z for z in f.roots.locations if z != skip]
    pts.extend(w for w, _ in poles(f))
    for cp in critical_set(f):
        if cp.location != skip:
            pts.append(cp.location)
    return pts


def bottcher_chart(
    f: NewtonMap, basin_index: int, cfg: TraceConfig = DEFAULT_TRACE
) -> BottcherChart:
    """Local conjugacy to w -> w^k at the superattracting center of a basin.

    The series is solved order by order from the functional equation; the
    validity radius shrinks geometrically until the sampled conjugacy defect
    against the true map drops below the configured tolerance.
    """
    if f.degree < 3:
        raise DegreeError("charts are built for maps of degree >= 3")
    if not 0 <= basin_index < len(f.roots.roots):
        raise ValueError(f"no basin with index {basin_index}")
    a, mult = f.roots.roots[basin_index]
    if mult != 1:
        raise ChartFailureError("superattracting chart needs a simple root")
    k = None
    for cp in critical_set(f):
        if cp.kind == "root_center" and cp.root_index == basin_index:
            k = cp.local_degree
            break
    if k is None:
        raise ChartFailureError("no superattracting critical point at this root")

    order = cfg.chart_order
    n = order + k
    psh = np.array(taylor_shift(f.p.coeffs, a), dtype=complex)
    dpsh = np.array(taylor_shift(f.dp.coeffs, a), dtype=complex)
    ratio = _sdiv(psh, dpsh, n)
    fser = -ratio
    fser[1] += 1.0
    scale = float(np.max(np.abs(fser))) or 1.0
    if any(abs(fser[j]) > 1e-6 * scale for j in range(k)):
        raise ChartFailureError("map's local degree disagrees with the critical set")
    fser[:k] = 0.0
    if abs(fser[k]) <= 1e-12 * scale:
        raise ChartFailureError("degenerate leading local coefficient")

    phi = np.zeros(n + 1, dtype=complex)
    phi[1] = fser[k] ** (1.0 / (k - 1))
    lead = k * phi[1] ** (k - 1)
    for m in range(2, order + 1):
        comp = _scompose(phi, fser, n)
        powr = _spow(phi, k, n)
        target = m + k - 1
        phi[m] = (comp[target] - powr[target]) / lead

    chart = BottcherChart(
        basin_index=basin_index,
        center=a,
        local_degree=k,
        coefficients=tuple(phi[: order + 1]),
        radius=1.0,
    )
    others = _special_points(f, a)
    r = 0.5 * min(abs(a - q) for q in others)
    for _ in range(60):
        trial = BottcherChart(
            basin_index=basin_index,
            center=a,
            local_degree=k,
            coefficients=chart.coefficients,
            radius=r,
        )
        worst = 0.0
        for rad in (r, 0.5 * r):
            for t in range(16):
                u = rad * cmath.exp(2j * math.pi * (t + 0.37) / 16)
                z = a + u
                fz = apply(f, z)
                if is_infinity(fz) or abs(fz - a) > rad:
                    worst = math.inf
                    break
                worst = max(worst, abs(trial.value(fz) - trial.value(z) ** k))
            if worst is math.inf:
                break
        if worst < cfg.chart_defect_tol:
            return trial
        r *= 0.6
        if r < 1e-7 * (1 + abs(a)):
            break
    raise ChartFailureError(
        f"conjugacy defect stayed above {cfg.chart_defect_tol} near root {basin_index}"
    )


# ---------------------------------------------------------------------------
# inverse-branch continuation


class _SolveTrouble(Exception):
    pass


def _branch_newton(f: NewtonMap, c: complex, seed: complex, cfg: TraceConfig) -> complex:
    """One preimage of c under f, by damped Newton on (w-c)p'(w) - p(w)."""
    pc = f.p.coeffs
    dpc = f.dp.coeffs
    ddpc = f.ddp.coeffs

    def gval(w):
        dv = 0j
        for q in reversed(dpc):
            dv = dv * w + q
        pv = 0j
        for q in reversed(pc):
            pv = pv * w + q
        return (w - c) * dv - pv

    def gder(w):
        sv = 0j
        for q in reversed(ddpc):
            sv = sv * w + q
        return (w - c) * sv

    w = seed
    gv = gval(w)
    for _ in range(60):
        gd = gder(w)
        if abs(gd) < 1e-300:
            raise _SolveTrouble
        step = -gv / gd
        if abs(step) <= cfg.newton_tol * (1 + abs(w)):
            return w + step
        lam = 1.0
        while True:
            cand = w + lam * step
            gc = gval(cand)
            if abs(gc) < abs(gv):
                w, gv = cand, gc
                break
            lam *= 0.5
            if lam < 1.0 / 256:
                raise _SolveTrouble
    raise _SolveTrouble


def _continue_path(
    f: NewtonMap,
    targets: list[complex],
    first: complex,
    cfg: TraceConfig,
    err: type,
) -> tuple[list[complex], list[complex]]:
    """March one inverse branch along a polyline of targets.

    f(first) must be the initial target.  Returns the branch points aligned
    index-by-index with the (possibly refined) target list; refinement inserts
    chord midpoints of the target polyline where the branch would otherwise
    jump farther than step_max.
    """
    tg = list(targets)
    out = [first]
    j = 1
    budget = 400 + 40 * len(targets)
    while j < len(tg):
        budget -= 1
        if budget < 0:
            raise err("inverse continuation exceeded its refinement budget")
        cur = out[-1]
        seed = cur
        try:
            dv = derivative(f, cur)
            if abs(dv) > 1e-9:
                est = (tg[j] - tg[j - 1]) / dv
                if abs(est) <= 10.0 * (1 + abs(cur)):
                    seed = cur + est
        except Exception:
            pass
        w = None
        try:
            w = _branch_newton(f, tg[j], seed, cfg)
        except _SolveTrouble:
            w = None
        if w is not None and chordal(w, cur) <= cfg.step_max:
            out.append(w)
            j += 1
            continue
        gap = abs(tg[j] - tg[j - 1])
        if gap < 1e4 * cfg.newton_tol * (1 + abs(tg[j])):
            raise err("inverse branch stuck at an unresolvable target gap")
        tg.insert(j, 0.5 * (tg[j - 1] + tg[j]))
    return out, tg


# ---------------------------------------------------------------------------
# fixed internal rays


@dataclass(frozen=True)
class Ray:
    basin_index: int
    angle: Fraction
    points: tuple[complex, ...]
    landing: SpherePoint


def trace_ray(
    f: NewtonMap,
    basin_index: int,
    angle: Fraction,
    cfg: TraceConfig = DEFAULT_TRACE,
) -> Ray:
    """Trace the internal ray of the given angle outward to its landing point.

    The chart segment covers one factor-d_U span of Böttcher potential, so the
    repeated inverse lift of that segment tiles the ray all the way out; each
    lifted sample maps exactly onto a sample one segment in.
    """
    chart = bottcher_chart(f, basin_index, cfg)
    k = chart.local_degree
    theta = 2.0 * math.pi * (angle.numerator / angle.denominator)
    rot = cmath.exp(1j * theta)

    edge_mod = min(
        abs(chart.value(chart.center + chart.radius * cmath.exp(2j * math.pi * t / 12)))
        for t in range(12)
    )
    t_outer = min(0.45, 0.5 * edge_mod)
    lam_c = -math.log(t_outer)

    inward = []
    lam_in = k * lam_c
    for _ in range(80):
        lam_in *= k
        z_in = chart.invert(math.exp(-lam_in) * rot)
        inward.append(z_in)
        if chordal(z_in, chart.center) < 1e-4:
            break

    n0 = cfg.samples_per_segment
    lams = [k * lam_c * (1.0 / k) ** (j / n0) for j in range(n0 + 1)]
    seg = [chart.invert(math.exp(-lam) * rot) for lam in lams]
    guard = 0
    j = 1
    while j < len(seg):
        if chordal(seg[j], seg[j - 1]) > cfg.step_max:
            guard += 1
            if guard > 200:
                raise RayTraceError("chart segment would not refine below step_max")
            lam_mid = 0.5 * (lams[j - 1] + lams[j])
            lams.insert(j, lam_mid)
            seg.insert(j, chart.invert(math.exp(-lam_mid) * rot))
        else:
            j += 1

    polyline = inward[::-1] + list(seg)
    prev = seg
    for _ in range(cfg.max_segments):
        first = prev[-1]
        lifted, refined = _continue_path(f, prev, first, cfg, RayTraceError)
        if len(refined) != len(prev):
            start = len(polyline) - len(prev)
            polyline[start:] = refined
            prev = refined
        nxt = lifted
        escape = None
        for idx in range(1, len(nxt)):
            if abs(nxt[idx]) > cfg.far_radius:
                escape = idx
                break
        if escape is not None:
            polyline.extend(nxt[1 : escape + 1])
            a1 = cmath.phase(1.0 / polyline[-1])
            a0 = cmath.phase(1.0 / polyline[-2])
            wob = abs((a1 - a0 + math.pi) % (2 * math.pi) - math.pi)
            if wob > 0.1:
                raise LandingAmbiguityError(
                    "ray escaped without a stable asymptotic direction"
                )
            return Ray(
                basin_index=basin_index,
                angle=angle,
                points=tuple(polyline),
                landing=INFINITY,
            )
        polyline.extend(nxt[1:])
        prev = nxt
    raise LandingAmbiguityError(
        f"ray did not reach |z| > {cfg.far_radius:g} within {cfg.max_segments} segments"
    )


# ---------------------------------------------------------------------------
# graphs


@dataclass(frozen=True)
class GraphVertex:
    id: int
    kind: str  # "root" | "pre" | "inf"
    index: int  # root number, or discovery depth for preimage vertices
    position: SpherePoint


@dataclass(frozen=True)
class GraphEdge:
    id: int
    tail: int
    head: int
    points: tuple[complex, ...]
    parent_edge: int


@dataclass(frozen=True)
class NewtonGraphApprox:
    level: int
    vertices: tuple[GraphVertex, ...]
    edges: tuple[GraphEdge, ...]
    rotations: tuple[tuple[int, tuple[tuple[int, int], ...]], ...]


def _vertex_map(g: NewtonGraphApprox) -> dict[int, GraphVertex]:
    return {v.id: v for v in g.vertices}


def _rotation_map(g: NewtonGraphApprox) -> dict[int, tuple[tuple[int, int], ...]]:
    return dict(g.rotations)


def _infinity_vertex(g: NewtonGraphApprox) -> GraphVertex:
    for v in g.vertices:
        if v.kind == "inf":
            return v
    raise EmbeddingError("graph has no vertex at infinity")


def _dart_angle(g: NewtonGraphApprox, edge: GraphEdge, end: int) -> float:
    verts = _vertex_map(g)
    v = verts[edge.tail if end == 0 else edge.head]
    if v.kind == "inf":
        far = edge.points[-1] if end == 1 else edge.points[0]
        w = 1.0 / far
        return math.atan2(w.imag, w.real)
    pos = v.position
    # walk past endpoint samples that sit inside solver noise of the vertex,
    # they carry no direction information
    walk = edge.points[1:] if end == 0 else edge.points[-2::-1]
    floor = 1e-7 * (1 + abs(pos))
    d = walk[-1] - pos
    for nb in walk:
        if abs(nb - pos) >= floor:
            d = nb - pos
            break
    return math.atan2(d.imag, d.real)


def _build_rotations(
    vertices: list[GraphVertex], edges: list[GraphEdge]
) -> tuple[tuple[int, tuple[tuple[int, int], ...]], ...]:
    tmp = NewtonGraphApprox(0, tuple(vertices), tuple(edges), ())
    incident: dict[int, list[tuple[float, int, int]]] = {v.id: [] for v in vertices}
    for e in edges:
        incident[e.tail].append((_dart_angle(tmp, e, 0), e.id, 0))
        incident[e.head].append((_dart_angle(tmp, e, 1), e.id, 1))
    rots = []
    for v in sorted(incident, key=lambda i: i):
        darts = sorted(incident[v])
        rots.append((v, tuple((eid, end) for _, eid, end in darts)))
    return tuple(rots)


def trace_delta0(f: NewtonMap, cfg: TraceConfig = DEFAULT_TRACE) -> NewtonGraphApprox:
    """The level-0 graph: every basin's fixed internal rays joined at infinity."""
    if any(m != 1 for _, m in f.roots.roots):
        raise NonSimpleRootsError("level-0 tracing needs simple roots")
    local_degree = {}
    for cp in critical_set(f):
        if cp.kind == "root_center":
            local_degree[cp.root_index] = cp.local_degree
    d = f.degree
    vertices = [
        GraphVertex(id=i, kind="root", index=i, position=loc)
        for i, loc in enumerate(f.roots.locations)
    ]
    inf_id = d
    vertices.append(GraphVertex(id=inf_id, kind="inf", index=0, position=INFINITY))
    edges = []
    for i in range(d):
        k = local_degree.get(i)
        if k is None:
            raise ChartFailureError(f"root {i} has no superattracting chart")
        for j in range(k - 1):
            ray = trace_ray(f, i, Fraction(j, k - 1), cfg)
            eid = len(edges)
            pts = (vertices[i].position,) + ray.points
            edges.append(
                GraphEdge(id=eid, tail=i, head=inf_id, points=pts, parent_edge=eid)
            )
    rots = _build_rotations(vertices, edges)
    return NewtonGraphApprox(
        level=0, vertices=tuple(vertices), edges=tuple(edges), rotations=rots
    )


# ---------------------------------------------------------------------------
# pullback


def _preimage_coeffs(f: NewtonMap, c: complex) -> Polynomial:
    dp = np.array(f.dp.coeffs, dtype=complex)
    p = np.array(f.p.coeffs, dtype=complex)
    shifted = np.convolve(np.array([-c, 1.0], dtype=complex), dp)
    n = max(len(shifted), len(p))
    arr = np.zeros(n, dtype=complex)
    arr[: len(shifted)] += shifted
    arr[: len(p)] -= p
    return Polynomial(tuple(arr))


def _preimages_of(f: NewtonMap, c: SpherePoint) -> list[tuple[SpherePoint, int]]:
    """All preimages of c with their branch multiplicities (local degrees)."""
    if is_infinity(c):
        out: list[tuple[SpherePoint, int]] = [(w, k) for w, k in poles(f)]
        out.append((INFINITY, 1))
        return out
    return list(find_roots(_preimage_coeffs(f, c)).roots)


def _finite_critical_values(f: NewtonMap) -> list[complex]:
    vals: list[complex] = []
    for cp in critical_set(f):
        v = apply(f, cp.location)
        if is_infinity(v):
            continue
        if all(abs(v - u) > 1e-12 * (1 + abs(v)) for u in vals):
            vals.append(v)
    return vals


def _split_at_critical_values(
    f: NewtonMap,
    pts: tuple[complex, ...],
    tail_pos: SpherePoint,
    head_pos: SpherePoint,
    cfg: TraceConfig,
) -> list[tuple[tuple[complex, ...], SpherePoint]]:
    """Cut an edge polyline where a critical value sits in its interior.

    A lifted branch cannot be continued across a branch point, so the cut
    turns the crossing into a shared endpoint; its preimages then become
    vertices and the germ-splitting logic takes over.  Cuts near the original
    endpoints are skipped, those are already vertices.
    """
    a = np.asarray(pts[:-1], dtype=complex)
    b = np.asarray(pts[1:], dtype=complex)
    ab = b - a
    den = np.abs(ab) ** 2
    hits: list[tuple[int, float, complex]] = []
    for v in _finite_critical_values(f):
        if chordal(v, tail_pos) < 1e-3 or chordal(v, head_pos) < 1e-3:
            continue
        t = np.where(den > 0, ((v - a) * np.conj(ab)).real / np.where(den > 0, den, 1.0), 0.0)
        t = np.clip(t, 0.0, 1.0)
        dist = np.abs(v - (a + t * ab))
        i = int(np.argmin(dist))
        if dist[i] <= cfg.vertex_tol * (1 + abs(v)):
            hits.append((i, float(t[i]), v))
    if not hits:
        return [(pts, head_pos)]
    hits.sort(key=lambda h: (h[0], h[1]))
    pieces: list[tuple[tuple[complex, ...], SpherePoint]] = []
    work = list(pts)
    base = 0
    for i, _, v in hits:
        cut = i - base + 1
        left = work[:cut] + [v]
        if len(left) >= 3 and abs(left[-1] - left[-2]) < 1e-13 * (1 + abs(v)):
            left = left[:-2] + [v]
        pieces.append((tuple(left), v))
        rest = [v] + work[cut:]
        if len(rest) >= 2 and abs(rest[0] - rest[1]) < 1e-13 * (1 + abs(v)):
            rest = [v] + rest[2:]
        work = rest
        base = i + 1
    pieces.append((tuple(work), head_pos))
    return [p for p in pieces if len(p[0]) >= 2]


def pull_back(
    f: NewtonMap, g: NewtonGraphApprox, cfg: TraceConfig = DEFAULT_TRACE
) -> NewtonGraphApprox:
    """The full inverse image of g, restricted to the component of infinity.

    Every edge is lifted through all d inverse branches by marching its
    polyline; branch germs at a critical preimage of the tail are split using
    the preimages of the first interior sample.  Vertices carried over from g
    keep their ids and labels, new ones are preimage vertices of this depth.
    """
    new_level = g.level + 1
    vmap_old = _vertex_map(g)
    raw: list[tuple[SpherePoint, SpherePoint, tuple[complex, ...], int]] = []
    lift_jobs: list[tuple[tuple[complex, ...], SpherePoint, int]] = []
    for e in sorted(g.edges, key=lambda e: e.id):
        e_tail = vmap_old[e.tail].position
        e_head = vmap_old[e.head].position
        if is_infinity(e_tail) or len(e.points) < 2:
            raise LiftError("edge lifting requires a finite tail with a polyline")
        for piece_pts, piece_head in _split_at_critical_values(
            f, e.points, e_tail, e_head, cfg
        ):
            lift_jobs.append((piece_pts, piece_head, e.id))
    for piece_pts, head_pos, parent_id in lift_jobs:
        tail_pos = piece_pts[0]
        germ_roots = _preimages_of(f, piece_pts[1])
        if any(m != 1 for _, m in germ_roots if not is_infinity(_)):
            raise LiftError("edge sample sits on a critical value of the map")
        cands = [w for w, _ in germ_roots if not is_infinity(w)]
        pre_tail = sorted(
            ((w, m) for w, m in _preimages_of(f, tail_pos) if not is_infinity(w)),
            key=lambda t: (t[0].real, t[0].imag),
        )
        claimed: set[int] = set()
        end_cands = _preimages_of(f, head_pos)
        for w0, mu in pre_tail:
            mine = sorted(
                (i for i in range(len(cands)) if i not in claimed),
                key=lambda i: abs(cands[i] - w0),
            )[:mu]
            claimed.update(mine)
            germs = sorted(
                (cands[i] for i in mine), key=lambda z: (z.real, z.imag)
            )
            for first in germs:
                lifted, _ = _continue_path(
                    f, list(piece_pts[1:]), first, cfg, LiftError
                )
                pts = [w0] + lifted
                end_pos = min(end_cands, key=lambda t: chordal(t[0], pts[-1]))[0]
                if not is_infinity(end_pos):
                    if abs(pts[-1] - end_pos) > 1e-8 * (1 + abs(end_pos)):
                        pts.append(end_pos)
                    else:
                        pts[-1] = end_pos
                raw.append((w0, end_pos, tuple(pts), parent_id))

    next_id = max(v.id for v in g.vertices) + 1
    used: dict[int, GraphVertex] = {}

    def resolve(pos: SpherePoint) -> int:
        nonlocal next_id
        for v in g.vertices:
            if chordal(v.position, pos) <= cfg.vertex_tol:
                used[v.id] = v
                return v.id
        for v in used.values():
            if chordal(v.position, pos) <= cfg.vertex_tol:
                return v.id
        v = GraphVertex(id=next_id, kind="pre", index=new_level, position=pos)
        used[v.id] = v
        next_id += 1
        return v.id

    pre_edges = []
    for tail_pos, head_pos, pts, parent in raw:
        pre_edges.append((resolve(tail_pos), resolve(head_pos), pts, parent))

    adj: dict[int, set[int]] = {}
    for t, h, _, _ in pre_edges:
        adj.setdefault(t, set()).add(h)
        adj.setdefault(h, set()).add(t)
    inf_ids = [v.id for v in used.values() if v.kind == "inf"]
    if not inf_ids:
        raise LiftError("no lifted edge reaches the vertex at infinity")
    comp = {inf_ids[0]}
    frontier = [inf_ids[0]]
    while frontier:
        v = frontier.pop()
        for w in adj.get(v, ()):
            if w not in comp:
                comp.add(w)
                frontier.append(w)

    edges = []
    for t, h, pts, parent in pre_edges:
        if t in comp:
            edges.append(
                GraphEdge(
                    id=len(edges), tail=t, head=h, points=pts, parent_edge=parent
                )
            )
    vertices = sorted(
        (v for v in used.values() if v.id in comp), key=lambda v: v.id
    )
    rots = _build_rotations(vertices, edges)
    return NewtonGraphApprox(
        level=new_level, vertices=tuple(vertices), edges=tuple(edges), rotations=rots
    )


# ---------------------------------------------------------------------------
# canonical level


def _lands_on_fixed(f: NewtonMap, z0: complex, budget: OrbitBudget) -> bool:
    """Does the orbit of z0 hit a fixed point exactly (not just converge)?

    Exact landings arrive discontinuously: the step before the hit is still
    far away.  A superattracting approach instead squares its distance, so its
    last pre-hit distance is tiny and the arrival test fails.
    """
    w: SpherePoint = z0
    prev = math.inf
    for _ in range(64):
        if is_infinity(w):
            return True
        dm = min(abs(w - r) for r in f.roots.locations)
        if dm <= 1e-12 * (1 + abs(w)):
            return prev > 1e-4
        prev = dm
        w = apply(f, w)
    return False


def _canonical_chain(
    f: NewtonMap,
    n_max: int,
    cfg: TraceConfig,
    budget: OrbitBudget,
) -> tuple[int, list[NewtonGraphApprox]]:
    targets: list[complex] = [w for w, _ in poles(f)]
    for cp in critical_set(f):
        if _lands_on_fixed(f, cp.location, budget):
            targets.append(cp.location)
    chain = [trace_delta0(f, cfg)]
    for n in range(n_max + 1):
        g = chain[-1]
        if all(
            any(chordal(v.position, t) <= cfg.vertex_tol for v in g.vertices)
            for t in targets
        ):
            return n, chain
        if n == n_max:
            break
        chain.append(pull_back(f, g, cfg))
    raise LevelNotReachedError(
        f"graph misses required points through level {n_max}", partial=chain[-1]
    )


def canonical_level(
    f: NewtonMap,
    n_max: int,
    cfg: TraceConfig = DEFAULT_TRACE,
    budget: OrbitBudget = DEFAULT_BUDGET,
) -> tuple[int, NewtonGraphApprox]:
    """Minimal level whose graph carries all poles and exactly-landing criticals."""
    n, chain = _canonical_chain(f, n_max, cfg, budget)
    return n, chain[n]


# ---------------------------------------------------------------------------
# faces


@dataclass(frozen=True)
class Face:
    id: int
    boundary: tuple[tuple[int, int], ...]
    representative: complex


@dataclass(frozen=True)
class Itinerary:
    faces: tuple[int, ...]
    length: int


def _face_partition(
    rings: dict[int, tuple[tuple[int, int], ...]],
) -> tuple[list[tuple[tuple[int, int], ...]], dict[tuple[int, int], int]]:
    pos = {d: (v, i) for v, ring in rings.items() for i, d in enumerate(ring)}

    def nxt(d):
        a = (d[0], 1 - d[1])
        v, i = pos[a]
        ring = rings[v]
        return ring[(i + 1) % len(ring)]

    orbits = []
    dart_orbit: dict[tuple[int, int], int] = {}
    for v in sorted(rings):
        for d in rings[v]:
            if d in dart_orbit:
                continue
            oid = len(orbits)
            cyc = [d]
            dart_orbit[d] = oid
            cur = nxt(d)
            while cur != d:
                dart_orbit[cur] = oid
                cyc.append(cur)
                cur = nxt(cur)
            orbits.append(tuple(cyc))
    return orbits, dart_orbit


@lru_cache(maxsize=32)
def _face_structure(g: NewtonGraphApprox):
    rings = _rotation_map(g)
    orbits, dart_orbit = _face_partition(rings)
    euler = len(g.vertices) - len(g.edges) + len(orbits)
    if euler != 2:
        raise EmbeddingError(
            f"rotation system has Euler characteristic {euler}, embedding rejected"
        )
    return orbits, dart_orbit


@lru_cache(maxsize=32)
def _segment_arrays(g: NewtonGraphApprox):
    eids, tails, heads = [], [], []
    for e in g.edges:
        pts = np.asarray(e.points, dtype=complex)
        if len(pts) < 2:
            continue
        eids.append(np.full(len(pts) - 1, e.id, dtype=np.int64))
        tails.append(pts[:-1])
        heads.append(pts[1:])
    if not eids:
        return None
    return np.concatenate(eids), np.concatenate(tails), np.concatenate(heads)


def _nearest_dart(g: NewtonGraphApprox, z: complex):
    """Closest polyline segment to z: (chordal distance, edge id, side sign).

    Far queries are measured in the w = 1/z chart; the chart map is
    holomorphic, so the left-of sign carries over unchanged, and the chordal
    metric is invariant under it.
    """
    seg = _segment_arrays(g)
    if seg is None:
        return math.inf, None, 0.0
    _, a, b = seg
    if abs(z) > 1e4:
        ok = (a != 0) & (b != 0)
        qa = np.where(ok, 1.0 / np.where(a == 0, 1.0, a), 0.0)
        qb = np.where(ok, 1.0 / np.where(b == 0, 1.0, b), 0.0)
        qz = 1.0 / z
    else:
        ok = np.ones(len(a), dtype=bool)
        qa, qb, qz = a, b, z
    ab = qb - qa
    den = np.abs(ab) ** 2
    t = np.where(den > 0, ((qz - qa) * np.conj(ab)).real / np.where(den > 0, den, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    projq = qa + t * ab
    du = np.abs(qz - projq)
    dist = du / np.sqrt((1.0 + abs(qz) ** 2) * (1.0 + np.abs(projq) ** 2))
    dist = np.where(ok & (den > 0), dist, np.inf)
    i = int(np.argmin(dist))
    cross = (np.conj(ab[i]) * (qz - qa[i])).imag
    return float(dist[i]), int(seg[0][i]), float(cross)


def point_locate(
    g: NewtonGraphApprox, z: SpherePoint, cfg: TraceConfig = DEFAULT_TRACE
) -> int:
    """Face id containing z, or ON_GRAPH within tube_tol of the graph."""
    if is_infinity(z):
        return ON_GRAPH
    _, dart_orbit = _face_structure(g)
    dist, eid, cross = _nearest_dart(g, z)
    if eid is None:
        raise EmbeddingError("graph has no edges to locate against")
    if dist <= cfg.tube_tol:
        return ON_GRAPH
    for v in g.vertices:
        if chordal(v.position, z) <= cfg.tube_tol:
            return ON_GRAPH
    dart = (eid, 0) if cross > 0 else (eid, 1)
    return dart_orbit[dart]


def _representative(g, fid, cyc, cfg) -> complex:
    segs = []
    edge_map = {e.id: e for e in g.edges}
    for eid, end in cyc:
        pts = edge_map[eid].points if end == 0 else edge_map[eid].points[::-1]
        k = len(pts) // 2
        for i in (k, max(0, k - 2), min(len(pts) - 2, k + 2)):
            a, b = pts[i], pts[i + 1]
            if a != b:
                segs.append((max(abs(a), abs(b)), a, b))
    segs.sort(key=lambda s: s[0])
    for _, a, b in segs[:12]:
        mid = 0.5 * (a + b)
        n = 1j * (b - a) / abs(b - a)
        for s in (1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5):
            for sign in (1.0, -1.0):
                cand = mid + sign * s * (1 + abs(mid)) * n
                try:
                    if point_locate(g, cand, cfg) == fid:
                        return cand
                except EmbeddingError:
                    raise
    raise EmbeddingError(f"no interior representative found for face {fid}")


def faces(g: NewtonGraphApprox, cfg: TraceConfig = DEFAULT_TRACE) -> tuple[Face, ...]:
    """Faces of the embedded graph, traced from the rotation system."""
    orbits, _ = _face_structure(g)
    out = []
    for fid, cyc in enumerate(orbits):
        rep = _representative(g, fid, cyc, cfg)
        out.append(Face(id=fid, boundary=cyc, representative=rep))
    return tuple(out)


def itinerary(
    f: NewtonMap,
    z: SpherePoint,
    g: NewtonGraphApprox,
    length: int,
    cfg: TraceConfig = DEFAULT_TRACE,
) -> Itinerary:
    """Face ids visited by the orbit of z, with ON_GRAPH for tube contacts."""
    if length < 1:
        raise ValueError("itinerary length must be at least 1")
    out = []
    cur = z
    for _ in range(length):
        out.append(point_locate(g, cur, cfg))
        cur = apply(f, cur)
    return Itinerary(faces=tuple(out), length=length)


# ---------------------------------------------------------------------------
# canonical comparison


class _UnknownVerdict(Exception):
    pass


def _encode_rooted(
    g: NewtonGraphApprox,
    rings: dict[int, tuple[tuple[int, int], ...]],
    start: tuple[int, int],
    prev_ref: Optional[dict[int, int]],
):
    """Integer token stream of the map rooted at a dart of infinity.

    Vertices and edges receive canonical indices in breadth-first discovery
    order; each ring is emitted from the dart by which its vertex was entered,
    so two rooted maps are isomorphic exactly when their streams agree.
    """
    edge_map = {e.id: e for e in g.edges}
    vmap = _vertex_map(g)

    def origin(d):
        e = edge_map[d[0]]
        return e.tail if d[1] == 0 else e.head

    _KIND = {"root": 0, "pre": 1, "inf": 2}
    canon_v = {origin(start): 0}
    canon_e: dict[int, int] = {}
    tokens: list[int] = []
    emission: list[tuple[int, int]] = []
    queue = deque([(origin(start), start)])
    while queue:
        v, anchor = queue.popleft()
        ring = rings[v]
        i0 = ring.index(anchor)
        ring = ring[i0:] + ring[:i0]
        vd = vmap[v]
        tokens += [_KIND[vd.kind], vd.index, len(ring)]
        for d in ring:
            emission.append(d)
            if d[0] not in canon_e:
                canon_e[d[0]] = len(canon_e)
            u = origin((d[0], 1 - d[1]))
            if u not in canon_v:
                canon_v[u] = len(canon_v)
                queue.append((u, (d[0], 1 - d[1])))
            parent = edge_map[d[0]].parent_edge
            ref = -2 if prev_ref is None else prev_ref[parent]
            tokens += [canon_e[d[0]], canon_v[u], ref]
    if len(canon_v) != len(g.vertices):
        raise EmbeddingError("rooted traversal did not reach every vertex")
    return tuple(tokens), canon_e, emission


def _canonical_encoding(
    g: NewtonGraphApprox, prev_options: list[Optional[dict[int, int]]]
):
    """Lexicographically minimal rooted encoding over start dart and mirror.

    Returns the winning token stream, the surviving edge-index maps (several
    when the graph has automorphisms), and one plain-face-id -> canonical rank
    map taken from the first winner.
    """
    rings = _rotation_map(g)
    inf_id = _infinity_vertex(g).id
    plain_orbits, _ = _face_structure(g)
    best = None
    winners: list[tuple[dict[int, int], dict[int, int]]] = []
    for prev in prev_options:
        for mirror in (False, True):
            used = {
                v: tuple(reversed(r)) if mirror else r for v, r in rings.items()
            }
            _, dart_orbit_u = _face_partition(used)
            for start in used[inf_id]:
                tokens, canon_e, emission = _encode_rooted(g, used, start, prev)
                if best is not None and tokens > best:
                    continue
                rank: dict[int, int] = {}
                for d in emission:
                    oid = dart_orbit_u[d]
                    if oid not in rank:
                        rank[oid] = len(rank)
                face_rank = {}
                for pid, cyc in enumerate(plain_orbits):
                    d = cyc[0]
                    du = (d[0], 1 - d[1]) if mirror else d
                    face_rank[pid] = rank[dart_orbit_u[du]]
                if best is None or tokens < best:
                    best = tokens
                    winners = [(canon_e, face_rank)]
                elif (canon_e, face_rank) not in winners:
                    winners.append((canon_e, face_rank))
    return best, winners


def _comb_invariants(
    f: NewtonMap,
    level: int,
    cfg: TraceConfig,
    budget: OrbitBudget,
    itinerary_length: int,
):
    n, chain = _canonical_chain(f, level, cfg, budget)
    stream: list[tuple[int, ...]] = []
    prev_options: list[Optional[dict[int, int]]] = [None]
    winners: list[tuple[dict[int, int], dict[int, int]]] = []
    for gk in chain[: n + 1]:
        tokens, winners = _canonical_encoding(gk, prev_options)
        stream.append(tokens)
        seen: list[dict[int, int]] = []
        for ce, _ in winners:
            if ce not in seen:
                seen.append(ce)
        prev_options = list(seen)
    face_rank = winners[0][1]
    top = chain[n]
    free = []
    for cp in critical_set(f):
        verdict = classify(f, cp.location, budget)
        if isinstance(verdict, Unresolved):
            raise _UnknownVerdict
        if isinstance(verdict, ConvergedToRoot):
            continue
        itin = itinerary(f, cp.location, top, itinerary_length, cfg)
        mapped = tuple(
            face_rank[t] if t != ON_GRAPH else ON_GRAPH for t in itin.faces
        )
        free.append((cp.local_degree, mapped))
    return n, tuple(stream), tuple(sorted(free))


def comb_equivalent(
    f: NewtonMap,
    g: NewtonMap,
    level: int,
    budget: OrbitBudget = DEFAULT_BUDGET,
    cfg: TraceConfig = DEFAULT_TRACE,
    itinerary_length: int = 32,
) -> str:
    """Tri-state graph equivalence: "yes", "no", or "unknown".

    Yes requires equal canonical levels, identical canonical encodings of the
    whole graph tower (labels, rotations, and edge dynamics included), and a
    degree plus face-itinerary matching of the free critical points.
    """
    try:
        a = _comb_invariants(f, level, cfg, budget, itinerary_length)
        b = _comb_invariants(g, level, cfg, budget, itinerary_length)
    except (
        _UnknownVerdict,
        ChartFailureError,
        RayTraceError,
        LandingAmbiguityError,
        LiftError,
        EmbeddingError,
        LevelNotReachedError,
    ):
        return "unknown"
    return "yes" if a == b else "no"


# ---------------------------------------------------------------------------
# export


def _fmt(x: float) -> str:
    return "%.17g" % x


def export_graph_text(g: NewtonGraphApprox) -> str:
    """Line-oriented dump: V/E/F records with deterministic ordering."""
    vmap = _vertex_map(g)

    def label(v: GraphVertex) -> str:
        return "inf" if v.kind == "inf" else f"{v.kind}{v.index}"

    def sort_key(v: GraphVertex):
        if is_infinity(v.position):
            return (label(v), 0.0, 0.0)
        return (label(v), v.position.real, v.position.imag)

    lines = []
    for v in sorted(g.vertices, key=sort_key):
        if is_infinity(v.position):
            lines.append(f"V {v.id} inf inf inf")
        else:
            lines.append(
                f"V {v.id} {label(v)} {_fmt(v.position.real)} {_fmt(v.position.imag)}"
            )
    for e in sorted(g.edges, key=lambda e: e.id):
        pts = " ".join(f"{_fmt(p.real)} {_fmt(p.imag)}" for p in e.points)
        lines.append(f"E {e.id} {e.tail} {e.head} {len(e.points)} {pts}")
    orbits, _ = _face_structure(g)
    for fid, cyc in enumerate(orbits):
        toks = " ".join(f"{eid}{'+' if end == 0 else '-'}" for eid, end in cyc)
        lines.append(f"F {fid} {toks}")
    return "\n".join(lines) + "\n"
