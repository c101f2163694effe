"""Directional foliation leaves: tracing, cylinders, connections, density.

Straight-line flow across gluings.  An edge identification with sign -1
negates the direction, so a trajectory hitting a folded edge continues by
the half-turn about the fold midpoint, staying on the same shore.  A
trajectory meeting a cone point terminates there (separatrix semantics);
a trajectory through a regular vertex continues straight.

Exact mode does every comparison in Q(sqrt3) and detects closure exactly;
float mode uses doubles with a snap tolerance for edge events and never
claims closure.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .qfield import FieldElem, Vec2
from .surface import ConePoint, Surface, SurfaceError, on_segment

FLOAT_SNAP = 1e-9
_MAX_EVENTS = 10_000_000


class FlowError(ValueError):
    pass


@dataclass
class LeafTrace:
    """A traced leaf: chart segments, each parallel to +-direction."""

    surface: Surface
    direction: Vec2
    mode: str                      # "exact" or "float"
    segments: list                 # exact: (poly, Vec2, Vec2); float: (poly, (x,y), (x,y))
    param_length: FieldElem | float  # total parameter t along the unnormalized direction
    termination: str               # "budget" | "closed" | "cone"
    cone_label: str | None = None
    closure_sign: int | None = None  # +1 same direction, -1 reversed

    def arclength(self) -> float:
        d = self.direction
        return float(self.param_length) * math.hypot(float(d.x), float(d.y))

    def arclength_exact(self) -> FieldElem | None:
        """Exact length when |direction| lies in Q(sqrt3) (exact mode only)."""
        if self.mode != "exact":
            return None
        n = self.direction.norm_exact()
        if n is None:
            return None
        return self.param_length * n

    def float_segments(self) -> list[tuple[int, float, float, float, float]]:
        out = []
        for poly, a, b in self.segments:
            if isinstance(a, Vec2):
                out.append((poly, float(a.x), float(a.y), float(b.x), float(b.y)))
            else:
                out.append((poly, a[0], a[1], b[0], b[1]))
        return out

    def start_point(self) -> tuple[int, tuple[float, float]]:
        poly, a, _ = self.segments[0]
        if isinstance(a, Vec2):
            return poly, (float(a.x), float(a.y))
        return poly, a


@dataclass
class Cylinder:
    direction: Vec2
    circumference_param: FieldElem   # closed-leaf parameter along the direction
    width_param: FieldElem           # transversal parameter along the left normal
    boundary: tuple[int, ...]        # indices into the connection list
    core_leaf: LeafTrace = field(repr=False, default=None)

    def circumference(self) -> FieldElem | None:
        n = self.direction.norm_exact()
        return None if n is None else self.circumference_param * n

    def width(self) -> FieldElem | None:
        n = self.direction.norm_exact()
        return None if n is None else self.width_param * n


@dataclass
class SaddleConnection:
    from_label: str
    to_label: str
    param_length: FieldElem
    segments: list
    signature: frozenset = field(repr=False, default=None)

    def length(self, direction: Vec2) -> FieldElem | None:
        n = direction.norm_exact()
        return None if n is None else self.param_length * n


# ---------------------------------------------------------------------------
# exact tracer


def _budget_param(direction: Vec2, budget) -> tuple[FieldElem | None, FieldElem]:
    """Budget as a parameter bound: t_max with t*|d| <= budget.

    Returns (t_max_exact_or_None, budget_field).  When |d| is irrational in
    the field, comparisons fall back to squared form.
    """
    if isinstance(budget, float):
        budget = Fraction(budget)
    bud = FieldElem.coerce(budget)
    if bud.sign() <= 0:
        raise FlowError("budget must be positive")
    n = direction.norm_exact()
    if n is not None:
        return bud / n, bud
    return None, bud


def _param_within_budget(t: FieldElem, t_max: FieldElem | None, bud: FieldElem,
                         d2: FieldElem) -> bool:
    if t_max is not None:
        return (t - t_max).sign() < 0
    return (t * t * d2 - bud * bud).sign() < 0


def _clip_param(t_next: FieldElem, t_max: FieldElem | None, bud: FieldElem,
                d2: FieldElem) -> FieldElem:
    """min(t_next, budget parameter), exact when representable."""
    if t_max is not None:
        return t_next if (t_next - t_max).sign() <= 0 else t_max
    if (t_next * t_next * d2 - bud * bud).sign() <= 0:
        return t_next
    r = (bud * bud / d2).sqrt()
    if r is not None:
        return r
    # |d| outside the field: clip at a rational just below budget/|d|
    approx = Fraction(float(bud) / math.sqrt(float(d2))).limit_denominator(10**12)
    cand = FieldElem(approx)
    while (cand * cand * d2 - bud * bud).sign() > 0:
        cand = cand - FieldElem(Fraction(1, 10**9))
    return cand


def _inward_normal(poly, ei) -> Vec2:
    v0 = poly[ei]
    v1 = poly[(ei + 1) % len(poly)]
    return (v1 - v0).perp()


def _edges_containing(surface: Surface, pi: int, p: Vec2) -> list[int]:
    poly = surface.polygons[pi]
    n = len(poly)
    return [ei for ei in range(n) if on_segment(p, poly[ei], poly[(ei + 1) % n])]


def _vertex_index(surface: Surface, pi: int, p: Vec2) -> int | None:
    for vi, q in enumerate(surface.polygons[pi]):
        if q == p:
            return vi
    return None


def _sector_contains(surface: Surface, pi: int, vi: int, d: Vec2) -> str | None:
    """Classify direction d at corner (pi, vi): 'interior', 'out-edge',
    'in-edge' (along the boundary rays), or None."""
    poly = surface.polygons[pi]
    n = len(poly)
    r_out = poly[(vi + 1) % n] - poly[vi]
    r_in = poly[(vi - 1) % n] - poly[vi]
    c_out = r_out.cross(d).sign()
    c_in = d.cross(r_in).sign()
    if c_out > 0 and c_in > 0:
        return "interior"
    if c_out == 0 and r_out.dot(d).sign() > 0:
        return "out-edge"
    if c_in == 0 and r_in.dot(d).sign() > 0:
        return "in-edge"
    return None


class _ExactTracer:
    def __init__(self, surface: Surface, direction: Vec2, budget):
        if direction.is_zero():
            raise FlowError("zero direction")
        self.s = surface
        self.d0 = direction
        self.d2 = direction.norm2()
        self.t_max, self.bud = _budget_param(direction, budget)
        self.segments: list = []
        self.t_acc = FieldElem(0)
        self.termination = "budget"
        self.cone_label: str | None = None
        self.closure_sign: int | None = None

    # -- start normalization ---------------------------------------------------

    def start(self, pi: int, p: Vec2, want_closure: bool) -> None:
        s = self.s
        if not s.contains(pi, p):
            raise FlowError("start point outside its polygon")
        self.start_reps = s.point_orbit(pi, p) if want_closure else []
        self.want_closure = want_closure
        d = self.d0

        cp = s.cone_point_at(pi, p)
        state = None
        if cp is not None:
            state = self._cone_start(cp, d, (pi, p))
            if state is None:
                raise FlowError(f"direction is not an outgoing prong at {cp.label}")
        else:
            vi = _vertex_index(s, pi, p)
            if vi is not None:
                state = self._vertex_continue(pi, p, d)
                if state is None:
                    raise FlowError("direction does not enter the surface at this vertex")
            else:
                edges = _edges_containing(s, pi, p)
                state = None
                for ei in edges:
                    poly = s.polygons[pi]
                    e = poly[(ei + 1) % len(poly)] - poly[ei]
                    if not e.cross(d):
                        state = ("edge", pi, p, d, ei)
                        break
                if state is None:
                    for ei in edges:
                        if _inward_normal(s.polygons[pi], ei).dot(d).sign() < 0:
                            g = s.gluing_of((pi, ei))
                            pi, p, d = self._across(g, (pi, ei), p, d)
                            break
                    state = ("interior", pi, p, d, None)
        self.state = state

    def _cone_start(self, cp: ConePoint, d: Vec2, at: tuple[int, Vec2]):
        """Starting state for a prong at cone point cp.

        A 4pi point has several prongs sharing the same direction; the chart
        representative ``at`` given by the caller disambiguates, so reps at
        that exact chart point are tried first.
        """
        s = self.s
        if cp.kind == "fold-midpoint":
            (pi, ei), = cp.reps
            poly = s.polygons[pi]
            m = cp.position[1]
            e = poly[(ei + 1) % len(poly)] - poly[ei]
            if not e.cross(d):
                return ("edge", pi, m, d, ei)
            if _inward_normal(poly, ei).dot(d).sign() > 0:
                return ("interior", pi, m, d, None)
            return None
        reps = sorted(
            cp.reps,
            key=lambda r: (r[0], s.polygons[r[0]][r[1]]) != (at[0], at[1]),
        )
        for (pi, vi) in reps:
            kind = _sector_contains(s, pi, vi, d)
            p = s.polygons[pi][vi]
            if kind == "interior":
                return ("interior", pi, p, d, None)
            if kind == "out-edge":
                return ("edge", pi, p, d, vi)
            if kind == "in-edge":
                return ("edge", pi, p, d, (vi - 1) % len(s.polygons[pi]))
        return None

    def _vertex_continue(self, pi: int, p: Vec2, d: Vec2):
        """Continuation through a 2pi vertex class (or start at one)."""
        for (qi, q) in self.s.point_orbit(pi, p):
            vi = _vertex_index(self.s, qi, q)
            if vi is None:
                continue
            kind = _sector_contains(self.s, qi, vi, d)
            if kind == "interior":
                return ("interior", qi, q, d, None)
            if kind == "out-edge":
                return ("edge", qi, q, d, vi)
            if kind == "in-edge":
                return ("edge", qi, q, d, (vi - 1) % len(self.s.polygons[qi]))
        return None

    def _across(self, g, ref, p: Vec2, d: Vec2):
        if g.a == ref:
            return g.b[0], g.map_point(p), g.map_dir(d)
        return g.a[0], g.unmap_point(p), g.map_dir(d)

    # -- stepping ------------------------------------------------------------------

    def run(self) -> None:
        s = self.s
        for _ in range(_MAX_EVENTS):
            kind, pi, p, d, ei = self.state
            if kind == "interior":
                done = self._step_interior(pi, p, d)
            else:
                done = self._step_edge(pi, p, d, ei)
            if done:
                return
        raise FlowError("event limit exceeded")

    def _emit(self, pi: int, p: Vec2, q: Vec2, d: Vec2, t_seg: FieldElem) -> bool:
        """Append segment p->q; handle budget clipping and closure. True = stop."""
        t_end = self.t_acc + t_seg
        # budget clip
        if not _param_within_budget(t_end, self.t_max, self.bud, self.d2):
            t_allowed = _clip_param(t_end, self.t_max, self.bud, self.d2) - self.t_acc
            q = Vec2(p.x + t_allowed * d.x, p.y + t_allowed * d.y)
            if q != p:
                self.segments.append((pi, p, q))
            self.t_acc = self.t_acc + t_allowed
            self.termination = "budget"
            return True
        # closure detection against the start point
        if self.want_closure:
            for (qi, r) in self.start_reps:
                if qi != pi or not on_segment(r, p, q):
                    continue
                t_r = (r - p).dot(d) / self.d2
                if t_r.sign() == 0 and self.t_acc.sign() == 0:
                    continue
                if t_r.sign() > 0 or self.t_acc.sign() > 0:
                    if r != p:
                        self.segments.append((pi, p, r))
                    self.t_acc = self.t_acc + t_r
                    self.termination = "closed"
                    self.closure_sign = 1 if d == self.d0 else -1
                    return True
        self.segments.append((pi, p, q))
        self.t_acc = t_end
        return False

    def _step_interior(self, pi: int, p: Vec2, d: Vec2) -> bool:
        s = self.s
        poly = s.polygons[pi]
        n = len(poly)
        best_t: FieldElem | None = None
        best_ei = -1
        for ei in range(n):
            nv = _inward_normal(poly, ei)
            dn = nv.dot(d)
            if dn.sign() >= 0:
                continue
            t = nv.dot(poly[ei] - p) / dn
            if t.sign() <= 0:
                continue
            if best_t is not None and (t - best_t).sign() >= 0:
                continue
            # collinear split edges share the crossing line; require the
            # crossing point to lie within this edge's extent
            q = Vec2(p.x + t * d.x, p.y + t * d.y)
            if not on_segment(q, poly[ei], poly[(ei + 1) % n]):
                continue
            best_t, best_ei = t, ei
        if best_t is None:
            raise FlowError("no exit found (degenerate polygon or direction)")
        q = Vec2(p.x + best_t * d.x, p.y + best_t * d.y)
        if self._emit(pi, p, q, d, best_t):
            return True
        return self._arrive(pi, q, d, best_ei)

    def _step_edge(self, pi: int, p: Vec2, d: Vec2, ei: int) -> bool:
        """Run along the edge (pi, ei) in direction d to the endpoint ahead."""
        s = self.s
        poly = s.polygons[pi]
        v0, v1 = poly[ei], poly[(ei + 1) % len(poly)]
        target = v1 if (v1 - v0).dot(d).sign() > 0 else v0
        g = s.gluing_of((pi, ei))
        stops = [target]
        if g.is_fold():
            m = Vec2((v0.x + v1.x) / 2, (v0.y + v1.y) / 2)
            if (m - p).dot(d).sign() > 0:
                stops.append(m)
        q = min(stops, key=lambda r: (r - p).dot(d))
        t_seg = (q - p).dot(d) / self.d2
        if t_seg.sign() <= 0:
            raise FlowError("empty edge run")
        if self._emit(pi, p, q, d, t_seg):
            return True
        return self._arrive(pi, q, d, ei)

    def _arrive(self, pi: int, q: Vec2, d: Vec2, ei: int) -> bool:
        """Classify the event point q reached on edge (pi, ei)."""
        s = self.s
        cp = s.cone_point_at(pi, q)
        if cp is not None:
            self.termination = "cone"
            self.cone_label = cp.label
            return True
        if _vertex_index(s, pi, q) is not None:
            state = self._vertex_continue(pi, q, d)
            if state is None:
                raise FlowError("no continuation at a regular vertex")
            self.state = state
            return False
        g = s.gluing_of((pi, ei))
        e = s.polygons[pi][(ei + 1) % len(s.polygons[pi])] - s.polygons[pi][ei]
        if not e.cross(d):
            # running along the edge: crossing to the glued copy continues the run
            qi, q2, d2 = self._across(g, (pi, ei), q, d)
            edges = _edges_containing(s, qi, q2)
            nei = next(
                (
                    e2
                    for e2 in edges
                    if not (
                        s.polygons[qi][(e2 + 1) % len(s.polygons[qi])]
                        - s.polygons[qi][e2]
                    ).cross(d2)
                ),
                None,
            )
            if nei is None:
                raise FlowError("edge run lost its edge after gluing")
            self.state = ("edge", qi, q2, d2, nei)
            return False
        qi, q2, d2 = self._across(g, (pi, ei), q, d)
        # post-gluing closure at the event point itself
        if self.want_closure and self.t_acc.sign() > 0:
            for (ri, r) in self.start_reps:
                if ri == qi and r == q2:
                    self.termination = "closed"
                    self.closure_sign = 1 if d2 == self.d0 else -1
                    return True
        self.state = ("interior", qi, q2, d2, None)
        return False


def trace_leaf(
    surface: Surface,
    start: tuple[int, Vec2],
    direction: Vec2,
    budget,
    mode: str = "exact",
) -> LeafTrace:
    """Trace the foliation leaf through ``start`` in ``direction``.

    ``budget`` is a length bound.  Terminates on exact cone-point hits, exact
    closure (return to the start with the same or reversed direction), or the
    budget.  Float mode never claims closure.
    """
    if mode == "float":
        return _trace_leaf_float(surface, start, direction, budget)
    if mode != "exact":
        raise FlowError(f"unknown mode {mode!r}")
    tracer = _ExactTracer(surface, direction, budget)
    tracer.start(start[0], start[1], want_closure=True)
    tracer.run()
    return LeafTrace(
        surface,
        direction,
        "exact",
        tracer.segments,
        tracer.t_acc,
        tracer.termination,
        tracer.cone_label,
        tracer.closure_sign,
    )


# ---------------------------------------------------------------------------
# float tracer


def _trace_leaf_float(surface: Surface, start, direction, budget) -> LeafTrace:
    polys = [
        [(float(v.x), float(v.y)) for v in poly] for poly in surface.polygons
    ]
    edges = []
    for pi, poly in enumerate(polys):
        n = len(poly)
        rows = []
        for ei in range(n):
            x0, y0 = poly[ei]
            x1, y1 = poly[(ei + 1) % n]
            ex, ey = x1 - x0, y1 - y0
            rows.append((x0, y0, ex, ey, -ey, ex))  # inward normal (-ey, ex)
        edges.append(rows)
    glu = {}
    for g in surface.gluings:
        tx, ty = float(g.shift.x), float(g.shift.y)
        glu[g.a] = (g.b[0], g.sign, tx, ty)
        glu[g.b] = (g.a[0], g.sign, -g.sign * tx, -g.sign * ty)
    special = []  # cone positions: (pi, x, y, label) over all reps
    for cp in surface.cone_census():
        for (pi, q) in surface.point_orbit(*cp.position):
            special.append((pi, float(q.x), float(q.y), cp.label))

    pi = start[0]
    p = start[1]
    x, y = (float(p.x), float(p.y)) if isinstance(p, Vec2) else p
    dx, dy = float(direction.x), float(direction.y)
    dlen = math.hypot(dx, dy)
    budget = float(budget)
    segments = []
    s_acc = 0.0
    termination = "budget"
    cone_label = None
    tol = FLOAT_SNAP

    for _ in range(_MAX_EVENTS):
        best_t = math.inf
        best_ei = -1
        for ei, (x0, y0, ex, ey, nx, ny) in enumerate(edges[pi]):
            dn = nx * dx + ny * dy
            if dn >= -tol * dlen:
                continue
            t = (nx * (x0 - x) + ny * (y0 - y)) / dn
            if t <= tol / dlen:
                continue
            if t < best_t:
                best_t, best_ei = t, ei
        if best_ei < 0:
            raise FlowError("float tracer found no exit")
        if s_acc + best_t * dlen >= budget:
            t_allowed = (budget - s_acc) / dlen
            segments.append((pi, (x, y), (x + t_allowed * dx, y + t_allowed * dy)))
            s_acc = budget
            break
        qx, qy = x + best_t * dx, y + best_t * dy
        segments.append((pi, (x, y), (qx, qy)))
        s_acc += best_t * dlen
        hit = next(
            (
                lab
                for (qi, cx, cy, lab) in special
                if qi == pi and abs(qx - cx) < tol and abs(qy - cy) < tol
            ),
            None,
        )
        if hit is not None:
            termination = "cone"
            cone_label = hit
            break
        qj, sign, tx, ty = glu[(pi, best_ei)]
        x, y = sign * qx + tx, sign * qy + ty
        dx, dy = sign * dx, sign * dy
        pi = qj
    return LeafTrace(
        surface, direction, "float", segments, s_acc / dlen, termination, cone_label
    )


# ---------------------------------------------------------------------------
# prongs, connections, cylinders


def enumerate_prongs(surface: Surface, direction: Vec2) -> list[tuple]:
    """Outgoing separatrix rays at all cone points in directions +-direction.

    Returns rows (cone_label, poly, point, dir); glued boundary rays are
    counted once, so a k*pi cone point yields exactly k prongs.
    """
    if direction.is_zero():
        raise FlowError("zero direction")
    out = []
    seen_rays = set()
    for cp in surface.cone_census():
        for d in (direction, -direction):
            if cp.kind == "fold-midpoint":
                (pi, ei), = cp.reps
                poly = surface.polygons[pi]
                m = cp.position[1]
                e = poly[(ei + 1) % len(poly)] - poly[ei]
                if not e.cross(d):
                    # the two rays along the folded edge are one glued prong
                    if d == direction:
                        out.append((cp.label, pi, m, d))
                elif _inward_normal(poly, ei).dot(d).sign() > 0:
                    out.append((cp.label, pi, m, d))
                continue
            for (pi, vi) in cp.reps:
                kind = _sector_contains(surface, pi, vi, d)
                if kind is None:
                    continue
                p = surface.polygons[pi][vi]
                if kind == "interior":
                    out.append((cp.label, pi, p, d))
                    continue
                n = len(surface.polygons[pi])
                ei = vi if kind == "out-edge" else (vi - 1) % n
                ray = (pi, ei, p, d)
                g = surface.gluing_of((pi, ei))
                if g.a == (pi, ei):
                    twin = (g.b[0], g.b[1], g.map_point(p), g.map_dir(d))
                else:
                    twin = (g.a[0], g.a[1], g.unmap_point(p), g.map_dir(d))
                key = min(_ray_key(ray), _ray_key(twin))
                if key in seen_rays:
                    continue
                seen_rays.add(key)
                out.append((cp.label, pi, p, d))
    return out


def _ray_key(ray) -> tuple:
    pi, ei, p, d = ray
    return (pi, ei, p.x.literal(), p.y.literal(), d.x.literal(), d.y.literal())


def _canonical_segment(surface: Surface, pi: int, a: Vec2, b: Vec2):
    """Orientation- and chart-independent key for a trace segment."""
    def seg_key(pi, a, b):
        pts = sorted(
            [(a.x.literal(), a.y.literal()), (b.x.literal(), b.y.literal())]
        )
        return (pi, tuple(pts))

    keys = [seg_key(pi, a, b)]
    for ei in _edges_containing(surface, pi, a):
        poly = surface.polygons[pi]
        v0, v1 = poly[ei], poly[(ei + 1) % len(poly)]
        if on_segment(b, v0, v1):
            g = surface.gluing_of((pi, ei))
            if g.a == (pi, ei):
                keys.append(seg_key(g.b[0], g.map_point(a), g.map_point(b)))
            if g.b == (pi, ei):
                keys.append(seg_key(g.a[0], g.unmap_point(a), g.unmap_point(b)))
    return min(keys)


def saddle_connection_search(
    surface: Surface, direction: Vec2, budget
) -> list[SaddleConnection]:
    """Trace every separatrix in +-direction; report those ending at cone points.

    Connections are deduplicated as unoriented segment sets, so a connection
    traced from both ends appears once.
    """
    found: dict[frozenset, SaddleConnection] = {}
    for label, pi, p, d in enumerate_prongs(surface, direction):
        tracer = _ExactTracer(surface, d, budget)
        tracer.start(pi, p, want_closure=False)
        tracer.run()
        if tracer.termination != "cone":
            continue
        sig = frozenset(
            _canonical_segment(surface, qi, a, b) for (qi, a, b) in tracer.segments
        )
        if sig in found:
            continue
        found[sig] = SaddleConnection(
            label, tracer.cone_label, tracer.t_acc, tracer.segments, sig
        )
    return list(found.values())


def _point_at_param(segments, d: Vec2, d2: FieldElem, t: FieldElem):
    """Locate (poly, point) at cumulative parameter t along traced segments."""
    acc = FieldElem(0)
    for (pi, a, b) in segments:
        seg_t = (b - a).dot(d) / d2
        if ((acc + seg_t) - t).sign() >= 0:
            local = t - acc
            return pi, Vec2(a.x + local * d.x, a.y + local * d.y)
        acc = acc + seg_t
    raise FlowError("parameter beyond trace end")


def _crossing_params(surface: Surface, scan: LeafTrace, targets: list) -> list[FieldElem]:
    """Exact parameters along the scan trace where it meets target segments."""
    d = scan.direction
    d2 = d.norm2()
    params: list[FieldElem] = []

    def add(t: FieldElem) -> None:
        for u in params:
            if u == t:
                return
        params.append(t)

    target_list = []
    for (pi, a, b) in targets:
        target_list.append((pi, a, b))
        for ei in _edges_containing(surface, pi, a):
            poly = surface.polygons[pi]
            v0, v1 = poly[ei], poly[(ei + 1) % len(poly)]
            if on_segment(b, v0, v1):
                g = surface.gluing_of((pi, ei))
                if g.a == (pi, ei):
                    target_list.append((g.b[0], g.map_point(a), g.map_point(b)))
                if g.b == (pi, ei):
                    target_list.append((g.a[0], g.unmap_point(a), g.unmap_point(b)))

    acc = FieldElem(0)
    for (pi, a, b) in scan.segments:
        seg_vec = b - a
        seg_t = seg_vec.dot(d) / d2
        for (qi, u, v) in target_list:
            if qi != pi:
                continue
            e = v - u
            den = seg_vec.cross(e)
            if not den:
                # parallel: overlapping collinear pieces only touch at endpoints
                for w in (u, v):
                    if on_segment(w, a, b):
                        add(acc + (w - a).dot(d) / d2)
                continue
            t = (u - a).cross(e) / den
            s_ = (u - a).cross(seg_vec) / den
            if t.sign() >= 0 and (t - 1).sign() <= 0 and s_.sign() >= 0 and (s_ - 1).sign() <= 0:
                add(acc + t * seg_t)
        acc = acc + seg_t
    params.sort()
    return params


def cylinder_decomposition(
    surface: Surface, direction: Vec2, budget
) -> tuple[list[Cylinder], list[SaddleConnection]]:
    """Cylinders of a periodic direction, with the singular leaves bounding them.

    Traces all separatrices (they must close onto cone points within budget),
    then scans along the left normal from a separatrix midpoint: the scan
    meets the singular leaves at a cyclic sequence of parameters whose gaps
    are exact cylinder widths; a closed leaf from each gap midpoint measures
    the circumference.  Stops once the cylinder areas sum to the surface area.
    """
    connections = saddle_connection_search(surface, direction, budget)
    prong_count = len(enumerate_prongs(surface, direction))
    if connections:
        # every prong must have closed onto a cone point, two traces per connection
        if 2 * len(connections) != prong_count:
            raise FlowError(
                "direction not recognized as periodic within budget "
                f"({prong_count} separatrices, {len(connections)} connections)"
            )
        targets = [seg for c in connections for seg in c.segments]
        first = connections[0].segments[0]
    else:
        if any(True for _ in surface.cone_census()):
            raise FlowError("direction not recognized as periodic within budget")
        # no cone points (flat torus): use any closed leaf as the marker
        pi = 0
        poly = surface.polygons[0]
        centroid = Vec2(
            sum((v.x for v in poly), FieldElem(0)) / len(poly),
            sum((v.y for v in poly), FieldElem(0)) / len(poly),
        )
        marker = trace_leaf(surface, (pi, centroid), direction, budget)
        if marker.termination != "closed":
            raise FlowError("direction not recognized as periodic within budget")
        targets = list(marker.segments)
        first = marker.segments[0]
    d = direction
    d2 = d.norm2()
    normal = d.perp()

    area = surface.area()
    shifts = [Fraction(1, 2), Fraction(1, 3), Fraction(2, 5), Fraction(1, 7),
              Fraction(3, 7), Fraction(2, 7), Fraction(1, 11), Fraction(5, 11)]
    last_error = None
    for shift in shifts:
        pi0, a, b = first
        start = (pi0, Vec2(a.x + (b.x - a.x) * shift, a.y + (b.y - a.y) * shift))
        try:
            return _scan_cylinders(
                surface, d, d2, normal, start, targets, connections, area, budget
            )
        except FlowError as exc:
            last_error = exc
            continue
    raise FlowError(f"cylinder scan failed: {last_error}")


def _scan_cylinders(surface, d, d2, normal, start, targets, connections, area, budget):
    scan = trace_leaf(surface, start, normal, budget, mode="exact")
    if scan.termination == "cone":
        raise FlowError("transversal scan hit a cone point; retrying shifted")
    params = _crossing_params(surface, scan, targets)
    if len(params) < 2:
        raise FlowError("transversal scan found too few singular-leaf crossings")

    n2 = normal.norm2()
    cylinders: list[Cylinder] = []
    covered = FieldElem(0)
    for i in range(len(params) - 1):
        lo, hi = params[i], params[i + 1]
        width = hi - lo
        if width.sign() <= 0:
            continue
        mid_t = (lo + hi) / 2
        qi, q = _point_at_param(scan.segments, normal, n2, mid_t)
        if any(_on_leaf(surface, cyl.core_leaf, (qi, q)) for cyl in cylinders):
            continue
        leaf = trace_leaf(surface, (qi, q), d, budget, mode="exact")
        if leaf.termination != "closed":
            raise FlowError("interior leaf failed to close within budget")
        boundary = _adjacent_connections(surface, scan, normal, n2, lo, hi, connections)
        cylinders.append(Cylinder(d, leaf.param_length, width, boundary, leaf))
        covered = covered + leaf.param_length * width * d2  # |d||n| = |d|^2
        if covered == area:
            return cylinders, connections
        if (covered - area).sign() > 0:
            raise FlowError("cylinder areas overshot the surface area")
    raise FlowError("cylinder areas did not cover the surface within the scan")


def _on_leaf(surface: Surface, leaf: LeafTrace, point) -> bool:
    qi, q = point
    for (ri, r) in surface.point_orbit(qi, q):
        for (pi, a, b) in leaf.segments:
            if pi == ri and on_segment(r, a, b):
                return True
    return False


def _adjacent_connections(surface, scan, normal, n2, lo, hi, connections):
    out = []
    for idx, c in enumerate(connections):
        for t in (lo, hi):
            qi, q = _point_at_param(scan.segments, normal, n2, t)
            hit = False
            for (ri, r) in surface.point_orbit(qi, q):
                for (pj, a, b) in c.segments:
                    if pj == ri and on_segment(r, a, b):
                        hit = True
                        break
                if hit:
                    break
            if hit and idx not in out:
                out.append(idx)
    return tuple(sorted(out))


# ---------------------------------------------------------------------------
# density


def coverage_grid(
    float_segments: list[tuple[int, float, float, float, float]],
    bbox: tuple[float, float, float, float],
    nx: int,
    ny: int,
) -> np.ndarray:
    """Boolean grid of cells touched by the segments (dense sampling).

    Samples each segment at a spacing below a third of the cell size, so a
    cell is marked whenever a segment crosses it by more than a corner clip.
    """
    x0, y0, x1, y1 = bbox
    cw = (x1 - x0) / nx
    ch = (y1 - y0) / ny
    h = min(cw, ch) / 3.0
    grid = np.zeros((nx, ny), dtype=bool)
    if not float_segments:
        return grid
    pts = []
    budgeted = 0
    for (_, ax, ay, bx, by) in float_segments:
        length = math.hypot(bx - ax, by - ay)
        k = max(2, int(length / h) + 2)
        ts = np.linspace(0.0, 1.0, k)
        pts.append(np.stack([ax + ts * (bx - ax), ay + ts * (by - ay)], axis=1))
        budgeted += k
        if budgeted > 2_000_000:  # flush in chunks to bound memory
            p = np.concatenate(pts)
            ix = np.clip(((p[:, 0] - x0) / cw).astype(np.int64), 0, nx - 1)
            iy = np.clip(((p[:, 1] - y0) / ch).astype(np.int64), 0, ny - 1)
            grid[ix, iy] = True
            pts = []
            budgeted = 0
    if pts:
        p = np.concatenate(pts)
        ix = np.clip(((p[:, 0] - x0) / cw).astype(np.int64), 0, nx - 1)
        iy = np.clip(((p[:, 1] - y0) / ch).astype(np.int64), 0, ny - 1)
        grid[ix, iy] = True
    return grid


def density_coverage(trace: LeafTrace, surface: Surface, epsilon: float,
                     grid_shape: tuple[int, int] | None = None) -> float:
    """Fraction of epsilon-cells of the fundamental domain touched by the trace."""
    if epsilon <= 0:
        raise FlowError("epsilon must be positive")
    bbox = surface.bounding_box()
    if grid_shape is None:
        nx = max(1, round((bbox[2] - bbox[0]) / epsilon))
        ny = max(1, round((bbox[3] - bbox[1]) / epsilon))
    else:
        nx, ny = grid_shape
    segs = trace.float_segments()
    if not segs:
        # a zero-length trace still occupies its start cell
        pi, (x, y) = trace.start_point()
        segs = [(pi, x, y, x, y)]
    grid = coverage_grid(segs, bbox, nx, ny)
    return float(grid.sum()) / float(nx * ny)


# ---------------------------------------------------------------------------
# output


def trace_to_csv(trace: LeafTrace, path: str) -> None:
    """Write trace segments: seg_index, poly, x0, y0, x1, y1 (+ exact literals)."""
    exact = trace.mode == "exact"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["seg_index", "poly", "x0", "y0", "x1", "y1"]
        if exact:
            header += ["x0e", "y0e", "x1e", "y1e"]
        w.writerow(header)
        for i, seg in enumerate(trace.segments):
            pi, a, b = seg
            if exact:
                row = [
                    i, pi,
                    f"{float(a.x):.17g}", f"{float(a.y):.17g}",
                    f"{float(b.x):.17g}", f"{float(b.y):.17g}",
                    a.x.literal(), a.y.literal(), b.x.literal(), b.y.literal(),
                ]
            else:
                row = [
                    i, pi,
                    f"{a[0]:.17g}", f"{a[1]:.17g}", f"{b[0]:.17g}", f"{b[1]:.17g}",
                ]
            w.writerow(row)
