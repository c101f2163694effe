"""Optical model: a lattice of 90-degree-rotation-invariant mirror crosses.

A cross sits at every integer lattice point: two perpendicular mirror
segments (zero thickness, reflective on both sides).  Axis-aligned crosses
have arms along the coordinate axes with half-length ``arm``; diagonal
crosses have arms along (1,1) and (1,-1) with per-axis half-extent ``arm``
(the axis scene rotated 45 degrees and scaled by sqrt2).  An optional exact
unit ``tilt`` rotates every cross about its center; the scene stays
invariant under Z^2 translations and quarter turns about lattice points.

A ray along the bisectrix of the arms keeps at most four directions, since
the arm reflections close that set.  In the untilted scenes the fractional
offset of the crossing coordinate is conserved from bounce to bounce, so a
bisectrix ray is either trapped in one cell or never reflects at all;
tilting the crosses breaks the conservation and the ray wanders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .qfield import FieldElem, Vec2

TOL = 1e-9


class BilliardError(ValueError):
    pass


@dataclass(frozen=True)
class CrossScene:
    """Crosses of arm half-extent ``arm`` at every integer lattice point."""

    arm: FieldElem
    orientation: str = "axis"          # "axis" or "diagonal"
    tilt: Vec2 | None = None           # unit direction of one arm, overrides orientation

    def __post_init__(self):
        if self.arm.sign() <= 0 or (self.arm - Fraction(1, 2)).sign() >= 0:
            raise BilliardError("arm half-length must lie in (0, 1/2)")
        if self.orientation not in ("axis", "diagonal"):
            raise BilliardError(f"unknown orientation {self.orientation!r}")
        if self.tilt is not None and self.tilt.norm2() != FieldElem(1):
            raise BilliardError("tilt must be a unit vector over the field")

    def arm_directions(self) -> tuple[Vec2, Vec2]:
        if self.tilt is not None:
            u = self.tilt
        elif self.orientation == "axis":
            u = Vec2(FieldElem(1), FieldElem(0))
        else:
            u = Vec2(FieldElem(1), FieldElem(1))
        return u, u.perp()

    def arms_at(self, i: int, j: int) -> list[tuple[Vec2, Vec2]]:
        """The two mirror segments of the cross at (i, j)."""
        c = Vec2(FieldElem(i), FieldElem(j))
        out = []
        for u in self.arm_directions():
            off = Vec2(u.x * self.arm, u.y * self.arm)
            out.append((Vec2(c.x - off.x, c.y - off.y), Vec2(c.x + off.x, c.y + off.y)))
        return out

    def bisectrix(self) -> Vec2:
        u, w = self.arm_directions()
        return Vec2(u.x + w.x, u.y + w.y)


@dataclass
class RayTrace:
    segments: list[tuple[Vec2, Vec2]]
    bounces: int
    termination: str                   # "budget" | "hit_arm_endpoint" | "hit_cross_center"

    def arclength(self) -> float:
        return sum(
            math.hypot(float(b.x - a.x), float(b.y - a.y)) for a, b in self.segments
        )

    def float_segments(self) -> list[tuple[int, float, float, float, float]]:
        return [
            (0, float(a.x), float(a.y), float(b.x), float(b.y))
            for a, b in self.segments
        ]

    def direction_set(self) -> set[tuple[float, float]]:
        out = set()
        for a, b in self.segments:
            dx, dy = float(b.x - a.x), float(b.y - a.y)
            n = math.hypot(dx, dy)
            if n > 0:
                out.add((round(dx / n, 9), round(dy / n, 9)))
        return out


def build_cross_scene(arm, orientation: str = "axis", tilt: Vec2 | None = None) -> CrossScene:
    if isinstance(arm, float):
        arm = Fraction(arm).limit_denominator(10**9)
    return CrossScene(FieldElem.coerce(arm), orientation, tilt)


def _reflect(d: Vec2, mirror: Vec2) -> Vec2:
    """Specular reflection of direction d about the mirror direction."""
    m2 = mirror.norm2()
    s = d.dot(mirror)
    return Vec2(
        (2 * s * mirror.x - d.x * m2) / m2,
        (2 * s * mirror.y - d.y * m2) / m2,
    )


def trace_ray(scene: CrossScene, start: Vec2, direction: Vec2, max_bounces: int) -> RayTrace:
    """Trace a ray with exact specular reflections off the cross arms.

    Stops after ``max_bounces`` reflections, at an exact arm endpoint, or at
    a cross center.  The untilted scenes use integer-line event stepping; a
    tilted scene walks lattice cells and intersects nearby arm segments.
    """
    if direction.is_zero():
        raise BilliardError("zero direction")
    if scene.tilt is None and scene.orientation == "axis":
        if direction.x.sign() != 0 and direction.y.sign() != 0:
            return _trace_grid(scene.arm, start, direction, max_bounces, diagonal=False)
    if scene.tilt is None and scene.orientation == "diagonal":
        u = direction.x + direction.y
        w = direction.x - direction.y
        if u.sign() != 0 and w.sign() != 0:
            return _trace_grid(scene.arm, start, direction, max_bounces, diagonal=True)
    return _trace_cells(scene, start, direction, max_bounces)


def _next_int(x: FieldElem, positive: bool) -> int:
    return x.floor() + 1 if positive else -((-x).floor()) - 1


def _trace_grid(arm, start: Vec2, direction: Vec2, max_bounces: int, diagonal: bool) -> RayTrace:
    """Event stepping for untilted scenes.

    Axis arms live on the integer grid lines; diagonal arms live on the
    lines x+y = const and x-y = const with centers on the same-parity
    sublattice, which is the axis picture in rotated coordinates.
    """
    if diagonal:
        # rotated coordinates (u, w) = (x+y, x-y); arms have half-extent 2*arm
        p = Vec2(start.x + start.y, start.x - start.y)
        d = Vec2(direction.x + direction.y, direction.x - direction.y)
        reach = 2 * arm
        parity = 2
    else:
        p, d = start, direction
        reach = arm
        parity = 1

    segments: list[tuple[Vec2, Vec2]] = []
    bounces = 0
    termination = "budget"

    def unrot(v: Vec2) -> Vec2:
        if not diagonal:
            return v
        return Vec2((v.x + v.y) / 2, (v.x - v.y) / 2)

    x, y = p.x, p.y
    dx, dy = d.x, d.y
    while bounces < max_bounces:
        nx = _next_int(x, dx.sign() > 0)
        ny = _next_int(y, dy.sign() > 0)
        tx = (FieldElem(nx) - x) / dx
        ty = (FieldElem(ny) - y) / dy
        hit_vertical = (tx - ty).sign() <= 0   # crossing x = nx first
        t = tx if hit_vertical else ty
        qx, qy = x + t * dx, y + t * dy
        segments.append((unrot(Vec2(x, y)), unrot(Vec2(qx, qy))))
        # distance from the free coordinate to the nearest arm center on the line
        level, other = (nx, qy) if hit_vertical else (ny, qx)
        if parity == 1:
            center = FieldElem((other + Fraction(1, 2)).floor())
        else:
            # diagonal arm centers sit on the same-parity sublattice
            k = ((other - level) / 2 + Fraction(1, 2)).floor()
            center = FieldElem(level + 2 * k)
        dist = abs(other - center)
        rel = dist - reach
        if rel.sign() > 0:
            x, y = qx, qy
            continue
        if rel.sign() == 0:
            termination = "hit_arm_endpoint"
            break
        if dist.sign() == 0:
            termination = "hit_cross_center"
            break
        if hit_vertical:
            dx = -dx
        else:
            dy = -dy
        x, y = qx, qy
        bounces += 1
    return RayTrace(segments, bounces, termination)


def _trace_cells(scene: CrossScene, start: Vec2, direction: Vec2, max_bounces: int) -> RayTrace:
    """Generic tracer: walk lattice cells, intersect arms of nearby crosses."""
    p = start
    d = direction
    segments: list[tuple[Vec2, Vec2]] = []
    bounces = 0
    fd = math.hypot(float(d.x), float(d.y))
    while bounces < max_bounces:
        fx, fy = float(p.x), float(p.y)
        fdx, fdy = float(d.x) / fd, float(d.y) / fd
        found = None
        step = 0.0
        while found is None and step < 1000.0:
            cx = fx + (step + 0.5) * fdx
            cy = fy + (step + 0.5) * fdy
            best = None
            for i in range(math.floor(cx) - 1, math.floor(cx) + 3):
                for j in range(math.floor(cy) - 1, math.floor(cy) + 3):
                    for (a, b) in scene.arms_at(i, j):
                        got = _ray_segment(p, d, a, b)
                        if got is None:
                            continue
                        t, q, off = got
                        if best is None or (t - best[0]).sign() < 0:
                            best = (t, q, off, Vec2(b.x - a.x, b.y - a.y))
                    # center hits belong to both arms; handled via off == 0
            if best is not None and float(best[0]) * fd <= step + 1.5:
                found = best
            else:
                step += 1.0
        if found is None:
            return RayTrace(segments, bounces, "budget")
        t, q, off, mirror = found
        segments.append((p, q))
        if off.sign() == 0:
            return RayTrace(segments, bounces, "hit_cross_center")
        if (abs(off) - FieldElem(1)).sign() == 0:
            return RayTrace(segments, bounces, "hit_arm_endpoint")
        d = _reflect(d, mirror)
        p = q
        bounces += 1
    return RayTrace(segments, bounces, "budget")


def _ray_segment(p: Vec2, d: Vec2, a: Vec2, b: Vec2):
    """Exact first hit of ray p + t d with segment [a, b], t > 0.

    The returned offset is the hit parameter relative to the midpoint,
    scaled so the endpoints are at +-1.
    """
    e = Vec2(b.x - a.x, b.y - a.y)
    den = d.cross(e)
    if not den:
        return None
    ap = Vec2(a.x - p.x, a.y - p.y)
    t = ap.cross(e) / den
    s = ap.cross(d) / den
    if t.sign() <= 0:
        return None
    if s.sign() < 0 or (s - 1).sign() > 0:
        return None
    q = Vec2(p.x + t * d.x, p.y + t * d.y)
    return t, q, 2 * s - 1


def record_deviations(trace: RayTrace) -> list[tuple[float, float]]:
    """(arclength, distance-from-launch-line) at running maxima."""
    segs = trace.float_segments()
    if not segs:
        return []
    _, x0, y0, x1, y1 = segs[0]
    ux, uy = x1 - x0, y1 - y0
    n = math.hypot(ux, uy)
    ux, uy = ux / n, uy / n
    out = []
    best = -1.0
    s = 0.0
    for (_, ax, ay, bx, by) in segs:
        s += math.hypot(bx - ax, by - ay)
        dev = abs((bx - x0) * uy - (by - y0) * ux)
        if dev > best:
            best = dev
            out.append((s, dev))
    return out
