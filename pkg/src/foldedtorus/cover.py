"""The universal cover: a plane folded along horizontal slits.

The cover of the folded torus is the plane with slits ``[(3m-1, n), (3m+1, n)]``
for integers m, n, each shore folded onto itself about the slit center
``(3m, n)``.  Slit centers are cone points of angle pi, carrying a shore tag
(+ above, - below); the two endpoints of each slit are identified into one
cone point of angle 4pi.  The deck group is the lattice 3Z + Z acting by
translations.

This module traces leaf lifts (a ray hitting a slit interior continues by
the half-turn about the slit center, staying on its incoming side), lifts
the torus automorphisms by exact path lifting pinned at ``(0,0)+``, runs the
contraction iteration toward the marked point ``(3,0)+``, and measures the
deviation of long float traces from their launch line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .qfield import FieldElem, SQRT3, Vec2
from .surface import Surface, folded_torus
from .autos import Word, generators
from .flow import LeafTrace, coverage_grid

TOL = 1e-9


class CoverError(ValueError):
    pass


@dataclass(frozen=True)
class CoverPoint:
    """A point of the folded plane; ``tag`` is required on slit interiors
    and centers (+ = upper shore, - = lower), absent elsewhere."""

    x: FieldElem
    y: FieldElem
    tag: str | None = None

    def floats(self) -> tuple[float, float]:
        return (float(self.x), float(self.y))

    def __str__(self) -> str:
        t = self.tag or ""
        return f"({self.x}, {self.y}){t}"


def _nearest_center(x: FieldElem) -> tuple[int, FieldElem]:
    """Nearest slit-center multiple of 3 and the signed offset from it."""
    m = ((x + Fraction(3, 2)) / 3).floor()
    return m, x - 3 * m


def slit_location(x: FieldElem, y: FieldElem) -> tuple[str, int, int, FieldElem] | None:
    """Classify a plane position on integer lines.

    Returns (kind, m, n, offset) with kind in {"center", "interior",
    "endpoint", "gap"}, or None when y is not an integer.
    """
    if y.b != 0 or y.a.denominator != 1:
        return None
    n = int(y.a)
    m, a = _nearest_center(x)
    s = abs(a) - 1
    if s.sign() > 0:
        return ("gap", m, n, a)
    if s.sign() == 0:
        return ("endpoint", m, n, a)
    if a.sign() == 0:
        return ("center", m, n, a)
    return ("interior", m, n, a)


def cover_point(x, y, tag: str | None = None) -> CoverPoint:
    """Normalized cover point: slit points use the offset >= 0 representative."""
    x = FieldElem.coerce(x) if not isinstance(x, FieldElem) else x
    y = FieldElem.coerce(y) if not isinstance(y, FieldElem) else y
    loc = slit_location(x, y)
    if loc is None or loc[0] == "gap":
        if tag is not None:
            raise CoverError("shore tag only applies on a slit")
        return CoverPoint(x, y, None)
    kind, m, n, a = loc
    if a.sign() < 0:
        x = FieldElem(6 * m) - x  # fold the shore representative
    if kind == "endpoint":
        return CoverPoint(x, y, None)
    if tag not in ("+", "-"):
        raise CoverError(f"point ({x}, {y}) lies on a slit and needs a shore tag")
    return CoverPoint(x, y, tag)


def project_point(p: CoverPoint, surface: Surface | None = None) -> tuple[int, Vec2]:
    """Project a cover point to the canonical chart of the folded torus."""
    s = surface if surface is not None else folded_torus()
    loc = slit_location(p.x, p.y)
    if loc is None:
        k = ((p.x + 1) / 3).floor()
        j = p.y.floor()
        return s.canonical_point(0, Vec2(p.x - 3 * k, p.y - j))
    kind, m, n, a = loc
    off = p.x - 3 * m
    if kind == "gap":
        k = ((p.x + 1) / 3).floor()
        return s.canonical_point(0, Vec2(p.x - 3 * k, FieldElem(0)))
    if kind == "endpoint":
        return s.canonical_point(0, Vec2(FieldElem(1), FieldElem(0)))
    ycoord = FieldElem(0) if p.tag == "+" else FieldElem(1)
    return s.canonical_point(0, Vec2(off, ycoord))


# ---------------------------------------------------------------------------
# exact plane tracing


@dataclass
class PlaneTrace:
    """A traced leaf lift: straight plane segments between slit events."""

    direction: Vec2
    mode: str
    segments: list            # exact: (Vec2, Vec2, shore-tag-or-None for along-slit runs)
    param_length: FieldElem | float
    termination: str          # "budget" | "cone"
    cone_point: CoverPoint | None = None

    def arclength(self) -> float:
        d = self.direction
        return float(self.param_length) * math.hypot(float(d.x), float(d.y))

    def float_segments(self) -> list[tuple[int, float, float, float, float]]:
        out = []
        for a, b, _tag in self.segments:
            if isinstance(a, Vec2):
                out.append((0, float(a.x), float(a.y), float(b.x), float(b.y)))
            else:
                out.append((0, a[0], a[1], b[0], b[1]))
        return out


def lift_trace(start: CoverPoint, direction: Vec2, budget, mode: str = "exact") -> PlaneTrace:
    """Trace the leaf lift from ``start`` in ``direction`` on the folded plane.

    Hitting a slit interior at offset a from the center continues from
    offset -a with the direction negated (the half-turn about the center),
    staying on the incoming side.  Slit centers terminate at the pi point
    with the incoming-side tag; slit endpoints terminate at the 4pi point.
    """
    if direction.is_zero():
        raise CoverError("zero direction")
    if mode == "float":
        return _lift_trace_float(start, direction, budget)
    if mode != "exact":
        raise CoverError(f"unknown mode {mode!r}")

    if isinstance(budget, float):
        budget = Fraction(budget)
    bud = FieldElem.coerce(budget)
    d2 = direction.norm2()
    norm = direction.norm_exact()
    t_max = None if norm is None else bud / norm

    x, y = start.x, start.y
    dx, dy = direction.x, direction.y
    loc = slit_location(x, y)
    if loc is not None and loc[0] == "center":
        side = 1 if start.tag == "+" else -1
        if dy.sign() * side < 0:
            raise CoverError("direction is not an outgoing prong at the pi point")
    elif loc is not None and loc[0] == "interior":
        side = 1 if start.tag == "+" else -1
        if dy.sign() * side < 0:
            # leaving through the slit: the fold continues on the same shore
            x = FieldElem(6 * loc[1]) - x
            dx, dy = -dx, -dy
    segments = []
    t_acc = FieldElem(0)
    termination = "budget"
    cone: CoverPoint | None = None

    def within(t: FieldElem) -> bool:
        if t_max is not None:
            return (t - t_max).sign() <= 0
        return (t * t * d2 - bud * bud).sign() <= 0

    if dy.sign() == 0:
        if slit_location(x, y) is None:
            # a horizontal line off the integer rows never meets a slit
            t_end = t_max if t_max is not None else _approx_param(bud, d2)
            end = Vec2(x + t_end * dx, y + t_end * dy)
            segments.append((Vec2(x, y), end, None))
            return PlaneTrace(direction, "exact", segments, t_end, "budget")
        return _trace_along_row(start, direction, bud, d2, t_max)

    max_events = 10_000_000
    for _ in range(max_events):
        n_next = y.floor() + 1 if dy.sign() > 0 else -((-y).floor()) - 1
        t = (FieldElem(n_next) - y) / dy
        t_new = t_acc + t
        if not within(t_new):
            t_end = (t_max if t_max is not None else _approx_param(bud, d2)) - t_acc
            if t_end.sign() > 0:
                segments.append((Vec2(x, y), Vec2(x + t_end * dx, y + t_end * dy), None))
                t_acc = t_acc + t_end
            break
        x2 = x + t * dx
        y2 = FieldElem(n_next)
        segments.append((Vec2(x, y), Vec2(x2, y2), None))
        t_acc = t_new
        m, a = _nearest_center(x2)
        s = abs(a) - 1
        if s.sign() > 0:
            x, y = x2, y2
            continue
        if s.sign() == 0:
            termination = "cone"
            cone = cover_point(x2, y2)
            break
        if a.sign() == 0:
            termination = "cone"
            cone = cover_point(x2, y2, "+" if dy.sign() < 0 else "-")
            break
        x = FieldElem(6 * m) - x2
        y = y2
        dx, dy = -dx, -dy
    return PlaneTrace(direction, "exact", segments, t_acc, termination, cone)


def _approx_param(bud: FieldElem, d2: FieldElem) -> FieldElem:
    r = (bud * bud / d2).sqrt()
    if r is not None:
        return r
    cand = FieldElem(Fraction(float(bud) / math.sqrt(float(d2))).limit_denominator(10**12))
    while (cand * cand * d2 - bud * bud).sign() > 0:
        cand = cand - FieldElem(Fraction(1, 10**9))
    return cand


def _trace_along_row(start: CoverPoint, direction: Vec2, bud, d2, t_max) -> PlaneTrace:
    """Horizontal trace exactly on an integer row: walk to the next cone point."""
    x, y = start.x, start.y
    dx = direction.x
    sgn = dx.sign()
    tag = start.tag
    segments = []
    t_acc = FieldElem(0)
    termination = "budget"
    cone = None
    for _ in range(10_000_000):
        kind, m, n, a = slit_location(x, y)
        # next stopping point in the walk direction: slit centers and endpoints
        if kind == "gap":
            nxt = FieldElem(3 * m + 1) if sgn < 0 else FieldElem(3 * (m + 1) - 1)
            stop_kind = "endpoint"
        elif kind == "center":
            nxt = FieldElem(3 * m + sgn)
            stop_kind = "endpoint"
        elif kind == "interior":
            moving_out = (a.sign() > 0) == (sgn > 0)
            nxt = FieldElem(3 * m + sgn) if moving_out else FieldElem(3 * m)
            stop_kind = "endpoint" if moving_out else "center"
        else:
            raise CoverError("row walk started at a 4pi point")
        t_step = (nxt - x) / dx
        t_new = t_acc + t_step
        ok = (t_new - t_max).sign() <= 0 if t_max is not None else (
            (t_new * t_new * d2 - bud * bud).sign() <= 0
        )
        if not ok:
            t_end = (t_max if t_max is not None else _approx_param(bud, d2)) - t_acc
            if t_end.sign() > 0:
                segments.append((Vec2(x, y), Vec2(x + t_end * dx, y), tag))
                t_acc = t_acc + t_end
            break
        segments.append((Vec2(x, y), Vec2(nxt, y), tag))
        t_acc = t_new
        if stop_kind == "endpoint":
            termination = "cone"
            cone = cover_point(nxt, y)
            break
        termination = "cone"
        cone = cover_point(nxt, y, tag)
        break
    return PlaneTrace(direction, "exact", segments, t_acc, termination, cone)


def _lift_trace_float(start: CoverPoint, direction: Vec2, budget) -> PlaneTrace:
    x, y = start.floats()
    dx, dy = float(direction.x), float(direction.y)
    dlen = math.hypot(dx, dy)
    dx, dy = dx / dlen, dy / dlen
    budget = float(budget)
    if abs(dy) < TOL:
        raise CoverError("float mode requires a non-horizontal direction")
    segments = []
    s_acc = 0.0
    termination = "budget"
    cone = None
    while s_acc < budget:
        n = math.floor(y) + 1 if dy > 0 else math.ceil(y) - 1
        t = (n - y) / dy
        if s_acc + t >= budget:
            t = budget - s_acc
            segments.append(((x, y), (x + t * dx, y + t * dy), None))
            s_acc = budget
            break
        x2 = x + t * dx
        segments.append(((x, y), (x2, float(n)), None))
        s_acc += t
        k = round(x2 / 3.0)
        a = x2 - 3.0 * k
        if abs(a) < 1.0 - TOL:
            if abs(a) < TOL:
                termination = "cone"
                cone = cover_point(
                    Fraction(3 * k), Fraction(n), "+" if dy < 0 else "-"
                )
                break
            x, y = 3.0 * k - a, float(n)
            dx, dy = -dx, -dy
        elif abs(a) < 1.0 + TOL:
            termination = "cone"
            cone = cover_point(Fraction(3 * k + (1 if a > 0 else -1)), Fraction(n))
            break
        else:
            x, y = x2, float(n)
    return PlaneTrace(direction, "float", segments, s_acc, termination, cone)


# ---------------------------------------------------------------------------
# projection back to the torus


def project_trace(trace: PlaneTrace, surface: Surface | None = None) -> LeafTrace:
    """Project an exact plane trace to the folded torus, split at chart seams.

    The result matches flow.trace_leaf segment lists up to chart
    representatives (compare endpoints with Surface.same_point).
    """
    if trace.mode != "exact":
        raise CoverError("projection needs an exact trace")
    s = surface if surface is not None else folded_torus()
    out = []
    for (a, b, tag) in trace.segments:
        for (u, v, t2) in _split_at_seams(a, b, tag):
            out.append(_place_in_chart(s, u, v, t2))
    direction = trace.direction
    return LeafTrace(
        s, direction, "exact", out, trace.param_length, trace.termination,
        trace.cone_point and _cone_label(trace.cone_point), None,
    )


def _cone_label(cp: CoverPoint) -> str:
    loc = slit_location(cp.x, cp.y)
    if loc is None:
        raise CoverError("cone point off the slits")
    kind = loc[0]
    if kind == "endpoint":
        return "AB"
    return "C+" if cp.tag == "+" else "C-"


def _split_at_seams(a: Vec2, b: Vec2, tag):
    """Split a plane segment at vertical lines x = 3k+2 and rows y = n."""
    d = b - a
    cuts = [FieldElem(0), FieldElem(1)]
    if d.x.sign() != 0:
        lo, hi = sorted([a.x, b.x])
        k = ((lo - 2) / 3).floor() + 1
        while (FieldElem(3 * k + 2) - hi).sign() < 0:
            c = FieldElem(3 * k + 2)
            if (c - lo).sign() > 0:
                cuts.append((c - a.x) / d.x)
            k += 1
    if d.y.sign() != 0:
        lo, hi = sorted([a.y, b.y])
        j = lo.floor() + 1
        while (FieldElem(j) - hi).sign() < 0:
            cuts.append((FieldElem(j) - a.y) / d.y)
            j += 1
    uniq = []
    for c in sorted(cuts):
        if not uniq or uniq[-1] != c:
            uniq.append(c)
    for t0, t1 in zip(uniq, uniq[1:]):
        yield (
            Vec2(a.x + t0 * d.x, a.y + t0 * d.y),
            Vec2(a.x + t1 * d.x, a.y + t1 * d.y),
            tag,
        )


def _place_in_chart(s: Surface, u: Vec2, v: Vec2, tag) -> tuple[int, Vec2, Vec2]:
    mid = Vec2((u.x + v.x) / 2, (u.y + v.y) / 2)
    if tag is not None:
        # an along-slit run projects to the fold edge of its shore
        n = mid.y.floor() if mid.y.a.denominator == 1 and mid.y.b == 0 else None
        if n is None:
            raise CoverError("tagged run off an integer row")
        k = ((mid.x + 1) / 3).floor()
        dy = -mid.y if tag == "+" else FieldElem(1) - mid.y
        dxs = FieldElem(-3 * k)
        return (0, Vec2(u.x + dxs, u.y + dy), Vec2(v.x + dxs, v.y + dy))
    k = ((mid.x + 1) / 3).floor()
    j = mid.y.floor()
    return (0, Vec2(u.x - 3 * k, u.y - j), Vec2(v.x - 3 * k, v.y - j))


# ---------------------------------------------------------------------------
# lifted automorphisms by exact path development


_ANCHOR = CoverPoint(FieldElem(0), FieldElem(0), "+")
# Each generator is lifted so that it fixes the lifts of the leaves it fixes
# downstairs: the horizontal twist fixes the slit rows (anchor (0,0)+ stays
# put), and the vertical twist fixes the column x = 1 through the 4pi point,
# which forces (0,0)+ -> (0,1)-.  Both germs develop the chart by the
# identity frame.
_PIN_FRAMES = {"h": (0, 0), "v": (0, 0)}


def _route(p: CoverPoint) -> list[Vec2]:
    """A slit-avoiding polygonal path from the anchor (0,0)+ to p.

    Runs through the slit-free half-integer rows and the slit-free columns
    x = 3m + 3/2; on-row targets are approached vertically (slit points from
    their tagged side).
    """
    X, Y = p.x, p.y
    half = FieldElem(Fraction(1, 2))
    nodes: list[Vec2] = [Vec2(FieldElem(0), FieldElem(0)), Vec2(FieldElem(0), half)]
    # nearest slit-free column x = 3m + 3/2
    m = ((X - Fraction(3, 2)) / 3 + Fraction(1, 2)).floor()
    g = FieldElem(3 * m) + FieldElem(Fraction(3, 2))
    loc = slit_location(X, Y)
    if loc is None:
        nodes += [Vec2(g, half), Vec2(g, Y), Vec2(X, Y)]
    else:
        side = 1 if (loc[0] in ("gap", "endpoint") or p.tag == "+") else -1
        approach = Y + FieldElem(Fraction(side, 2))
        nodes += [Vec2(g, half), Vec2(g, approach), Vec2(X, approach), Vec2(X, Y)]
    out = [nodes[0]]
    for q in nodes[1:]:
        if q != out[-1]:
            out.append(q)
    return out


def _transition(s: Surface, a_next: Vec2, b_prev: Vec2) -> tuple[int, Vec2]:
    """The gluing map m(z) = sigma*z + tau with m(a_next) = b_prev."""
    if a_next == b_prev:
        return 1, Vec2(FieldElem(0), FieldElem(0))
    from .surface import on_segment

    for g in s.gluings:
        v0, v1 = s.edge(g.a)
        if on_segment(a_next, v0, v1) and g.map_point(a_next) == b_prev:
            return g.sign, g.shift
        w0, w1 = s.edge(g.b)
        if on_segment(a_next, w0, w1) and g.unmap_point(a_next) == b_prev:
            return g.sign, Vec2(-g.sign * g.shift.x, -g.sign * g.shift.y)
    raise CoverError(f"no gluing carries {a_next} to {b_prev}")


def _lift_letter(name: str, exp: int, p: CoverPoint) -> CoverPoint:
    """The lift of one generator (pinned at (0,0)+) applied to p.

    Projects a slit-avoiding anchor path to chart chords, pushes them through
    the generator's affine pieces, and develops the image chain back into the
    plane with a running frame z -> s*z + lam; junctions between chart
    representatives update the frame through the corresponding gluing, which
    reproduces the folding of the cover exactly.
    """
    s = folded_torus()
    gen = generators()[name]
    # the inverse twist moves the pi points the same way, so the pin frame
    # is shared between exponents
    lx, ly = _PIN_FRAMES[name]
    if p == _ANCHOR:
        if name == "v":
            return CoverPoint(FieldElem(0), FieldElem(1), "-")
        return CoverPoint(FieldElem(0), FieldElem(0), "+")

    # chart chords of the anchor path
    chart_pieces: list[tuple[Vec2, Vec2]] = []
    nodes = _route(p)
    for a, b in zip(nodes, nodes[1:]):
        for (u, v, _tag) in _split_at_seams(a, b, None):
            _, cu, cv = _place_in_chart(s, u, v, None)
            chart_pieces.append((cu, cv))

    # exact image chain under the generator
    from .autos import _push_segment

    image_chain: list[tuple[Vec2, Vec2]] = []
    for (u, v) in chart_pieces:
        image_chain.extend(_push_segment(gen, exp, u, v))

    # develop the image chain from the pinned frame.  Frames are sections
    # z -> z + lam of the projection; crossing a fold-glued junction composes
    # with the cover-side fold about the slit center, which keeps the frame a
    # translation.
    lam = Vec2(FieldElem(lx), FieldElem(ly))
    prev_end: Vec2 | None = None
    fa = fb = None
    for (a, b) in image_chain:
        if prev_end is not None and a != prev_end:
            sigma, tau = _transition(s, a, prev_end)
            if sigma == 1:
                lam = Vec2(lam.x + tau.x, lam.y + tau.y)
            else:
                j = Vec2(prev_end.x + lam.x, prev_end.y + lam.y)
                loc = slit_location(j.x, j.y)
                if loc is None or loc[0] == "gap":
                    raise CoverError("fold junction developed off the slits")
                if loc[0] != "interior":
                    raise CoverError("image path passed through a cone point")
                center = Vec2(FieldElem(3 * loc[1]), FieldElem(loc[2]))
                lam = Vec2(
                    2 * center.x - tau.x - lam.x,
                    2 * center.y - tau.y - lam.y,
                )
        fa = Vec2(a.x + lam.x, a.y + lam.y)
        fb = Vec2(b.x + lam.x, b.y + lam.y)
        prev_end = b

    loc = slit_location(fb.x, fb.y)
    if loc is not None and loc[0] in ("interior", "center"):
        side = (fa.y - fb.y).sign()
        if side == 0:
            raise CoverError("could not resolve the shore tag of the image")
        return cover_point(fb.x, fb.y, "+" if side > 0 else "-")
    return cover_point(fb.x, fb.y)


def lifted_eval(word: Word, p: CoverPoint) -> CoverPoint:
    """Apply the anchored lift of the word to a cover point.

    The letter lifts compose into some lift of the word's action; the result
    is then normalized by the deck translation that pins the anchor's image
    chain to the origin slit: the image of (0,0)+ is (0,0) with the tag of
    its image downstairs.  Under this anchoring the fourth power of the key
    word fixes every marked point (3m, n)+.
    """
    cur = p
    anchor = _ANCHOR
    for name, exp in reversed(word):
        cur = _lift_letter(name, exp, cur)
        anchor = _lift_letter(name, exp, anchor)
    return CoverPoint(cur.x - anchor.x, cur.y - anchor.y, cur.tag)


# ---------------------------------------------------------------------------
# the contraction sequence toward (3,0)+


CONTRACTION_RATIO = FieldElem(97, -56)  # (2 - sqrt3)^4


def leaf_parameter(p: CoverPoint) -> FieldElem:
    """Parameter u with p = (3,0) + u*(sqrt3,-1)/2 on the contracting leaf."""
    rel = Vec2(p.x - 3, p.y)
    d = Vec2(SQRT3 / 2, FieldElem(Fraction(-1, 2)))
    if rel.cross(d).sign() != 0:
        raise CoverError(f"point {p} is off the contracting leaf line")
    return rel.dot(d) / d.norm2()


@dataclass
class ContractionStep:
    k: int
    point: CoverPoint
    u: FieldElem


def contraction_sequence(k_max: int) -> list[ContractionStep]:
    """Iterate the fourth-power word on the first leaf intersection.

    Starts at (3/2, sqrt3/2), the intersection of the expanding leaf from
    (0,0)+ with the contracting leaf into (3,0)+, and applies the lifted
    word (vHv)^4.  The leaf parameter contracts exactly by 97 - 56*sqrt3 at
    every step; the sequence is verified against that ratio.
    """
    if k_max < 0:
        raise CoverError("k_max must be >= 0")
    from .autos import parse_word

    word = parse_word("(vHv)^4")
    p = CoverPoint(FieldElem(Fraction(3, 2)), SQRT3 / 2)
    u = leaf_parameter(p)
    out = [ContractionStep(0, p, u)]
    for k in range(1, k_max + 1):
        p = lifted_eval(word, p)
        u_next = leaf_parameter(p)
        if u_next != u * CONTRACTION_RATIO:
            raise CoverError(
                f"contraction step {k} broke the exact ratio: {u_next} vs "
                f"{u * CONTRACTION_RATIO}"
            )
        u = u_next
        out.append(ContractionStep(k, p, u))
    return out


# ---------------------------------------------------------------------------
# deviation measurements


@dataclass
class DeviationSeries:
    arclength: np.ndarray
    dist_line: np.ndarray
    dist_origin: np.ndarray


@dataclass
class DeviationRecords:
    """Running-maximum events of a float plane trace.

    ``line_records`` lists (arclength, dist_line, dist_origin) at new maxima
    of the distance from the launch line; ``origin_records`` the same at new
    maxima of the distance from the origin.
    """

    line_records: list[tuple[float, float, float]] = field(default_factory=list)
    origin_records: list[tuple[float, float, float]] = field(default_factory=list)
    min_target_dist: dict = field(default_factory=dict)
    arclength: float = 0.0
    events: int = 0

    def log_fit(self) -> tuple[float, float, float]:
        """Least squares dist_origin ~ a + b*log(arclength) over origin records."""
        pts = [(s, d0) for (s, _, d0) in self.origin_records if s > 0]
        if len(pts) < 3:
            raise CoverError("too few records for a fit")
        xs = np.log([s for s, _ in pts])
        ys = np.array([d0 for _, d0 in pts])
        b, a = np.polyfit(xs, ys, 1)
        resid = ys - (a + b * xs)
        sst = float(((ys - ys.mean()) ** 2).sum())
        r2 = 1.0 - float((resid**2).sum()) / sst if sst > 0 else 1.0
        return float(a), float(b), r2


def deviation_experiment(
    budget: float,
    start: tuple[float, float] = (0.0, 0.0),
    direction: tuple[float, float] | None = None,
    line: tuple[tuple[float, float], tuple[float, float]] | None = None,
    targets: tuple[tuple[float, float], ...] = (),
    tol: float = TOL,
) -> DeviationRecords:
    """Stream a float trace of the expanding leaf and record deviation maxima.

    Runs the slit tracer without storing segments, so budgets up to 1e7 fit
    in memory.  The reference line defaults to the launch line.
    """
    if direction is None:
        direction = (math.sqrt(3.0) / 2.0, 0.5)
    dx, dy = direction
    dlen = math.hypot(dx, dy)
    dx, dy = dx / dlen, dy / dlen
    if abs(dy) < tol:
        raise CoverError("streaming tracer requires a non-horizontal direction")
    x, y = start
    if line is None:
        line = ((x, y), (dx, dy))
    (lx, ly), (ux, uy) = line
    ulen = math.hypot(ux, uy)
    ux, uy = ux / ulen, uy / ulen

    rec = DeviationRecords()
    rec.min_target_dist = {t: math.inf for t in targets}
    best_line = -1.0
    best_origin = -1.0
    s_acc = 0.0
    events = 0
    while s_acc < budget:
        n = math.floor(y) + 1 if dy > 0 else math.ceil(y) - 1
        t = (n - y) / dy
        clipped = s_acc + t >= budget
        if clipped:
            t = budget - s_acc
        x2 = x + t * dx
        y2 = y + t * dy if clipped else float(n)
        for tgt in targets:
            px, py = tgt[0] - x, tgt[1] - y
            ex, ey = x2 - x, y2 - y
            L2 = ex * ex + ey * ey
            if L2 > 0:
                u = (px * ex + py * ey) / L2
                u = 0.0 if u < 0.0 else (1.0 if u > 1.0 else u)
                d = math.hypot(px - u * ex, py - u * ey)
            else:
                d = math.hypot(px, py)
            if d < rec.min_target_dist[tgt]:
                rec.min_target_dist[tgt] = d
        s_acc += t
        dev = abs((x2 - lx) * uy - (y2 - ly) * ux)
        d0 = math.hypot(x2, y2)
        if dev > best_line:
            best_line = dev
            rec.line_records.append((s_acc, dev, d0))
        if d0 > best_origin:
            best_origin = d0
            rec.origin_records.append((s_acc, dev, d0))
        if clipped:
            break
        events += 1
        k = round(x2 / 3.0)
        a = x2 - 3.0 * k
        if abs(a) < 1.0 - tol:
            x, y = 3.0 * k - a, y2
            dx, dy = -dx, -dy
        else:
            x, y = x2, y2
    rec.arclength = s_acc
    rec.events = events
    return rec


def deviation_series(
    trace: PlaneTrace,
    line: tuple[tuple[float, float], tuple[float, float]],
    sample_step: float,
) -> DeviationSeries:
    """Sample (arclength, dist-from-line, dist-from-origin) along a trace."""
    if sample_step <= 0:
        raise CoverError("sample_step must be positive")
    (lx, ly), (ux, uy) = line
    ulen = math.hypot(ux, uy)
    ux, uy = ux / ulen, uy / ulen
    ss, dls, dos = [], [], []
    s_base = 0.0
    next_s = 0.0
    for (_, ax, ay, bx, by) in trace.float_segments():
        seg = math.hypot(bx - ax, by - ay)
        while next_s <= s_base + seg:
            if seg == 0:
                break
            t = (next_s - s_base) / seg
            px, py = ax + t * (bx - ax), ay + t * (by - ay)
            ss.append(next_s)
            dls.append(abs((px - lx) * uy - (py - ly) * ux))
            dos.append(math.hypot(px, py))
            next_s += sample_step
        s_base += seg
    return DeviationSeries(np.array(ss), np.array(dls), np.array(dos))


def plane_density(trace: PlaneTrace, window: float, epsilon: float) -> float:
    """Fraction of epsilon-cells of [-R, R]^2 touched by the trace."""
    if window <= 0 or epsilon <= 0:
        raise CoverError("window and epsilon must be positive")
    n = max(1, round(2 * window / epsilon))
    segs = [
        (p, ax, ay, bx, by)
        for (p, ax, ay, bx, by) in trace.float_segments()
    ]
    clipped = []
    for (p, ax, ay, bx, by) in segs:
        # crude reject of segments fully outside the window
        if max(ax, bx) < -window or min(ax, bx) > window:
            continue
        if max(ay, by) < -window or min(ay, by) > window:
            continue
        clipped.append((p, ax, ay, bx, by))
    grid = coverage_grid(clipped, (-window, -window, window, window), n, n)
    return float(grid.sum()) / float(n * n)
