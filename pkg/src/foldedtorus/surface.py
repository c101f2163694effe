"""Half-translation surfaces from convex polygons with +-translation gluings.

A surface is a list of convex polygons (counterclockwise vertex loops over
Q(sqrt3)) together with edge identifications ``z -> sign*z + shift`` with
``sign`` +-1.  An edge glued to itself with sign -1 encodes a fold: the edge
is identified with itself by the half-turn about its midpoint, which creates
a cone point of angle pi there.

The module provides the folding construction (cut along a geodesic segment
and re-glue each shore to itself), an exact cone-point census, validation,
and the canonical folded torus used throughout the package: the 3x1 flat
torus folded along a horizontal segment of length 2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .qfield import FieldElem, Vec2, parse_field

EdgeRef = tuple[int, int]  # (polygon index, edge index); edge i runs vertex i -> i+1


@dataclass(frozen=True)
class Gluing:
    """Identification carrying edge ``a`` onto edge ``b`` by z -> sign*z + shift.

    ``a == b`` with sign -1 is a self-gluing (fold); its shift is twice the
    edge midpoint.
    """

    a: EdgeRef
    b: EdgeRef
    sign: int
    shift: Vec2

    def is_fold(self) -> bool:
        return self.a == self.b

    def map_point(self, p: Vec2) -> Vec2:
        return Vec2(self.sign * p.x + self.shift.x, self.sign * p.y + self.shift.y)

    def unmap_point(self, p: Vec2) -> Vec2:
        return Vec2(self.sign * (p.x - self.shift.x), self.sign * (p.y - self.shift.y))

    def map_dir(self, d: Vec2) -> Vec2:
        return d if self.sign == 1 else -d


@dataclass(frozen=True)
class ConePoint:
    """A singular point: total angle is ``halfturns * pi``."""

    label: str
    halfturns: int
    kind: str                     # "vertex" or "fold-midpoint"
    position: tuple[int, Vec2]    # canonical chart representative
    reps: tuple[tuple, ...]       # vertex corners (pi, vi) or edge refs (pi, ei)


@dataclass
class ValidationReport:
    ok: bool
    problems: list[str] = field(default_factory=list)
    euler_characteristic: int | None = None
    gauss_bonnet_halfturns: int | None = None


class SurfaceError(ValueError):
    pass


# ---------------------------------------------------------------------------
# exact plane helpers


def on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool:
    """p lies on the closed segment [a, b] (exact)."""
    ab = b - a
    ap = p - a
    if ab.cross(ap):
        return False
    t = ab.dot(ap)
    return t.sign() >= 0 and (t - ab.norm2()).sign() <= 0


def segment_param(p: Vec2, a: Vec2, b: Vec2) -> FieldElem:
    """Parameter t with p = a + t*(b-a) for a point on the segment's line."""
    ab = b - a
    return ab.dot(p - a) / ab.norm2()


def midpoint(a: Vec2, b: Vec2) -> Vec2:
    return Vec2((a.x + b.x) / 2, (a.y + b.y) / 2)


def convex_contains(poly: tuple[Vec2, ...], p: Vec2) -> bool:
    """Point in closed convex ccw polygon (exact)."""
    n = len(poly)
    for i in range(n):
        if (poly[(i + 1) % n] - poly[i]).cross(p - poly[i]).sign() < 0:
            return False
    return True


def _quadrant(re: FieldElem, im: FieldElem) -> int:
    sre, sim = re.sign(), im.sign()
    if sre > 0 and sim >= 0:
        return 0
    if sre <= 0 and sim > 0:
        return 1
    if sre < 0 and sim <= 0:
        return 2
    return 3


def angle_sum_halfturns(zs: Iterable[tuple[FieldElem, FieldElem]]) -> int | None:
    """Sum of angles arg(z) in (0, pi], as an exact multiple of pi, else None.

    Accumulates the product of the z's while tracking quadrant winding; each
    factor advances the argument by at most pi, so the winding is unambiguous.
    """
    pre, pim = FieldElem(1), FieldElem(0)
    q = 0
    quarters = 0
    for re, im in zs:
        if not re and not im:
            raise SurfaceError("zero rotation factor in angle accumulation")
        pre, pim = pre * re - pim * im, pre * im + pim * re
        nq = _quadrant(pre, pim)
        adv = (nq - q) % 4
        if adv == 3:
            raise SurfaceError("angle step exceeded pi")
        quarters += adv
        q = nq
    if pim.sign() != 0 or quarters % 2:
        return None
    return quarters // 2


# ---------------------------------------------------------------------------


class Surface:
    """Immutable polygon-and-gluing surface over Q(sqrt3).

    ``labels`` maps cone-point names to witness chart points; the census
    attaches each name to the singular point at its witness.
    """

    def __init__(
        self,
        polygons: Iterable[Iterable[Vec2]],
        gluings: Iterable[Gluing],
        labels: dict[str, tuple[int, Vec2]] | None = None,
    ) -> None:
        self.polygons: tuple[tuple[Vec2, ...], ...] = tuple(
            tuple(poly) for poly in polygons
        )
        self.gluings: tuple[Gluing, ...] = tuple(gluings)
        self.labels: dict[str, tuple[int, Vec2]] = dict(labels or {})
        self._edge_gluing: dict[EdgeRef, Gluing] = {}
        for g in self.gluings:
            self._edge_gluing[g.a] = g
            self._edge_gluing[g.b] = g
        self._census: tuple[ConePoint, ...] | None = None
        self._census_table: dict[tuple[int, Vec2], ConePoint] | None = None

    # -- basic geometry --------------------------------------------------------

    def edge(self, ref: EdgeRef) -> tuple[Vec2, Vec2]:
        pi, ei = ref
        poly = self.polygons[pi]
        return poly[ei], poly[(ei + 1) % len(poly)]

    def edge_refs(self) -> list[EdgeRef]:
        return [(pi, ei) for pi, poly in enumerate(self.polygons) for ei in range(len(poly))]

    def gluing_of(self, ref: EdgeRef) -> Gluing:
        return self._edge_gluing[ref]

    def area(self) -> FieldElem:
        total = FieldElem(0)
        for poly in self.polygons:
            acc = FieldElem(0)
            for i in range(len(poly)):
                acc = acc + poly[i].cross(poly[(i + 1) % len(poly)])
            total = total + acc
        return total / 2

    def contains(self, pi: int, p: Vec2) -> bool:
        return convex_contains(self.polygons[pi], p)

    def bounding_box(self) -> tuple[float, float, float, float]:
        xs = [float(v.x) for poly in self.polygons for v in poly]
        ys = [float(v.y) for poly in self.polygons for v in poly]
        return min(xs), min(ys), max(xs), max(ys)

    # -- point identification ----------------------------------------------------

    def point_orbit(self, pi: int, p: Vec2) -> list[tuple[int, Vec2]]:
        """All chart representatives of the surface point (pi, p)."""
        start = (pi, p)
        seen = {start}
        queue = [start]
        while queue:
            qi, q = queue.pop()
            poly = self.polygons[qi]
            n = len(poly)
            for ei in range(n):
                if not on_segment(q, poly[ei], poly[(ei + 1) % n]):
                    continue
                g = self._edge_gluing.get((qi, ei))
                if g is None:
                    continue
                reps = []
                if g.a == (qi, ei):
                    reps.append((g.b[0], g.map_point(q)))
                if g.b == (qi, ei):
                    reps.append((g.a[0], g.unmap_point(q)))
                for rep in reps:
                    if rep not in seen:
                        seen.add(rep)
                        queue.append(rep)
        return list(seen)

    def canonical_point(self, pi: int, p: Vec2) -> tuple[int, Vec2]:
        """Lexicographically smallest chart representative (exact ordering)."""
        best = (pi, p)
        for qi, q in self.point_orbit(pi, p):
            if qi < best[0] or (
                qi == best[0]
                and (q.x < best[1].x or (q.x == best[1].x and q.y < best[1].y))
            ):
                best = (qi, q)
        return best

    def same_point(self, a: tuple[int, Vec2], b: tuple[int, Vec2]) -> bool:
        return self.canonical_point(*a) == self.canonical_point(*b)

    # -- cone census --------------------------------------------------------------

    def _vertex_classes(self) -> list[list[tuple[int, int]]]:
        corners = [
            (pi, vi) for pi, poly in enumerate(self.polygons) for vi in range(len(poly))
        ]
        parent = {c: c for c in corners}

        def find(c):
            while parent[c] != c:
                parent[c] = parent[parent[c]]
                c = parent[c]
            return c

        def union(c1, c2):
            r1, r2 = find(c1), find(c2)
            if r1 != r2:
                parent[r1] = r2

        for g in self.gluings:
            (pa, ea), (pb, eb) = g.a, g.b
            na, nb = len(self.polygons[pa]), len(self.polygons[pb])
            a0, a1 = (pa, ea), (pa, (ea + 1) % na)
            b0, b1 = (pb, eb), (pb, (eb + 1) % nb)
            if g.is_fold():
                union(a0, a1)
                continue
            va0, _ = self.edge(g.a)
            vb0, _ = self.edge(g.b)
            if g.map_point(va0) == vb0:
                union(a0, b0)
                union(a1, b1)
            else:
                union(a0, b1)
                union(a1, b0)

        classes: dict[tuple, list[tuple[int, int]]] = {}
        for c in corners:
            classes.setdefault(find(c), []).append(c)
        return [sorted(v) for _, v in sorted(classes.items())]

    def _corner_angle_factor(self, pi: int, vi: int) -> tuple[FieldElem, FieldElem]:
        poly = self.polygons[pi]
        n = len(poly)
        r_out = poly[(vi + 1) % n] - poly[vi]
        r_in = poly[(vi - 1) % n] - poly[vi]
        # rotation from r_out ccw to r_in: the interior angle, in (0, pi]
        return (r_out.dot(r_in), r_out.cross(r_in))

    def cone_census(self) -> tuple[ConePoint, ...]:
        """Singular points with their exact cone angles (multiples of pi).

        Vertex classes are gluing orbits of polygon corners; only classes with
        total angle != 2pi are reported.  Every self-glued edge contributes a
        fold midpoint of angle pi.
        """
        if self._census is not None:
            return self._census

        entries: list[tuple[int, str, tuple[int, Vec2], tuple]] = []
        for members in self._vertex_classes():
            zs = [self._corner_angle_factor(pi, vi) for pi, vi in members]
            k = angle_sum_halfturns(zs)
            if k is None:
                raise SurfaceError(
                    f"vertex class {members} has total angle that is not a multiple of pi"
                )
            if k == 2:
                continue
            pi0, vi0 = members[0]
            pos = self.canonical_point(pi0, self.polygons[pi0][vi0])
            entries.append((k, "vertex", pos, tuple(members)))
        for g in self.gluings:
            if g.is_fold():
                v0, v1 = self.edge(g.a)
                entries.append((1, "fold-midpoint", (g.a[0], midpoint(v0, v1)), (g.a,)))

        census: list[ConePoint] = []
        auto = 0
        for k, kind, pos, reps in entries:
            label = None
            for name, witness in self.labels.items():
                if self.same_point(witness, pos):
                    label = name
                    break
            if label is None:
                label = f"S{auto}"
                auto += 1
            census.append(ConePoint(label, k, kind, pos, reps))
        self._census = tuple(census)
        return self._census

    def cone_point_at(self, pi: int, p: Vec2) -> ConePoint | None:
        """Census entry located at the surface point (pi, p), if any."""
        if self._census_table is None:
            table: dict[tuple[int, Vec2], ConePoint] = {}
            for cp in self.cone_census():
                for rep in self.point_orbit(*cp.position):
                    table[rep] = cp
            self._census_table = table
        return self._census_table.get((pi, p))

    def cone_positions(self) -> dict[str, tuple[int, Vec2]]:
        return {cp.label: cp.position for cp in self.cone_census()}

    # -- validation -----------------------------------------------------------------

    def validate(self) -> ValidationReport:
        problems: list[str] = []

        for pi, poly in enumerate(self.polygons):
            n = len(poly)
            if n < 3:
                problems.append(f"polygon {pi} has fewer than 3 vertices")
                continue
            for vi in range(n):
                r_out = poly[(vi + 1) % n] - poly[vi]
                r_in = poly[(vi - 1) % n] - poly[vi]
                if r_out.is_zero():
                    problems.append(f"polygon {pi} repeats vertex {vi}")
                    break
                cr = r_out.cross(r_in).sign()
                if cr < 0:
                    problems.append(f"polygon {pi} is not convex ccw at vertex {vi}")
                    break
                if cr == 0 and r_out.dot(r_in).sign() > 0:
                    problems.append(f"polygon {pi} has a zero-angle corner at vertex {vi}")
                    break

        seen: dict[EdgeRef, int] = {}
        for g in self.gluings:
            if g.sign not in (1, -1):
                problems.append(f"gluing {g} has sign outside +-1")
            if g.is_fold() and g.sign != -1:
                problems.append(f"self-gluing {g} must have sign -1")
            for ref in {g.a, g.b}:
                seen[ref] = seen.get(ref, 0) + 1
        for ref in self.edge_refs():
            count = seen.get(ref, 0)
            if count != 1:
                problems.append(f"edge {ref} appears in {count} gluings (expected 1)")
        if problems:
            return ValidationReport(False, problems)

        for g in self.gluings:
            va = self.edge(g.a)
            vb = self.edge(g.b)
            imgs = {g.map_point(va[0]), g.map_point(va[1])}
            if g.is_fold():
                if imgs != {va[0], va[1]}:
                    problems.append(f"fold {g} does not swap its edge endpoints")
            elif imgs != {vb[0], vb[1]}:
                problems.append(f"gluing {g} endpoint images mismatch")
        if problems:
            return ValidationReport(False, problems)

        try:
            census = self.cone_census()
        except SurfaceError as exc:
            return ValidationReport(False, [str(exc)])

        singular = {cp.position for cp in census if cp.kind == "vertex"}
        n_classes = len(self._vertex_classes())
        n_regular = n_classes - len(singular)
        folds = sum(1 for g in self.gluings if g.is_fold())
        v = n_classes + folds
        e = len(self.gluings)
        f = len(self.polygons)
        euler = v - e + f
        gb = (
            sum(2 - cp.halfturns for cp in census if cp.kind == "vertex")
            + folds  # each fold midpoint contributes 2 - 1
            + 0 * n_regular
        )
        if gb != 2 * euler:
            problems.append(
                f"Gauss-Bonnet mismatch: defect {gb} half-turns vs 2*chi = {2 * euler}"
            )
        return ValidationReport(not problems, problems, euler, gb)

    # -- serialization -----------------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "polygons": [
                [[v.x.literal(), v.y.literal()] for v in poly] for poly in self.polygons
            ],
            "gluings": [
                {
                    "a": list(g.a),
                    "b": list(g.b),
                    "sign": g.sign,
                    "t": [g.shift.x.literal(), g.shift.y.literal()],
                }
                for g in self.gluings
            ],
        }

    @staticmethod
    def from_json_dict(data: dict) -> Surface:
        polys = [
            [Vec2(parse_field(x), parse_field(y)) for x, y in poly]
            for poly in data["polygons"]
        ]
        gluings = [
            Gluing(
                (int(g["a"][0]), int(g["a"][1])),
                (int(g["b"][0]), int(g["b"][1])),
                int(g["sign"]),
                Vec2(parse_field(g["t"][0]), parse_field(g["t"][1])),
            )
            for g in data["gluings"]
        ]
        return Surface(polys, gluings)

    def save_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    @staticmethod
    def load_json(path: str) -> Surface:
        with open(path) as fh:
            return Surface.from_json_dict(json.load(fh))

    def structural_signature(self) -> tuple:
        """Comparison key: area, census angles, and gluing descriptors.

        Constructions equivalent up to relabeling share this signature; it is
        a structural oracle, not a full isometry test.
        """
        census = tuple(sorted(cp.halfturns for cp in self.cone_census()))
        gl = []
        for g in self.gluings:
            v0, v1 = self.edge(g.a)
            gl.append((g.sign, (v1 - v0).norm2().literal(), g.shift.norm2().literal()))
        return (
            self.area().literal(),
            census,
            len(self.polygons),
            tuple(sorted(gl)),
        )


# ---------------------------------------------------------------------------
# constructions


def build_flat_torus(
    width: FieldElem | int | Fraction,
    height: FieldElem | int | Fraction,
    origin: tuple = (0, 0),
) -> Surface:
    """Flat torus as one rectangle with opposite sides glued by translations."""
    w = FieldElem.coerce(width)
    h = FieldElem.coerce(height)
    if w.sign() <= 0 or h.sign() <= 0:
        raise SurfaceError("flat torus needs positive width and height")
    ox = FieldElem.coerce(origin[0])
    oy = FieldElem.coerce(origin[1])
    poly = [
        Vec2(ox, oy),
        Vec2(ox + w, oy),
        Vec2(ox + w, oy + h),
        Vec2(ox, oy + h),
    ]
    gluings = [
        Gluing((0, 0), (0, 2), 1, Vec2(FieldElem(0), h)),   # bottom -> top
        Gluing((0, 1), (0, 3), 1, Vec2(-w, FieldElem(0))),  # right -> left
    ]
    return Surface([poly], gluings)


def _edge_containing(surface: Surface, pi: int, a: Vec2, b: Vec2) -> int | None:
    poly = surface.polygons[pi]
    n = len(poly)
    for ei in range(n):
        v0, v1 = poly[ei], poly[(ei + 1) % n]
        if on_segment(a, v0, v1) and on_segment(b, v0, v1):
            return ei
    return None


def fold(surface: Surface, pi: int, a: Vec2, b: Vec2) -> Surface:
    """Cut along the geodesic segment [a, b] in polygon ``pi`` and fold.

    Each shore of the cut is re-glued to itself by the half-turn about its
    midpoint.  This creates two angle-pi cone points at the shore centers
    (labelled C+ on the given side, C- on the other) and merges the segment
    endpoints into one 4pi cone point (labelled AB).  Supported positions:
    a segment inside one glued polygon edge, or strictly interior to a
    polygon.  Total area is unchanged.
    """
    if a == b:
        raise SurfaceError("fold segment is degenerate")
    for cp in surface.cone_census():
        for qi, q in surface.point_orbit(*cp.position):
            if qi == pi and on_segment(q, a, b) and q != a and q != b:
                raise SurfaceError(f"fold segment passes through cone point {cp.label}")

    ei = _edge_containing(surface, pi, a, b)
    if ei is not None:
        return _fold_on_edge(surface, pi, ei, a, b)

    poly = surface.polygons[pi]
    n = len(poly)
    strictly_inside = all(
        (poly[(i + 1) % n] - poly[i]).cross(p - poly[i]).sign() > 0
        for i in range(n)
        for p in (a, b)
    )
    if not strictly_inside:
        raise SurfaceError(
            "fold segment must lie inside one edge or strictly inside a polygon"
        )
    return _fold_interior(surface, pi, a, b)


def _order_along(v0: Vec2, v1: Vec2, a: Vec2, b: Vec2) -> tuple[Vec2, Vec2]:
    if (segment_param(a, v0, v1) - segment_param(b, v0, v1)).sign() <= 0:
        return a, b
    return b, a


def _find_edge_by_endpoints(
    polys: list[list[Vec2]], candidates: Iterable[int], u: Vec2, v: Vec2
) -> EdgeRef:
    for qi in candidates:
        poly = polys[qi]
        n = len(poly)
        for ej in range(n):
            if {poly[ej], poly[(ej + 1) % n]} == {u, v}:
                return (qi, ej)
    raise SurfaceError(f"edge ({u}, {v}) not found after rebuild")


def _rebuild_with_insertions(
    surface: Surface,
    insertions: dict[EdgeRef, list[Vec2]],
    dropped: set[Gluing],
    extra: list[tuple[int, Vec2, Vec2, int, Vec2, Vec2, int]],
    labels: dict[str, tuple[int, Vec2]],
) -> Surface:
    """Insert edge points, keep all non-dropped gluings piecewise, add extras.

    ``extra`` rows are (poly_a, u_a, v_a, poly_b, u_b, v_b, sign, shift)
    flattened as (pa, ua, va, pb, ub, vb, sign, shift).
    """
    new_polys: list[list[Vec2]] = []
    for qi, poly in enumerate(surface.polygons):
        n = len(poly)
        verts: list[Vec2] = []
        for ej in range(n):
            v0, v1 = poly[ej], poly[(ej + 1) % n]
            verts.append(v0)
            pts = []
            for p in insertions.get((qi, ej), []):
                if p != v0 and p != v1 and p not in pts:
                    pts.append(p)
            pts.sort(key=lambda p: segment_param(p, v0, v1))
            verts.extend(pts)
        new_polys.append(verts)

    def subedges(qi: int, v0: Vec2, v1: Vec2) -> list[tuple[Vec2, Vec2]]:
        poly = new_polys[qi]
        n = len(poly)
        i = poly.index(v0)
        out = []
        while poly[i] != v1:
            out.append((poly[i], poly[(i + 1) % n]))
            i = (i + 1) % n
        return out

    gluings: list[Gluing] = []
    emitted: set[frozenset] = set()
    for g in surface.gluings:
        if g in dropped:
            continue
        va0, va1 = surface.edge(g.a)
        for u, v in subedges(g.a[0], va0, va1):
            ref_a = _find_edge_by_endpoints(new_polys, [g.a[0]], u, v)
            ref_b = _find_edge_by_endpoints(
                new_polys, [g.b[0]], g.map_point(u), g.map_point(v)
            )
            key = frozenset((ref_a, ref_b))
            if key in emitted:
                continue  # a subdivided fold edge enumerates each pair twice
            emitted.add(key)
            gluings.append(Gluing(ref_a, ref_b, g.sign, g.shift))

    for pa, ua, va, pb, ub, vb, sign, shift in extra:
        ref_a = _find_edge_by_endpoints(new_polys, [pa], ua, va)
        ref_b = _find_edge_by_endpoints(new_polys, [pb], ub, vb)
        gluings.append(Gluing(ref_a, ref_b, sign, shift))

    merged = dict(surface.labels)
    merged.update(labels)
    return Surface(new_polys, gluings, merged)


def _fresh_labels(surface: Surface, wanted: dict[str, tuple[int, Vec2]]) -> dict:
    out = {}
    for name, witness in wanted.items():
        candidate = name
        i = 2
        while candidate in surface.labels or candidate in out:
            candidate = f"{name}{i}"
            i += 1
        out[candidate] = witness
    return out


def _fold_on_edge(surface: Surface, pi: int, ei: int, a: Vec2, b: Vec2) -> Surface:
    g = surface.gluing_of((pi, ei))
    if g.is_fold():
        raise SurfaceError("cannot fold along an already folded edge")
    forward = g.a == (pi, ei)
    partner = g.b if forward else g.a
    pj = partner[0]
    to_partner = g.map_point if forward else g.unmap_point

    v0, v1 = surface.edge((pi, ei))
    a, b = _order_along(v0, v1, a, b)
    ia, ib = to_partner(a), to_partner(b)

    insertions: dict[EdgeRef, list[Vec2]] = {(pi, ei): [a, b]}
    insertions.setdefault(partner, []).extend([ia, ib])

    extra: list[tuple] = [
        (pi, a, b, pi, a, b, -1, Vec2(a.x + b.x, a.y + b.y)),
        (pj, ia, ib, pj, ia, ib, -1, Vec2(ia.x + ib.x, ia.y + ib.y)),
    ]
    # outer pieces of the cut edge keep the original identification
    for u, v in ((v0, a), (b, v1)):
        if u == v:
            continue
        if forward:
            extra.append((pi, u, v, pj, to_partner(u), to_partner(v), g.sign, g.shift))
        else:
            extra.append((pj, to_partner(u), to_partner(v), pi, u, v, g.sign, g.shift))

    labels = _fresh_labels(
        surface,
        {
            "C+": (pi, midpoint(a, b)),
            "C-": (pj, midpoint(ia, ib)),
            "AB": (pi, a),
        },
    )
    return _rebuild_with_insertions(surface, insertions, {g}, extra, labels)


def _fold_interior(surface: Surface, pi: int, a: Vec2, b: Vec2) -> Surface:
    """Fold along a segment strictly inside polygon ``pi`` via a chord split.

    The polygon is cut along the full chord through [a, b]; the two chord
    pieces outside the segment are re-glued by the identity translation, so
    the net cut is the segment alone.
    """
    poly = surface.polygons[pi]
    n = len(poly)
    d = b - a
    hits: list[tuple[FieldElem, Vec2, int]] = []
    for ej in range(n):
        v0, v1 = poly[ej], poly[(ej + 1) % n]
        e = v1 - v0
        den = d.cross(e)
        if not den:
            continue
        t = (v0 - a).cross(e) / den
        s = (v0 - a).cross(d) / den
        if s.sign() >= 0 and (s - 1).sign() <= 0:
            pt = Vec2(a.x + t * d.x, a.y + t * d.y)
            if not any(h[1] == pt for h in hits):
                hits.append((t, pt, ej))
    low = [h for h in hits if h[0].sign() < 0]
    high = [h for h in hits if (h[0] - 1).sign() > 0]
    if not low or not high:
        raise SurfaceError("chord through the fold segment does not reach the boundary")
    _, L, ejL = max(low, key=lambda h: h[0])
    _, R, ejR = min(high, key=lambda h: h[0])

    insertions: dict[EdgeRef, list[Vec2]] = {}
    for pt, ej in ((L, ejL), (R, ejR)):
        if pt in (poly[ej], poly[(ej + 1) % n]):
            continue
        g = surface.gluing_of((pi, ej))
        insertions.setdefault((pi, ej), []).append(pt)
        if g.a == (pi, ej):
            insertions.setdefault(g.b, []).append(g.map_point(pt))
        else:
            insertions.setdefault(g.a, []).append(g.unmap_point(pt))

    base = _rebuild_with_insertions(surface, insertions, set(), [], {})
    bpoly = list(base.polygons[pi])
    m = len(bpoly)
    iL, iR = bpoly.index(L), bpoly.index(R)

    left_walk = []
    i = iL
    while True:
        left_walk.append(bpoly[i])
        if i == iR:
            break
        i = (i + 1) % m
    right_walk = []
    i = iR
    while True:
        right_walk.append(bpoly[i])
        if i == iL:
            break
        i = (i + 1) % m

    piece_left = left_walk + [b, a]    # close with chord R -> b -> a -> L
    piece_right = right_walk + [a, b]  # close with chord L -> a -> b -> R

    new_polys = [list(p) for p in base.polygons]
    new_polys[pi] = piece_left
    new_polys.append(piece_right)
    pj = len(new_polys) - 1

    gluings: list[Gluing] = []
    for g in base.gluings:
        refs = []
        for ref in (g.a, g.b):
            if ref[0] != pi:
                refs.append(ref)
                continue
            u, v = base.edge(ref)
            refs.append(_find_edge_by_endpoints(new_polys, [pi, pj], u, v))
        gluings.append(Gluing(refs[0], refs[1], g.sign, g.shift))

    zero = FieldElem(0)
    for u, v in ((L, a), (b, R)):
        if u == v:
            continue
        ra = _find_edge_by_endpoints(new_polys, [pi], u, v)
        rb = _find_edge_by_endpoints(new_polys, [pj], u, v)
        gluings.append(Gluing(ra, rb, 1, Vec2(zero, zero)))
    shift = Vec2(a.x + b.x, a.y + b.y)
    ra = _find_edge_by_endpoints(new_polys, [pi], a, b)
    rb = _find_edge_by_endpoints(new_polys, [pj], a, b)
    gluings.append(Gluing(ra, ra, -1, shift))
    gluings.append(Gluing(rb, rb, -1, shift))

    labels = dict(surface.labels)
    labels.update(
        _fresh_labels(
            surface,
            {
                "C+": (pi, midpoint(a, b)),
                "C-": (pj, midpoint(a, b)),
                "AB": (pi, a),
            },
        )
    )
    return Surface(new_polys, gluings, labels)


_FOLDED_TORUS: Surface | None = None


def folded_torus() -> Surface:
    """The canonical folded torus: 3x1 flat torus folded along [(-1,0),(1,0)].

    Chart [-1,2]x[0,1]: left and right edges glued by (3,0); top and bottom
    glued by (0,-1) over x in [1,2]; the bottom and top edges over [-1,1] are
    each self-glued about their midpoints (0,0) and (0,1).  Cone points:
    C+ at (0,0) and C- at (0,1) (angle pi each), and the 4pi class AB at the
    fold endpoints.
    """
    global _FOLDED_TORUS
    if _FOLDED_TORUS is None:
        flat = build_flat_torus(3, 1, origin=(-1, 0))
        _FOLDED_TORUS = fold(flat, 0, Vec2(-1, 0), Vec2(1, 0))
    return _FOLDED_TORUS
