"""Affine automorphisms of the folded torus: twists, words, homology action.

Two generators act on the canonical folded torus:

* ``h`` -- the horizontal twist ``(x, y) -> (x + 3y mod 3, y)``, fixing the
  singular horizontal leaf pointwise; derivative +-[[1,3],[0,1]].
* ``v`` -- the vertical twist: a full twist of the short vertical cylinder
  (x in [1,2]) and a half twist of the long one, glued continuously along
  the three singular vertical leaves and fixing the leaves through the 4pi
  point pointwise; derivative +-[[1,0],[1,1]].  It swaps the two pi points.

Both are stored as explicit affine pieces (convex chart regions with maps
``z -> A z + s``), so words evaluate exactly and polygonal chains push
forward exactly by clipping against piece regions.  The homology action is
computed constructively: push loop representatives of the two basis classes
through the word and read off signed crossing counts against transversal
reference loops, with the orientation convention e1.e2 = +1.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .qfield import FieldElem, Mat2, ProjMat2, Vec2
from .surface import Surface, convex_contains, folded_torus

Word = tuple[tuple[str, int], ...]


class AutosError(ValueError):
    pass


@dataclass(frozen=True)
class AffinePiece:
    region: tuple[Vec2, ...]   # convex ccw polygon in the chart
    linear: Mat2
    shift: Vec2

    def contains(self, p: Vec2) -> bool:
        return convex_contains(self.region, p)

    def map_point(self, p: Vec2) -> Vec2:
        q = self.linear.apply(p)
        return Vec2(q.x + self.shift.x, q.y + self.shift.y)


class Generator:
    """A piecewise-affine automorphism of the folded torus."""

    def __init__(self, name: str, surface: Surface, pieces: list[AffinePiece]):
        self.name = name
        self.surface = surface
        self.pieces = pieces
        self.inverse_pieces = [
            AffinePiece(
                tuple(pc.map_point(v) for v in pc.region),
                pc.linear.inverse(),
                -pc.linear.inverse().apply(pc.shift),
            )
            for pc in pieces
        ]
        self.derivative = ProjMat2(pieces[0].linear)

    def _pieces(self, exp: int) -> list[AffinePiece]:
        return self.pieces if exp == 1 else self.inverse_pieces

    def apply(self, p: Vec2, exp: int = 1) -> Vec2:
        """Exact image of a surface point, as the canonical chart representative."""
        for (qi, q) in self.surface.point_orbit(0, p):
            for pc in self._pieces(exp):
                if pc.contains(q):
                    return self.surface.canonical_point(0, pc.map_point(q))[1]
        raise AutosError(f"point {p} not covered by pieces of {self.name}^{exp}")

    def check(self) -> None:
        """Validate piece cover, continuity, and gluing compatibility."""
        s = self.surface
        total = FieldElem(0)
        base = self.pieces[0].linear
        for pc in self.pieces:
            acc = FieldElem(0)
            n = len(pc.region)
            for i in range(n):
                acc = acc + pc.region[i].cross(pc.region[(i + 1) % n])
            total = total + acc / 2
            if pc.linear != base and pc.linear != -base:
                raise AutosError(f"{self.name}: piece linear parts differ beyond sign")
            for v in pc.region:
                if not s.contains(0, pc.map_point(v)):
                    raise AutosError(f"{self.name}: piece image leaves the chart")
        if total != s.area():
            raise AutosError(f"{self.name}: piece areas sum to {total}, not the area")

        # continuity across piece boundaries: affine maps agreeing at the two
        # endpoints of a shared edge agree along it
        for i, pa in enumerate(self.pieces):
            for pb in self.pieces[i + 1:]:
                for v in pa.region:
                    if pb.contains(v):
                        if not s.same_point((0, pa.map_point(v)), (0, pb.map_point(v))):
                            raise AutosError(
                                f"{self.name}: pieces disagree at {v}"
                            )

        # compatibility with the surface gluings
        for g in s.gluings:
            v0, v1 = s.edge(g.a)
            for t in (Fraction(1, 3), Fraction(1, 2), Fraction(3, 4)):
                p = Vec2(v0.x + (v1.x - v0.x) * t, v0.y + (v1.y - v0.y) * t)
                q = g.map_point(p)
                if not s.same_point((0, self.apply(p)), (0, self.apply(q))):
                    raise AutosError(
                        f"{self.name}: images of glued points {p} ~ {q} differ"
                    )


def _v2(x, y) -> Vec2:
    return Vec2(FieldElem.coerce(Fraction(x)), FieldElem.coerce(Fraction(y)))


def build_generators(surface: Surface | None = None) -> dict[str, Generator]:
    """The horizontal and vertical twist generators on the folded torus."""
    s = surface if surface is not None else folded_torus()
    H = Mat2(1, 3, 0, 1)
    S = Mat2(1, 0, 1, 1)
    zero = FieldElem(0)

    gen_h = Generator(
        "h",
        s,
        [
            # x + 3y <= 2: image stays in the chart
            AffinePiece((_v2(-1, 0), _v2(2, 0), _v2(-1, 1)), H, Vec2(zero, zero)),
            # x + 3y >= 2: reduce by the lattice vector (3, 0)
            AffinePiece(
                (_v2(2, 0), _v2(2, 1), _v2(1, 1), _v2(-1, 1)), H, _v2(-3, 0)
            ),
        ],
    )

    gen_v = Generator(
        "v",
        s,
        [
            # x + y <= 0
            AffinePiece((_v2(-1, 0), _v2(0, 0), _v2(-1, 1)), S, _v2(0, 1)),
            # 0 <= x + y <= 1: the long cylinder's half twist reverses sign here
            AffinePiece(
                (_v2(0, 0), _v2(1, 0), _v2(0, 1), _v2(-1, 1)), -S, _v2(0, 1)
            ),
            # 1 <= x + y <= 2
            AffinePiece(
                (_v2(1, 0), _v2(2, 0), _v2(1, 1), _v2(0, 1)), S, _v2(0, -1)
            ),
            # x + y >= 2
            AffinePiece((_v2(2, 0), _v2(2, 1), _v2(1, 1)), S, _v2(0, -2)),
        ],
    )
    return {"h": gen_h, "v": gen_v}


# ---------------------------------------------------------------------------
# words


_WORD_TOKEN = re.compile(r"\s*(?:([hHvV])|(\()|(\))|(\^)(-?\d+))")


def parse_word(text: str) -> Word:
    """Parse a word like ``(vHv)^4`` over h, v with uppercase = inverse.

    The word acts right-to-left: ``vHv`` maps x to v(H(v(x))).
    """
    pos = 0
    stack: list[list[tuple[str, int]]] = [[]]
    prev_group: list[tuple[str, int]] | None = None

    def flush_power(k: int) -> None:
        nonlocal prev_group
        if prev_group is None:
            raise AutosError("exponent with nothing to repeat")
        stack[-1] = stack[-1][: len(stack[-1]) - len(prev_group)]
        if k < 0:
            rep = _invert(tuple(prev_group))
            k = -k
        else:
            rep = tuple(prev_group)
        stack[-1].extend(rep * k)
        prev_group = None

    while pos < len(text):
        m = _WORD_TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise AutosError(f"bad word syntax at {text[pos:]!r}")
            break
        pos = m.end()
        letter, open_, close, caret, num = m.groups()
        if letter:
            item = (letter.lower(), 1 if letter.islower() else -1)
            stack[-1].append(item)
            prev_group = [item]
        elif open_:
            stack.append([])
            prev_group = None
        elif close:
            if len(stack) < 2:
                raise AutosError("unbalanced parentheses")
            group = stack.pop()
            stack[-1].extend(group)
            prev_group = group
        else:
            flush_power(int(num))
    if len(stack) != 1:
        raise AutosError("unbalanced parentheses")
    return reduce_word(tuple(stack[0]))


def reduce_word(word: Word) -> Word:
    out: list[tuple[str, int]] = []
    for item in word:
        if out and out[-1][0] == item[0] and out[-1][1] == -item[1]:
            out.pop()
        else:
            out.append(item)
    return tuple(out)


def _invert(word: Word) -> Word:
    return tuple((name, -exp) for name, exp in reversed(word))


def word_inverse(word: Word) -> Word:
    return reduce_word(_invert(word))


def word_str(word: Word) -> str:
    return "".join(n if e == 1 else n.upper() for n, e in word) or "1"


# ---------------------------------------------------------------------------
# evaluation


_GENS: dict[str, Generator] | None = None


def generators() -> dict[str, Generator]:
    global _GENS
    if _GENS is None:
        _GENS = build_generators()
    return _GENS


def eval_word(word: Word, p: Vec2) -> Vec2:
    """Apply the word to a surface point, rightmost letter first; exact."""
    gens = generators()
    q = p
    for name, exp in reversed(word):
        q = gens[name].apply(q, exp)
    return q


def derivative(word: Word) -> ProjMat2:
    """Linear part of the word in PSL(2,Z): the product of +-generator derivatives."""
    mats = {"h": Mat2(1, 3, 0, 1), "v": Mat2(1, 0, 1, 1)}
    out = Mat2.identity()
    for name, exp in word:
        out = out * (mats[name] ** exp)
    return ProjMat2(out)


def cone_point_permutation(word: Word) -> dict[str, str]:
    """Images of the cone points under the word, matched exactly by label."""
    s = folded_torus()
    out = {}
    for cp in s.cone_census():
        img = eval_word(word, cp.position[1])
        target = s.cone_point_at(*s.canonical_point(0, img))
        if target is None:
            raise AutosError(f"cone point {cp.label} mapped to a regular point")
        out[cp.label] = target.label
    return out


# ---------------------------------------------------------------------------
# homology action by exact chain pushing


def _push_segment(gen: Generator, exp: int, a: Vec2, b: Vec2):
    """Split [a, b] at piece boundaries and map each part; exact.

    Returns the image sub-segments ordered along the original parameter.
    The sub-intervals tile [0, 1] because the pieces cover the chart.
    """
    ab = b - a
    pieces = gen._pieces(exp)
    parts: list[tuple[FieldElem, FieldElem, AffinePiece]] = []
    one = FieldElem(1)
    for pc in pieces:
        lo, hi = FieldElem(0), one
        ok = True
        n = len(pc.region)
        for i in range(n):
            v0 = pc.region[i]
            e = pc.region[(i + 1) % n] - v0
            # inside: cross(e, p - v0) >= 0
            c0 = e.cross(a - v0)
            c1 = e.cross(ab)
            if not c1:
                if c0.sign() < 0:
                    ok = False
                    break
                continue
            t = -c0 / c1
            if c1.sign() > 0:
                if (t - lo).sign() > 0:
                    lo = t
            else:
                if (t - hi).sign() < 0:
                    hi = t
            if (lo - hi).sign() >= 0:
                ok = False
                break
        if ok and (hi - lo).sign() > 0:
            parts.append((lo, hi, pc))
    parts.sort(key=lambda row: row[0])
    out = []
    cursor = FieldElem(0)
    # consume [0,1] left to right; on piece-boundary overlaps any cover works
    # because the maps agree there
    while (cursor - one).sign() < 0:
        hit = None
        for lo, hi, pc in parts:
            if (lo - cursor).sign() <= 0 and (hi - cursor).sign() > 0:
                hit = (hi, pc)
                break
        if hit is None:
            raise AutosError("piece cover left a gap while pushing a segment")
        hi, pc = hit
        pa = Vec2(a.x + cursor * ab.x, a.y + cursor * ab.y)
        pb = Vec2(a.x + hi * ab.x, a.y + hi * ab.y)
        out.append((pc.map_point(pa), pc.map_point(pb)))
        cursor = hi
    return out


def push_chain(word: Word, chain: list[tuple[Vec2, Vec2]]) -> list[tuple[Vec2, Vec2]]:
    """Exact forward image of a polygonal chain under the word."""
    gens = generators()
    for name, exp in reversed(word):
        gen = gens[name]
        chain = [piece for (a, b) in chain for piece in _push_segment(gen, exp, a, b)]
    return chain


def _free_coordinate(used: set, low: Fraction, high: Fraction) -> FieldElem:
    span = high - low
    k = 1
    while True:
        denom = 64 * k
        for i in range(1, denom):
            cand = FieldElem(low + span * Fraction(i, denom))
            if cand not in used:
                return cand
        k += 1


def homology_class(chain: list[tuple[Vec2, Vec2]]) -> tuple[int, int]:
    """Class of a closed chain in the basis (e1, e2), e1.e2 = +1.

    e1 is the horizontal loop class, e2 the vertical loop class of the short
    cylinder.  Signed crossings are counted against a vertical reference loop
    in the short cylinder (giving the e1 coefficient) and a horizontal
    reference loop (giving the e2 coefficient), with reference coordinates
    chosen away from every chain vertex so all crossings are transversal.
    """
    used_x = {p.x for (a, b) in chain for p in (a, b)}
    used_y = {p.y for (a, b) in chain for p in (a, b)}
    x0 = _free_coordinate(used_x, Fraction(1), Fraction(2))
    y0 = _free_coordinate(used_y, Fraction(0), Fraction(1))

    p_count = 0
    q_count = 0
    for (a, b) in chain:
        sx0, sx1 = (a.x - x0).sign(), (b.x - x0).sign()
        if sx0 * sx1 < 0:
            p_count += 1 if sx1 > sx0 else -1
        sy0, sy1 = (a.y - y0).sign(), (b.y - y0).sign()
        if sy0 * sy1 < 0:
            q_count += 1 if sy1 > sy0 else -1
    return p_count, q_count


_E1_CHAIN = [(_v2(-1, Fraction(1, 2)), _v2(2, Fraction(1, 2)))]
_E2_CHAIN = [(_v2(Fraction(3, 2), 0), _v2(Fraction(3, 2), 1))]


def h1_action(word: Word) -> tuple[tuple[int, int], tuple[int, int]]:
    """Induced matrix on first homology in the basis (e1, e2), exact integers.

    Columns are the classes of the pushed basis loops; computed by crossing
    counts, independently of the derivative homomorphism.
    """
    c1 = homology_class(push_chain(word, _E1_CHAIN))
    c2 = homology_class(push_chain(word, _E2_CHAIN))
    return ((c1[0], c2[0]), (c1[1], c2[1]))


def h1_matrix_mul(m1, m2):
    return (
        (
            m1[0][0] * m2[0][0] + m1[0][1] * m2[1][0],
            m1[0][0] * m2[0][1] + m1[0][1] * m2[1][1],
        ),
        (
            m1[1][0] * m2[0][0] + m1[1][1] * m2[1][0],
            m1[1][0] * m2[0][1] + m1[1][1] * m2[1][1],
        ),
    )
