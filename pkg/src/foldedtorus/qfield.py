"""Exact arithmetic in the real quadratic field Q(sqrt3).

Scalars are ``a + b*sqrt(3)`` with rational ``a``, ``b`` kept as
:class:`fractions.Fraction` (arbitrary precision, always reduced, positive
denominators -- the Fraction invariants).  All geometric predicates in the
package reduce to exact sign computations here.

The module also provides exact 2-vectors and 2x2 matrices over the field,
and eigen-direction extraction for hyperbolic integer matrices whose
eigenvalues stay inside Q(sqrt3).
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from functools import total_ordering

_SQRT3 = math.sqrt(3.0)

_Rat = int | Fraction


@total_ordering
class FieldElem:
    """An exact element ``a + b*sqrt(3)`` of Q(sqrt3)."""

    __slots__ = ("a", "b", "_shadow")

    def __init__(self, a: _Rat | FieldElem = 0, b: _Rat = 0) -> None:
        if isinstance(a, FieldElem):
            if b:
                raise TypeError("cannot combine FieldElem with extra sqrt3 part")
            self.a: Fraction = a.a
            self.b: Fraction = a.b
        else:
            self.a = a if isinstance(a, Fraction) else Fraction(a)
            self.b = b if isinstance(b, Fraction) else Fraction(b)
        self._shadow: float | None = None

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def sqrt3() -> FieldElem:
        return FieldElem(0, 1)

    @staticmethod
    def coerce(x: _Rat | FieldElem) -> FieldElem:
        return x if isinstance(x, FieldElem) else FieldElem(x)

    # -- basic protocol -------------------------------------------------------

    def __repr__(self) -> str:
        return f"FieldElem({self.a!r}, {self.b!r})"

    def __str__(self) -> str:
        return self.literal()

    def __hash__(self) -> int:
        return hash((self.a, self.b))

    def __bool__(self) -> bool:
        return bool(self.a) or bool(self.b)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, FieldElem):
            return self.a == other.a and self.b == other.b
        if isinstance(other, (int, Fraction)):
            return self.b == 0 and self.a == other
        return NotImplemented

    def __lt__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction, FieldElem)):
            return (self - other).sign() < 0
        return NotImplemented

    # -- ring operations -------------------------------------------------------

    def __add__(self, other: _Rat | FieldElem) -> FieldElem:
        if isinstance(other, FieldElem):
            return FieldElem(self.a + other.a, self.b + other.b)
        if isinstance(other, (int, Fraction)):
            return FieldElem(self.a + other, self.b)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self) -> FieldElem:
        return FieldElem(-self.a, -self.b)

    def __sub__(self, other: _Rat | FieldElem) -> FieldElem:
        return self + (-other if isinstance(other, FieldElem) else FieldElem(-Fraction(other)))

    def __rsub__(self, other: _Rat | FieldElem) -> FieldElem:
        return (-self) + other

    def __mul__(self, other: _Rat | FieldElem) -> FieldElem:
        if isinstance(other, FieldElem):
            return FieldElem(
                self.a * other.a + 3 * self.b * other.b,
                self.a * other.b + self.b * other.a,
            )
        if isinstance(other, (int, Fraction)):
            return FieldElem(self.a * other, self.b * other)
        return NotImplemented

    __rmul__ = __mul__

    def inverse(self) -> FieldElem:
        n = self.a * self.a - 3 * self.b * self.b  # field norm, 0 iff self == 0
        if not n:
            raise ZeroDivisionError("division by zero in Q(sqrt3)")
        return FieldElem(self.a / n, -self.b / n)

    def __truediv__(self, other: _Rat | FieldElem) -> FieldElem:
        if isinstance(other, (int, Fraction)):
            if not other:
                raise ZeroDivisionError("division by zero in Q(sqrt3)")
            return FieldElem(self.a / other, self.b / other)
        if isinstance(other, FieldElem):
            return self * other.inverse()
        return NotImplemented

    def __rtruediv__(self, other: _Rat | FieldElem) -> FieldElem:
        return self.inverse() * other

    def __pow__(self, n: int) -> FieldElem:
        if n < 0:
            return self.inverse() ** (-n)
        out = FieldElem(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def conjugate(self) -> FieldElem:
        """Galois conjugate a - b*sqrt(3)."""
        return FieldElem(self.a, -self.b)

    # -- predicates and conversions ---------------------------------------------

    def sign(self) -> int:
        """Exact sign of the real value, in {-1, 0, +1}."""
        sa = (self.a > 0) - (self.a < 0)
        sb = (self.b > 0) - (self.b < 0)
        if sb == 0:
            return sa
        if sa == 0 or sa == sb:
            return sb
        # mixed signs: compare a^2 with 3 b^2; value sign follows the larger term
        cmp = self.a * self.a - 3 * self.b * self.b
        if cmp > 0:
            return sa
        if cmp < 0:
            return sb
        return 0

    def is_rational(self) -> bool:
        return self.b == 0

    def is_integer(self) -> bool:
        return self.b == 0 and self.a.denominator == 1

    def __float__(self) -> float:
        return self.shadow

    @property
    def shadow(self) -> float:
        """Double-precision approximation, cached; for filtering and output only."""
        s = self._shadow
        if s is None:
            s = float(self.a) + float(self.b) * _SQRT3
            self._shadow = s
        return s

    def __abs__(self) -> FieldElem:
        return -self if self.sign() < 0 else self

    def floor(self) -> int:
        """Exact floor, using the shadow as a seed and exact comparisons to settle."""
        n = math.floor(self.shadow)
        while self - n < 0:
            n -= 1
        while self - (n + 1) >= 0:
            n += 1
        return n

    def sqrt(self) -> FieldElem | None:
        """Exact square root if it exists inside Q(sqrt3), else None."""
        if self.sign() < 0:
            return None
        if self.b == 0:
            r = _rational_sqrt(self.a)
            if r is not None:
                return FieldElem(r)
            q = _rational_sqrt(self.a / 3)
            return None if q is None else FieldElem(0, q)
        # (u + v*sqrt3)^2 = u^2+3v^2 + 2uv*sqrt3: solve u^2+3v^2=a, 2uv=b.
        d = _rational_sqrt(self.a * self.a - 3 * self.b * self.b)
        if d is None:
            return None
        for u2 in ((self.a + d) / 2, (self.a - d) / 2):
            u = _rational_sqrt(u2)
            if u is not None and u != 0:
                v = self.b / (2 * u)
                cand = FieldElem(u, v)
                if cand * cand == self:
                    return abs(cand)
        return None

    # -- serialization ------------------------------------------------------------

    def literal(self) -> str:
        """Canonical literal ``p/q+r/s*rt3`` with reduced terms, sign as separator."""
        op = "-" if self.b < 0 else "+"
        return (
            f"{self.a.numerator}/{self.a.denominator}"
            f"{op}{abs(self.b.numerator)}/{self.b.denominator}*rt3"
        )


_LITERAL_RE = re.compile(
    r"^\s*(?P<a>[+-]?\d+(?:/\d+)?)\s*"
    r"(?:(?P<op>[+-])\s*(?P<b>\d+(?:/\d+)?)\s*\*\s*rt3)?\s*$"
)


def parse_field(text: str) -> FieldElem:
    """Parse a field literal: ``p/q+r/s*rt3``, or a bare rational ``p/q``."""
    m = _LITERAL_RE.match(text)
    if not m:
        raise ValueError(f"bad field literal: {text!r}")
    a = Fraction(m.group("a"))
    if m.group("b") is None:
        return FieldElem(a)
    b = Fraction(m.group("b"))
    if m.group("op") == "-":
        b = -b
    return FieldElem(a, b)


def _rational_sqrt(q: Fraction) -> Fraction | None:
    if q < 0:
        return None
    n = math.isqrt(q.numerator)
    d = math.isqrt(q.denominator)
    if n * n == q.numerator and d * d == q.denominator:
        return Fraction(n, d)
    return None


ZERO = FieldElem(0)
ONE = FieldElem(1)
SQRT3 = FieldElem(0, 1)
HALF = FieldElem(Fraction(1, 2))


class Vec2:
    """Exact 2-vector / point over Q(sqrt3)."""

    __slots__ = ("x", "y")

    def __init__(self, x: _Rat | FieldElem, y: _Rat | FieldElem) -> None:
        self.x = FieldElem.coerce(x)
        self.y = FieldElem.coerce(y)

    def __repr__(self) -> str:
        return f"Vec2({self.x}, {self.y})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vec2) and self.x == other.x and self.y == other.y

    def __hash__(self) -> int:
        return hash((self.x, self.y))

    def __add__(self, other: Vec2) -> Vec2:
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: Vec2) -> Vec2:
        return Vec2(self.x - other.x, self.y - other.y)

    def __neg__(self) -> Vec2:
        return Vec2(-self.x, -self.y)

    def __mul__(self, s: _Rat | FieldElem) -> Vec2:
        return Vec2(self.x * s, self.y * s)

    __rmul__ = __mul__

    def dot(self, other: Vec2) -> FieldElem:
        return self.x * other.x + self.y * other.y

    def cross(self, other: Vec2) -> FieldElem:
        return self.x * other.y - self.y * other.x

    def norm2(self) -> FieldElem:
        return self.dot(self)

    def norm_exact(self) -> FieldElem | None:
        """|v| when it lies in Q(sqrt3), else None."""
        return self.norm2().sqrt()

    def is_zero(self) -> bool:
        return not self.x and not self.y

    def is_parallel(self, other: Vec2) -> bool:
        return not self.cross(other)

    def perp(self) -> Vec2:
        """Left-hand normal (rotation by +90 degrees)."""
        return Vec2(-self.y, self.x)

    def floats(self) -> tuple[float, float]:
        return (float(self.x), float(self.y))

    def literal(self) -> str:
        return f"{self.x.literal()},{self.y.literal()}"


def parse_vec(text: str) -> Vec2:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"bad vector literal: {text!r}")
    return Vec2(parse_field(parts[0]), parse_field(parts[1]))


Point = Vec2


class Mat2:
    """Exact 2x2 matrix over Q(sqrt3)."""

    __slots__ = ("a", "b", "c", "d")

    def __init__(
        self,
        a: _Rat | FieldElem,
        b: _Rat | FieldElem,
        c: _Rat | FieldElem,
        d: _Rat | FieldElem,
    ) -> None:
        self.a = FieldElem.coerce(a)
        self.b = FieldElem.coerce(b)
        self.c = FieldElem.coerce(c)
        self.d = FieldElem.coerce(d)

    @staticmethod
    def identity() -> Mat2:
        return Mat2(1, 0, 0, 1)

    def __repr__(self) -> str:
        return f"Mat2[[{self.a}, {self.b}], [{self.c}, {self.d}]]"

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Mat2)
            and self.a == other.a
            and self.b == other.b
            and self.c == other.c
            and self.d == other.d
        )

    def __hash__(self) -> int:
        return hash((self.a, self.b, self.c, self.d))

    def __neg__(self) -> Mat2:
        return Mat2(-self.a, -self.b, -self.c, -self.d)

    def __mul__(self, other: Mat2) -> Mat2:
        return Mat2(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def apply(self, v: Vec2) -> Vec2:
        return Vec2(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)

    def det(self) -> FieldElem:
        return self.a * self.d - self.b * self.c

    def trace(self) -> FieldElem:
        return self.a + self.d

    def inverse(self) -> Mat2:
        det = self.det()
        if not det:
            raise ZeroDivisionError("singular matrix")
        return Mat2(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def __pow__(self, n: int) -> Mat2:
        if n < 0:
            return self.inverse() ** (-n)
        out = Mat2.identity()
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def is_integer(self) -> bool:
        return all(e.is_integer() for e in (self.a, self.b, self.c, self.d))

    def entries(self) -> tuple[FieldElem, FieldElem, FieldElem, FieldElem]:
        return (self.a, self.b, self.c, self.d)


class ProjMat2:
    """A Mat2 considered up to global sign (image in PGL(2))."""

    __slots__ = ("rep",)

    def __init__(self, m: Mat2) -> None:
        self.rep = _sign_normalized(m)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, ProjMat2):
            return self.rep == other.rep
        if isinstance(other, Mat2):
            return self.rep == _sign_normalized(other)
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.rep)

    def __mul__(self, other: ProjMat2) -> ProjMat2:
        return ProjMat2(self.rep * other.rep)

    def __repr__(self) -> str:
        return f"+-{self.rep!r}"


def _sign_normalized(m: Mat2) -> Mat2:
    for e in m.entries():
        s = e.sign()
        if s < 0:
            return -m
        if s > 0:
            return m
    return m


def eigen_directions(m: Mat2) -> tuple[FieldElem, Vec2, FieldElem, Vec2]:
    """Exact eigenpairs (lam_plus, v_plus, lam_minus, v_minus) of an integer matrix.

    Requires a hyperbolic matrix whose eigenvalues lie in Q(sqrt3): the
    discriminant of the characteristic polynomial must be k^2 or 3k^2.
    Returns lam_plus with the larger absolute value; eigenvectors are scaled
    to the smallest integral form with positive leading coefficient.
    """
    if not m.is_integer():
        raise ValueError("eigen_directions requires integer entries")
    tr = m.trace()
    det = m.det()
    disc = tr * tr - 4 * det
    s = disc.sign()
    if s <= 0:
        raise ValueError("no hyperbolic eigenbasis (elliptic or parabolic matrix)")
    root = disc.sqrt()
    if root is None:
        raise ValueError("eigenvalues lie outside Q(sqrt3): discriminant "
                         f"{disc} is not k^2 or 3k^2")
    lam_p = (tr + root) / 2
    lam_m = (tr - root) / 2
    if abs(lam_m) > abs(lam_p):
        lam_p, lam_m = lam_m, lam_p

    def eigvec(lam: FieldElem) -> Vec2:
        # rows of (m - lam I) are proportional; a kernel vector is any
        # nonzero choice of (b, lam-a) or (lam-d, c)
        v = Vec2(m.b, lam - m.a)
        if v.is_zero():
            v = Vec2(lam - m.d, m.c)
        if v.is_zero():
            raise ValueError("degenerate eigenvector")
        return _canonical_direction(v)

    return lam_p, eigvec(lam_p), lam_m, eigvec(lam_m)


def _canonical_direction(v: Vec2) -> Vec2:
    """Scale a direction to its smallest integral representative.

    Clears denominators, divides out integer content, compares with the
    sqrt3-associate, and fixes the sign so the first nonzero coordinate has a
    positive leading coefficient.
    """
    def integral(v: Vec2) -> Vec2:
        dens = [v.x.a.denominator, v.x.b.denominator, v.y.a.denominator, v.y.b.denominator]
        lcm = math.lcm(*dens)
        v = v * lcm
        nums = [abs(n) for n in
                (v.x.a.numerator, v.x.b.numerator, v.y.a.numerator, v.y.b.numerator)
                if n]
        g = math.gcd(*nums) if nums else 1
        return v * Fraction(1, g) if g > 1 else v

    def height(v: Vec2) -> Fraction:
        return max(abs(v.x.a), abs(v.x.b), abs(v.y.a), abs(v.y.b))

    cand = integral(v)
    assoc = integral(cand * SQRT3)
    if height(assoc) < height(cand):
        cand = assoc
    first = cand.x if cand.x else cand.y
    if first.sign() < 0:
        cand = -cand
    return cand
