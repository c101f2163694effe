import random
from fractions import Fraction

import pytest

from foldedtorus.qfield import FieldElem, Mat2, ProjMat2, SQRT3, Vec2, eigen_directions
from foldedtorus.autos import (
    AutosError,
    build_generators,
    cone_point_permutation,
    derivative,
    eval_word,
    generators,
    h1_action,
    h1_matrix_mul,
    homology_class,
    parse_word,
    push_chain,
    reduce_word,
    word_inverse,
    word_str,
)
from foldedtorus.surface import folded_torus


def fe(a, b=0):
    return FieldElem(Fraction(a), Fraction(b))


def v(x, y):
    return Vec2(fe(x), fe(y))


T = folded_torus()
IDENT = ((1, 0), (0, 1))


def canon(p):
    return T.canonical_point(0, p)[1]


class TestWordParsing:
    def test_basic(self):
        assert parse_word("vHv") == (("v", 1), ("h", -1), ("v", 1))
        assert parse_word("(vHv)^4") == (("v", 1), ("h", -1), ("v", 1)) * 4

    def test_power_of_letter(self):
        assert parse_word("h^3") == (("h", 1),) * 3
        assert parse_word("v^-2") == (("v", -1),) * 2

    def test_free_reduction(self):
        assert parse_word("hH") == ()
        assert reduce_word((("h", 1), ("v", 1), ("v", -1), ("h", -1))) == ()

    def test_inverse(self):
        w = parse_word("vHv")
        assert word_inverse(w) == (("v", -1), ("h", 1), ("v", -1))
        assert word_str(word_inverse(w)) == "VhV"

    def test_bad_syntax(self):
        with pytest.raises(AutosError):
            parse_word("x")
        with pytest.raises(AutosError):
            parse_word("(vh")


class TestGenerators:
    def test_pieces_validate(self):
        for gen in build_generators().values():
            gen.check()

    def test_h_formula(self):
        gh = generators()["h"]
        img = gh.apply(v(Fraction(1, 2), Fraction(1, 2)))
        assert T.same_point((0, img), (0, v(2, Fraction(1, 2))))

    def test_h_fixes_singular_leaf(self):
        gh = generators()["h"]
        for x in (Fraction(-3, 4), Fraction(1, 4), Fraction(3, 2)):
            p = v(x, 0)
            assert T.same_point((0, gh.apply(p)), (0, p))

    def test_v_twist_value(self):
        gv = generators()["v"]
        img = gv.apply(v(Fraction(3, 2), Fraction(1, 2)))
        assert T.same_point((0, img), (0, v(Fraction(3, 2), 0)))

    def test_v_fixes_boundary_leaves(self):
        gv = generators()["v"]
        # the vertical leaves through the 4pi point are fixed pointwise
        for p in (v(1, Fraction(1, 3)), v(-1, Fraction(2, 7)), v(2, Fraction(1, 5))):
            assert T.same_point((0, gv.apply(p)), (0, p))

    def test_round_trip_inverse(self):
        rng = random.Random(19)
        gens = generators()
        for _ in range(25):
            p = v(
                Fraction(rng.randint(-99, 199), 100),
                Fraction(rng.randint(1, 99), 100),
            )
            for name in "hv":
                g = gens[name]
                assert T.same_point((0, g.apply(g.apply(p, 1), -1)), (0, p))

    def test_well_defined_on_glued_points(self):
        gens = generators()
        pairs = [
            (v(Fraction(1, 3), 0), v(Fraction(-1, 3), 0)),
            (v(Fraction(2, 5), 1), v(Fraction(-2, 5), 1)),
            (v(-1, Fraction(1, 3)), v(2, Fraction(1, 3))),
            (v(Fraction(3, 2), 0), v(Fraction(3, 2), 1)),
        ]
        for name in "hv":
            g = gens[name]
            for p, q in pairs:
                assert T.same_point((0, g.apply(p)), (0, g.apply(q)))


class TestEval:
    def test_empty_word_identity(self):
        p = v(Fraction(1, 3), Fraction(2, 5))
        assert eval_word((), p) == canon(p)

    def test_v_fixes_4pi_point(self):
        img = eval_word(parse_word("v"), v(1, 0))
        assert T.same_point((0, img), (0, v(1, 0)))

    def test_v_swaps_pi_points(self):
        img = eval_word(parse_word("v"), v(0, 0))
        assert T.same_point((0, img), (0, v(0, 1)))
        img2 = eval_word(parse_word("v"), v(0, 1))
        assert T.same_point((0, img2), (0, v(0, 0)))

    def test_word_inverse_round_trip(self):
        rng = random.Random(23)
        words = [parse_word(w) for w in ("vHv", "hv", "Hv^2", "vvH", "(vHv)^2")]
        for w in words:
            wi = word_inverse(w)
            for _ in range(5):
                p = v(
                    Fraction(rng.randint(-99, 199), 100),
                    Fraction(rng.randint(1, 99), 100),
                )
                assert eval_word(wi, eval_word(w, p)) == canon(p)


class TestDerivative:
    def test_generators(self):
        assert derivative(parse_word("h")) == ProjMat2(Mat2(1, 3, 0, 1))
        assert derivative(parse_word("v")) == ProjMat2(Mat2(1, 0, 1, 1))

    def test_key_word(self):
        assert derivative(parse_word("vHv")) == ProjMat2(Mat2(2, 3, 1, 2))

    def test_empty(self):
        assert derivative(()) == ProjMat2(Mat2.identity())

    def test_homomorphism_random(self):
        rng = random.Random(31)
        alphabet = "hHvV"
        for _ in range(20):
            w1 = parse_word("".join(rng.choice(alphabet) for _ in range(4)))
            w2 = parse_word("".join(rng.choice(alphabet) for _ in range(4)))
            assert derivative(reduce_word(w1 + w2)) == derivative(w1) * derivative(w2)

    def test_key_word_eigen_directions(self):
        lam_p, v_p, lam_m, v_m = eigen_directions(Mat2(2, 3, 1, 2))
        assert v_p == Vec2(SQRT3, fe(1))
        assert v_m == Vec2(SQRT3, fe(-1))
        assert lam_p == fe(2, 1) and lam_m == fe(2, -1)


class TestPermutation:
    def test_h_fixes_all(self):
        assert cone_point_permutation(parse_word("h")) == {
            "C+": "C+", "C-": "C-", "AB": "AB"
        }

    def test_v_swaps(self):
        assert cone_point_permutation(parse_word("v")) == {
            "C+": "C-", "C-": "C+", "AB": "AB"
        }

    def test_fourth_power_identity(self):
        assert cone_point_permutation(parse_word("(vHv)^4")) == {
            "C+": "C+", "C-": "C-", "AB": "AB"
        }


class TestHomology:
    def test_basis_classes(self):
        assert h1_action(()) == IDENT

    def test_generator_matrices(self):
        assert h1_action(parse_word("h")) == ((1, 1), (0, 1))
        assert h1_action(parse_word("v")) == ((1, 0), (1, 1))

    def test_key_word_rotation(self):
        assert h1_action(parse_word("vHv")) == ((0, -1), (1, 0))

    def test_fourth_power_trivial(self):
        assert h1_action(parse_word("(vHv)^4")) == IDENT

    def test_homomorphism_random(self):
        rng = random.Random(37)
        alphabet = "hHvV"
        for _ in range(8):
            w1 = parse_word("".join(rng.choice(alphabet) for _ in range(3)))
            w2 = parse_word("".join(rng.choice(alphabet) for _ in range(3)))
            lhs = h1_action(reduce_word(w1 + w2))
            rhs = h1_matrix_mul(h1_action(w1), h1_action(w2))
            assert lhs == rhs

    def test_pushed_loop_stays_closed(self):
        chain = push_chain(parse_word("vHv"), [(v(-1, Fraction(1, 2)), v(2, Fraction(1, 2)))])
        for (_, b), (a2, _) in zip(chain, chain[1:]):
            assert T.same_point((0, b), (0, a2))
        assert T.same_point((0, chain[-1][1]), (0, chain[0][0]))


class TestLeafEquivariance:
    def test_image_of_leaf_chunk_is_leaf_chunk(self):
        # a short leaf chunk inside one affine piece maps to a straight chunk
        # in the image direction given by the derivative
        w = parse_word("vHv")
        d = Vec2(SQRT3, fe(1))
        base = v(Fraction(1, 5), Fraction(1, 7))
        step = Fraction(1, 50)
        pts = [
            Vec2(base.x + d.x * FieldElem(Fraction(k) * step),
                 base.y + d.y * FieldElem(Fraction(k) * step))
            for k in range(3)
        ]
        imgs = [eval_word(w, p) for p in pts]
        u = imgs[1] - imgs[0]
        w2 = imgs[2] - imgs[1]
        assert not u.cross(w2)
        d_img = derivative(w).rep.apply(d)
        assert not u.cross(d_img)
