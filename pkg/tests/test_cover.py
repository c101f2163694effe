import math
from fractions import Fraction

import pytest

from foldedtorus.qfield import FieldElem, SQRT3, Vec2
from foldedtorus.autos import parse_word
from foldedtorus.cover import (
    CONTRACTION_RATIO,
    CoverError,
    CoverPoint,
    contraction_sequence,
    cover_point,
    deviation_experiment,
    deviation_series,
    leaf_parameter,
    lift_trace,
    lifted_eval,
    plane_density,
    project_point,
    project_trace,
    slit_location,
)
from foldedtorus.flow import trace_leaf
from foldedtorus.surface import folded_torus


def fe(a, b=0):
    return FieldElem(Fraction(a), Fraction(b))


def v(x, y):
    return Vec2(fe(x), fe(y))


T = folded_torus()
EXPANDING = Vec2(SQRT3, fe(1))
CONTRACTING = Vec2(SQRT3, fe(-1))
WORD = parse_word("vHv")
WORD4 = parse_word("(vHv)^4")


def cp(x, y, tag=None):
    return cover_point(fe(x) if not isinstance(x, FieldElem) else x,
                       fe(y) if not isinstance(y, FieldElem) else y, tag)


class TestCoverPoints:
    def test_slit_classification(self):
        assert slit_location(fe(0), fe(0))[0] == "center"
        assert slit_location(fe(Fraction(1, 2)), fe(1))[0] == "interior"
        assert slit_location(fe(2), fe(-1))[0] == "endpoint"
        assert slit_location(fe(Fraction(3, 2)), fe(0))[0] == "gap"
        assert slit_location(fe(0), fe(Fraction(1, 2))) is None

    def test_tag_required_on_slits(self):
        with pytest.raises(CoverError):
            cp(0, 0)
        with pytest.raises(CoverError):
            cp(Fraction(1, 2), 2)

    def test_tag_rejected_off_slits(self):
        with pytest.raises(CoverError):
            cp(Fraction(3, 2), 0, "+")

    def test_shore_fold_normalization(self):
        # (-1/2, 0)+ and (1/2, 0)+ are the same folded point
        assert cp(Fraction(-1, 2), 0, "+") == cp(Fraction(1, 2), 0, "+")
        assert cp(Fraction(1, 2), 0, "+") != cp(Fraction(1, 2), 0, "-")

    def test_projection(self):
        pos = T.cone_positions()
        assert T.same_point(project_point(cp(0, 0, "+")), pos["C+"])
        assert T.same_point(project_point(cp(0, 0, "-")), pos["C-"])
        assert T.same_point(project_point(cp(3, 0, "+")), pos["C+"])
        assert T.same_point(project_point(cp(4, 2)), pos["AB"])
        assert T.same_point(
            project_point(cp(Fraction(7, 2), Fraction(5, 2))),
            (0, v(Fraction(1, 2), Fraction(1, 2))),
        )


class TestLiftTrace:
    def test_first_slit_event(self):
        # derived by manual ray continuation: from (0,0)+ along (sqrt3, 1) the
        # ray passes the gap at (sqrt3, 1) and folds at (2*sqrt3, 2) about (3,2)
        t = lift_trace(cp(0, 0, "+"), EXPANDING, 10)
        a, b, _ = t.segments[0]
        assert a == v(0, 0) and b == Vec2(SQRT3, fe(1))
        a, b, _ = t.segments[1]
        assert b == Vec2(2 * SQRT3, fe(2))
        a2, b2, _ = t.segments[2]
        assert a2 == Vec2(fe(6) - 2 * SQRT3, fe(2))
        # direction negated after the fold
        assert (b2 - a2).cross(EXPANDING).sign() == 0
        assert (b2 - a2).dot(EXPANDING).sign() < 0

    def test_reaches_first_intersection_point(self):
        # from (3,0)+ along (-sqrt3, 1): no slit event before (3/2, sqrt3/2)
        t = lift_trace(cp(3, 0, "+"), Vec2(-SQRT3, fe(1)), 4)
        a, b, _ = t.segments[0]
        assert a == v(3, 0)
        p = Vec2(fe(Fraction(3, 2)), SQRT3 / 2)
        # p lies on the first segment
        assert (p - a).cross(b - a).sign() == 0
        assert (p - a).dot(b - a).sign() > 0 and (p - b).dot(a - b).sign() > 0

    def test_horizontal_line_in_gap_strip(self):
        t = lift_trace(cp(Fraction(1, 2), Fraction(1, 2)), v(1, 0), 100)
        assert t.termination == "budget"
        assert len(t.segments) == 1

    def test_row_walk_hits_endpoint(self):
        t = lift_trace(cp(0, 0, "+"), v(1, 0), 5)
        assert t.termination == "cone"
        assert t.cone_point == cp(1, 0)
        assert t.param_length == fe(1)

    def test_row_walk_hits_center(self):
        t = lift_trace(cp(Fraction(1, 2), 0, "-"), v(-1, 0), 5)
        assert t.termination == "cone"
        assert t.cone_point == cp(0, 0, "-")

    def test_downward_start_folds_immediately(self):
        t = lift_trace(cp(Fraction(1, 2), 0, "+"), v(0, -1), Fraction(1, 2))
        assert t.termination == "budget"
        (a, b, _) = t.segments[0]
        assert a == v(Fraction(-1, 2), 0)
        assert b == v(Fraction(-1, 2), Fraction(1, 2))

    def test_pi_point_rejects_ingoing(self):
        with pytest.raises(CoverError):
            lift_trace(cp(0, 0, "+"), v(0, -1), 1)

    def test_float_mode_matches_exact(self):
        ex = lift_trace(cp(0, 0, "+"), EXPANDING, 50)
        fl = lift_trace(cp(0, 0, "+"), EXPANDING, 50, mode="float")
        exf = ex.float_segments()
        flf = fl.float_segments()
        assert len(exf) == len(flf)
        for (_, ax, ay, bx, by), (_, cx, cy, dx_, dy_) in zip(exf, flf):
            assert abs(ax - cx) < 1e-6 and abs(by - dy_) < 1e-6


class TestProjection:
    def test_round_trip_matches_trace_leaf(self):
        start_cover = cp(0, 0, "+")
        for budget in (10, 37, 100):
            up = lift_trace(start_cover, EXPANDING, budget)
            down = project_trace(up)
            ref = trace_leaf(T, (0, v(0, 0)), EXPANDING, budget)
            assert len(down.segments) == len(ref.segments)
            for (pi1, a1, b1), (pi2, a2, b2) in zip(down.segments, ref.segments):
                assert T.same_point((pi1, a1), (pi2, a2))
                assert T.same_point((pi1, b1), (pi2, b2))
            assert down.param_length == ref.param_length

    def test_row_walk_projection(self):
        up = lift_trace(cp(3, 0, "-"), v(1, 0), Fraction(1, 2))
        down = project_trace(up)
        # the lower shore projects to the top fold edge
        (pi, a, b) = down.segments[0]
        assert a.y == fe(1) and b.y == fe(1)


class TestLiftedEval:
    def test_anchor_fixed_by_word(self):
        assert lifted_eval(WORD, cp(0, 0, "+")) == cp(0, 0, "+")

    def test_marked_point_rotation(self):
        assert lifted_eval(WORD, cp(3, 0, "+")) == cp(0, 1, "+")

    def test_marked_point_cycle(self):
        pts = [cp(3, 0, "+"), cp(0, 1, "+"), cp(-3, 0, "+"), cp(0, -1, "+")]
        for i, p in enumerate(pts):
            assert lifted_eval(WORD, p) == pts[(i + 1) % 4]

    def test_fourth_power_fixes_marked_points(self):
        for p in (cp(3, 0, "+"), cp(0, 1, "+"), cp(-3, 0, "+"), cp(0, -1, "+")):
            assert lifted_eval(WORD4, p) == p

    def test_projection_commutes(self):
        from foldedtorus.autos import eval_word

        for p in (
            cp(Fraction(5, 4), Fraction(3, 4)),
            cp(Fraction(-7, 3), Fraction(5, 2)),
            cp(2, 1, "-"),
        ):
            up = lifted_eval(WORD, p)
            down = eval_word(WORD, project_point(p)[1])
            assert T.same_point(project_point(up), (0, down))

    def test_deck_equivariance_fourth_power(self):
        base = cp(Fraction(1, 3), Fraction(1, 5))
        img = lifted_eval(WORD4, base)
        for (mm, nn) in ((1, 0), (0, 1), (-1, 1), (2, -1)):
            shifted = cp(base.x + 3 * mm, base.y + nn)
            img2 = lifted_eval(WORD4, shifted)
            assert img2.x == img.x + 3 * mm
            assert img2.y == img.y + nn


class TestContraction:
    def test_ratio_constant(self):
        assert CONTRACTION_RATIO == fe(2, -1) ** 4 == fe(97, -56)

    def test_u0(self):
        steps = contraction_sequence(0)
        assert steps[0].u == -SQRT3

    def test_sequence_exact(self):
        steps = contraction_sequence(2)
        assert steps[1].u == -SQRT3 * CONTRACTION_RATIO
        assert steps[1].u == fe(168, -97)
        assert steps[2].u == -SQRT3 * CONTRACTION_RATIO ** 2
        # |u| decreases monotonically
        vals = [abs(float(s.u)) for s in steps]
        assert vals[0] > vals[1] > vals[2] > 0

    def test_leaf_parameter(self):
        assert leaf_parameter(CoverPoint(fe(Fraction(3, 2)), SQRT3 / 2)) == -SQRT3
        with pytest.raises(CoverError):
            leaf_parameter(CoverPoint(fe(0), fe(1)))


class TestDeviation:
    def test_straight_control_has_zero_deviation(self):
        t = lift_trace(cp(Fraction(1, 2), Fraction(1, 2)), v(1, 0), 50)
        series = deviation_series(t, ((0.5, 0.5), (1.0, 0.0)), 1.0)
        assert series.dist_line.max() == 0.0

    def test_first_fold_jump_value(self):
        # after the fold at (2*sqrt3, 2) the continuation point sits at
        # distance 2*sqrt3 - 3 from the launch line (manual oracle)
        rec = deviation_experiment(10.0)
        target = 2 * math.sqrt(3.0) - 3.0
        devs = [dev for (_, dev, _) in rec.line_records]
        assert any(abs(d - target) < 1e-9 for d in devs)

    def test_records_increase(self):
        rec = deviation_experiment(5e4)
        devs = [dev for (_, dev, _) in rec.line_records]
        assert all(b > a for a, b in zip(devs, devs[1:]))
        assert devs[-1] > 2.0

    def test_min_target_distance_tracks_contraction(self):
        rec = deviation_experiment(2e4, targets=((3.0, 0.0),))
        u1 = abs(float(fe(168, -97)))
        assert rec.min_target_dist[(3.0, 0.0)] <= u1 + 1e-6

    def test_series_monotone_arclength(self):
        t = lift_trace(cp(0, 0, "+"), EXPANDING, 30, mode="float")
        series = deviation_series(t, ((0.0, 0.0), (math.sqrt(3.0), 1.0)), 0.5)
        assert (series.arclength[1:] > series.arclength[:-1]).all()


class TestPlaneDensity:
    def test_horizontal_trace_single_row(self):
        t = lift_trace(cp(Fraction(1, 2), Fraction(1, 2)), v(1, 0), 10)
        cov = plane_density(t, 2.0, 1.0)
        assert cov == pytest.approx(2 / 16)

    def test_density_grows_with_budget(self):
        t1 = lift_trace(cp(0, 0, "+"), EXPANDING, 200, mode="float")
        t2 = lift_trace(cp(0, 0, "+"), EXPANDING, 3000, mode="float")
        c1 = plane_density(t1, 3.0, 0.25)
        c2 = plane_density(t2, 3.0, 0.25)
        assert c2 >= c1
        assert c2 > 0.5
