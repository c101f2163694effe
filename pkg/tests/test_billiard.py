import math
from fractions import Fraction

import pytest

from foldedtorus.qfield import FieldElem, SQRT3, Vec2
from foldedtorus.billiard import (
    BilliardError,
    build_cross_scene,
    record_deviations,
    trace_ray,
)


def fe(a, b=0):
    return FieldElem(Fraction(a), Fraction(b))


def v(x, y):
    return Vec2(fe(x), fe(y))


class TestScene:
    def test_valid_default(self):
        s = build_cross_scene(Fraction(1, 4))
        assert s.orientation == "axis"
        assert float(s.arm) == 0.25

    def test_arm_out_of_range(self):
        with pytest.raises(BilliardError):
            build_cross_scene(Fraction(1, 2))
        with pytest.raises(BilliardError):
            build_cross_scene(0)

    def test_diagonal_is_rotated_axis(self):
        s = build_cross_scene(Fraction(1, 4), "diagonal")
        (a1, b1), (a2, b2) = s.arms_at(0, 0)
        assert (b1 - a1).cross(v(1, 1)) == fe(0)
        assert (b2 - a2).cross(v(1, -1)) == fe(0)

    def test_bisectrix(self):
        assert build_cross_scene(Fraction(1, 4)).bisectrix() == v(1, 1)
        assert build_cross_scene(Fraction(1, 4), "diagonal").bisectrix() == v(0, 2)


class TestSpecularLaw:
    def test_horizontal_arm_reflects_vertically(self):
        s = build_cross_scene(Fraction(1, 4))
        # direction (1,1) hitting the horizontal arm of the cross at (1,1)
        t = trace_ray(s, v(Fraction(9, 10), 0), v(1, 1), 1)
        assert t.bounces == 1
        a, b = t.segments[1]
        d = b - a
        assert d.x.sign() > 0 and d.y.sign() < 0  # (1,1) -> (1,-1)

    def test_vertical_arm_reflects_horizontally(self):
        s = build_cross_scene(Fraction(1, 4))
        t = trace_ray(s, v(0, Fraction(9, 10)), v(1, 1), 1)
        assert t.bounces == 1
        a, b = t.segments[1]
        d = b - a
        assert d.x.sign() < 0 and d.y.sign() > 0  # (1,1) -> (-1,1)

    def test_endpoint_hit_terminates(self):
        s = build_cross_scene(Fraction(1, 4))
        # aim exactly at the arm endpoint (3/4, 1) of the cross at (1,1)
        t = trace_ray(s, v(Fraction(3, 4), 0), v(0, 1), 5)
        assert t.termination == "hit_arm_endpoint"

    def test_center_hit_terminates(self):
        s = build_cross_scene(Fraction(1, 4))
        t = trace_ray(s, v(1, Fraction(1, 2)), v(0, 1), 5)
        assert t.termination == "hit_cross_center"

    def test_missing_ray_goes_straight(self):
        s = build_cross_scene(Fraction(1, 4))
        # offset conservation: a (1,1) ray whose offset exceeds the arm never hits
        t = trace_ray(s, v(Fraction(1, 2), Fraction(1, 10)), v(1, 1), 10)
        assert t.bounces == 0
        assert t.termination == "budget"

    def test_zero_direction(self):
        s = build_cross_scene(Fraction(1, 4))
        with pytest.raises(BilliardError):
            trace_ray(s, v(0, 0), v(0, 0), 1)


class TestBisectrixRay:
    def test_at_most_four_directions_long_run(self):
        s = build_cross_scene(Fraction(1, 4))
        t = trace_ray(s, v(Fraction(1, 7), Fraction(1, 13)), v(1, 1), 12000)
        assert t.bounces >= 10000
        assert len(t.direction_set()) <= 4

    def test_time_reversibility(self):
        s = build_cross_scene(Fraction(1, 4))
        fwd = trace_ray(s, v(Fraction(1, 7), Fraction(1, 13)), v(1, 1), 50)
        a, b = fwd.segments[-1]
        back = trace_ray(s, b, Vec2(a.x - b.x, a.y - b.y), 50)
        fwd_pts = [(p, q) for p, q in fwd.segments]
        back_pts = [(q, p) for p, q in reversed(back.segments)]
        assert fwd_pts == back_pts

    def test_lattice_equivariance(self):
        s = build_cross_scene(Fraction(1, 4))
        t1 = trace_ray(s, v(Fraction(1, 7), Fraction(1, 13)), v(1, 1), 100)
        t2 = trace_ray(s, v(Fraction(1, 7) + 2, Fraction(1, 13) - 3), v(1, 1), 100)
        assert len(t1.segments) == len(t2.segments)
        for (a1, b1), (a2, b2) in zip(t1.segments, t2.segments):
            assert a2 == Vec2(a1.x + 2, a1.y - 3)
            assert b2 == Vec2(b1.x + 2, b1.y - 3)

    def test_diagonal_scene_four_directions(self):
        s = build_cross_scene(Fraction(1, 4), "diagonal")
        t = trace_ray(s, v(Fraction(1, 7), Fraction(1, 13)), v(1, 0), 5000)
        assert len(t.direction_set()) <= 4


class TestTiltedScene:
    def test_tilted_ray_wanders(self):
        # arms rotated by 30 degrees: cos, sin = (sqrt3/2, 1/2) stays exact
        tilt = Vec2(SQRT3 / 2, fe(Fraction(1, 2)))
        s = build_cross_scene(Fraction(1, 4), tilt=tilt)
        t = trace_ray(s, v(Fraction(1, 9), Fraction(1, 23)), s.bisectrix(), 600)
        assert t.bounces >= 500
        assert len(t.direction_set()) <= 4
        recs = record_deviations(t)
        assert len(recs) >= 5
        # records keep growing well past the first bounce scale
        assert recs[-1][1] > 4 * recs[0][1]
        assert recs[-1][1] > 1.0

    def test_untilted_ray_is_trapped(self):
        s = build_cross_scene(Fraction(1, 4))
        t = trace_ray(s, v(Fraction(1, 7), Fraction(1, 13)), v(1, 1), 2000)
        recs = record_deviations(t)
        # bounded deviation: the offset conservation confines the ray
        assert recs[-1][1] < 2.0
