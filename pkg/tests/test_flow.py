from fractions import Fraction

import pytest

from foldedtorus.qfield import FieldElem, SQRT3, Vec2
from foldedtorus.flow import (
    FlowError,
    cylinder_decomposition,
    density_coverage,
    enumerate_prongs,
    saddle_connection_search,
    trace_leaf,
    trace_to_csv,
)
from foldedtorus.surface import build_flat_torus, folded_torus


def fe(a, b=0):
    return FieldElem(Fraction(a), Fraction(b))


def v(x, y):
    return Vec2(fe(x), fe(y))


T = folded_torus()
UP = v(0, 1)
RIGHT = v(1, 0)
EXPANDING = Vec2(SQRT3, fe(1))


class TestTraceLeaf:
    def test_vertical_closed_in_short_cylinder(self):
        t = trace_leaf(T, (0, v(Fraction(3, 2), Fraction(1, 2))), UP, 5)
        assert t.termination == "closed"
        assert t.param_length == fe(1)
        assert t.closure_sign == 1

    def test_vertical_closed_through_folds(self):
        t = trace_leaf(T, (0, v(Fraction(1, 2), Fraction(1, 2))), UP, 5)
        assert t.termination == "closed"
        assert t.param_length == fe(2)
        xs = {seg[1].x for seg in t.segments} | {seg[2].x for seg in t.segments}
        assert fe(Fraction(1, 2)) in xs and fe(Fraction(-1, 2)) in xs

    def test_separatrix_hits_other_pi_point(self):
        t = trace_leaf(T, (0, v(0, 0)), UP, 5)
        assert t.termination == "cone"
        assert t.cone_label == "C-"
        assert t.param_length == fe(1)

    def test_flat_torus_horizontal(self):
        flat = build_flat_torus(1, 1)
        t = trace_leaf(
            flat, (0, v(Fraction(1, 10), Fraction(1, 10))), RIGHT, 5
        )
        assert t.termination == "closed"
        assert t.param_length == fe(1)

    def test_horizontal_loop_length_three(self):
        t = trace_leaf(T, (0, v(Fraction(1, 2), Fraction(1, 2))), RIGHT, 5)
        assert t.termination == "closed"
        assert t.param_length == fe(3)

    def test_budget_termination(self):
        t = trace_leaf(T, (0, v(Fraction(1, 2), Fraction(1, 2))), UP, Fraction(3, 2))
        assert t.termination == "budget"
        assert t.param_length == fe(Fraction(3, 2))

    def test_zero_direction_rejected(self):
        with pytest.raises(FlowError):
            trace_leaf(T, (0, v(0, Fraction(1, 2))), v(0, 0), 1)

    def test_start_outside_rejected(self):
        with pytest.raises(FlowError):
            trace_leaf(T, (0, v(5, 5)), UP, 1)

    def test_invalid_prong_rejected(self):
        # C+ sits on the bottom edge; straight down exits the surface
        with pytest.raises(FlowError):
            trace_leaf(T, (0, v(0, 0)), v(0, -1), 1)

    def test_fold_edge_run_hits_endpoint_class(self):
        t = trace_leaf(T, (0, v(0, 0)), RIGHT, 5)
        assert t.termination == "cone"
        assert t.cone_label == "AB"
        assert t.param_length == fe(1)

    def test_expanding_direction_wanders(self):
        t = trace_leaf(T, (0, v(Fraction(1, 7), Fraction(2, 7))), EXPANDING, 40)
        assert t.termination == "budget"
        # arclength = 2 * param since |(sqrt3,1)| = 2
        assert t.arclength_exact() == t.param_length * 2

    def test_reversibility(self):
        start = (0, v(Fraction(1, 7), Fraction(2, 7)))
        fwd = trace_leaf(T, start, EXPANDING, 10)
        pi_end, last_a, end = fwd.segments[-1]
        # the final travel direction carries the fold parity; reverse that
        final_dir = EXPANDING if (end - last_a).dot(EXPANDING).sign() > 0 else -EXPANDING
        back = trace_leaf(T, (pi_end, end), -final_dir, 10)
        fwd_pts = [(pi, a, b) for pi, a, b in fwd.segments]
        back_pts = [(pi, b, a) for pi, a, b in reversed(back.segments)]
        assert fwd_pts == back_pts

    def test_segments_respect_gluing_equations(self):
        t = trace_leaf(T, (0, v(Fraction(1, 7), Fraction(2, 7))), EXPANDING, 25)
        for (p1, _, end), (p2, start, _) in zip(t.segments, t.segments[1:]):
            assert T.same_point((p1, end), (p2, start))

    def test_float_mode_matches_exact_length(self):
        start = (0, v(Fraction(1, 7), Fraction(2, 7)))
        ex = trace_leaf(T, start, EXPANDING, 20)
        fl = trace_leaf(T, start, EXPANDING, 20, mode="float")
        assert fl.termination == "budget"
        assert abs(fl.arclength() - ex.arclength()) < 1e-6
        assert len(fl.segments) == len(ex.segments)

    def test_csv_export(self, tmp_path):
        t = trace_leaf(T, (0, v(Fraction(1, 2), Fraction(1, 2))), UP, 5)
        path = tmp_path / "trace.csv"
        trace_to_csv(t, str(path))
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("seg_index,poly,x0,y0,x1,y1,x0e")
        assert len(lines) == len(t.segments) + 1


class TestProngs:
    def test_vertical_prong_count(self):
        prongs = enumerate_prongs(T, UP)
        by_label = {}
        for label, *_ in prongs:
            by_label[label] = by_label.get(label, 0) + 1
        assert by_label == {"AB": 4, "C+": 1, "C-": 1}

    def test_horizontal_prong_count(self):
        prongs = enumerate_prongs(T, RIGHT)
        by_label = {}
        for label, *_ in prongs:
            by_label[label] = by_label.get(label, 0) + 1
        assert by_label == {"AB": 4, "C+": 1, "C-": 1}


class TestConnections:
    def test_three_vertical_connections(self):
        conns = saddle_connection_search(T, UP, 3)
        assert len(conns) == 3

    def test_horizontal_connections_along_fold(self):
        conns = saddle_connection_search(T, RIGHT, 4)
        assert len(conns) == 3
        labels = sorted((c.from_label, c.to_label) for c in conns)
        assert ("C+", "AB") in labels or ("AB", "C+") in labels

    def test_expanding_direction_has_no_connections(self):
        conns = saddle_connection_search(T, EXPANDING, 100)
        assert conns == []


class TestCylinders:
    def test_horizontal_decomposition(self):
        cyls, conns = cylinder_decomposition(T, RIGHT, 10)
        assert len(cyls) == 1
        assert cyls[0].circumference() == fe(3)
        assert cyls[0].width() == fe(1)

    def test_vertical_decomposition(self):
        cyls, conns = cylinder_decomposition(T, UP, 10)
        dims = sorted((c.circumference(), c.width()) for c in cyls)
        assert dims == [(fe(1), fe(1)), (fe(2), fe(1))]
        assert len(conns) == 3

    def test_flat_torus(self):
        flat = build_flat_torus(3, 1)
        cyls, conns = cylinder_decomposition(flat, RIGHT, 10)
        assert len(cyls) == 1 and conns == []
        assert cyls[0].circumference() == fe(3)
        assert cyls[0].width() == fe(1)

    def test_areas_sum_exactly(self):
        for d in (RIGHT, UP):
            cyls, _ = cylinder_decomposition(T, d, 10)
            total = FieldElem(0)
            for c in cyls:
                total = total + c.circumference() * c.width()
            assert total == T.area()

    def test_nonperiodic_direction_rejected(self):
        with pytest.raises(FlowError):
            cylinder_decomposition(T, EXPANDING, 50)


class TestDensity:
    def test_zero_length_trace_covers_start_cell(self):
        t = trace_leaf(T, (0, v(Fraction(1, 2), Fraction(1, 2))), UP, Fraction(1, 1000))
        cov = density_coverage(t, T, 0.25)
        assert 0 < cov <= 2 / (12 * 4)

    def test_closed_horizontal_leaf_covers_one_strip(self):
        t = trace_leaf(T, (0, v(Fraction(1, 2), Fraction(1, 2))), RIGHT, 5)
        cov = density_coverage(t, T, 0.25)
        assert abs(cov - 1 / 4) < 1e-9
        assert cov < 1

    def test_expanding_leaf_covers_grid(self):
        t = trace_leaf(
            T, (0, v(Fraction(1, 7), Fraction(2, 7))), EXPANDING, 3000, mode="float"
        )
        cov = density_coverage(t, T, 1 / 8)
        assert cov > 0.95

    def test_coverage_nondecreasing_in_budget(self):
        last = 0.0
        for budget in (50, 200, 800):
            t = trace_leaf(
                T, (0, v(Fraction(1, 7), Fraction(2, 7))), EXPANDING, budget, mode="float"
            )
            cov = density_coverage(t, T, 1 / 8)
            assert cov >= last
            last = cov

    def test_bad_epsilon(self):
        t = trace_leaf(T, (0, v(Fraction(1, 2), Fraction(1, 2))), UP, 1)
        with pytest.raises(FlowError):
            density_coverage(t, T, 0)
