import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from safenav.geometry import (ConvexPolygon, DegenerateHullError, Point2,
                              Polyline, centroid, closest_point_on_polyline,
                              convex_hull, point_in_polygon, polyline_length,
                              resample_by_arclength, split_polyline)

UNIT_SQUARE = ConvexPolygon([(0, 0), (1, 0), (1, 1), (0, 1)])

# half-precision-representable coordinates keep exact-sign cross products out
# of the underflow regime
st_coord = st.floats(-100.0, 100.0, width=16)
st_point = st.tuples(st_coord, st_coord)


def brute_force_hull(points: np.ndarray) -> set[tuple[float, float]]:
    """A point is a hull vertex iff some line through it keeps all others
    strictly on one side; O(n^3) test over all point pairs."""
    pts = [tuple(p) for p in points]
    verts = set()
    n = len(pts)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            ax, ay = pts[i]
            bx, by = pts[j]
            crosses = [(bx - ax) * (py - ay) - (by - ay) * (px - ax)
                       for k, (px, py) in enumerate(pts) if k not in (i, j)]
            if all(c > 0 for c in crosses):
                verts.add(pts[i])
                verts.add(pts[j])
    return verts


class TestPoint2:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            Point2(math.nan, 0.0)

    def test_rejects_inf(self):
        with pytest.raises(ValueError):
            Point2(0.0, math.inf)

    def test_distance(self):
        assert Point2(0, 0).distance_to(Point2(3, 4)) == 5.0


class TestPolyline:
    def test_drops_consecutive_duplicates(self):
        line = Polyline([(0, 0), (0, 0), (1, 0), (1, 0), (2, 0)])
        assert len(line) == 3

    def test_rejects_single_distinct_point(self):
        with pytest.raises(ValueError):
            Polyline([(1, 1), (1, 1)])


class TestConvexHull:
    def test_interior_point_excluded(self):
        hull = convex_hull([(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5)])
        assert {tuple(v) for v in hull.vertices} == {(0, 0), (1, 0), (1, 1), (0, 1)}

    def test_collinear_raises(self):
        with pytest.raises(DegenerateHullError):
            convex_hull([(0, 0), (1, 1), (2, 2)])

    def test_too_few_points_raises(self):
        with pytest.raises(DegenerateHullError):
            convex_hull([(0, 0), (1, 1)])

    def test_ccw_and_positive_area(self):
        hull = convex_hull([(0, 0), (2, 0), (1, 3), (0.5, 0.5)])
        assert hull.area > 0

    def test_matches_brute_force_on_random_sets(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            pts = rng.uniform(0, 1, (8, 2))
            hull = convex_hull(pts)
            assert {tuple(v) for v in hull.vertices} == brute_force_hull(pts)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st_point, min_size=4, max_size=12, unique=True))
    def test_hull_oracle_property(self, pts):
        arr = np.array(pts)
        try:
            hull = convex_hull(arr)
        except DegenerateHullError:
            return
        assert {tuple(v) for v in hull.vertices} == brute_force_hull(arr)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st_point, min_size=4, max_size=12, unique=True))
    def test_idempotent_and_contains_inputs(self, pts):
        arr = np.array(pts)
        try:
            hull = convex_hull(arr)
        except DegenerateHullError:
            return
        again = convex_hull(hull.vertices)
        assert {tuple(v) for v in again.vertices} == {tuple(v) for v in hull.vertices}
        for x, y in arr:
            assert point_in_polygon(Point2(x, y), hull)


class TestPointInPolygon:
    def test_inside(self):
        assert point_in_polygon(Point2(0.5, 0.5), UNIT_SQUARE)

    def test_outside(self):
        assert not point_in_polygon(Point2(2, 2), UNIT_SQUARE)

    def test_boundary_counts_as_inside(self):
        # closed-region convention, cross-checked with an epsilon-inflated
        # polygon under the even-odd rule
        assert point_in_polygon(Point2(1, 0.5), UNIT_SQUARE)
        inflated = ConvexPolygon([(-1e-7, -1e-7), (1 + 1e-7, -1e-7),
                                  (1 + 1e-7, 1 + 1e-7), (-1e-7, 1 + 1e-7)])
        assert point_in_polygon(Point2(1, 0.5), inflated)


class TestClosestPoint:
    def test_orthogonal_projection(self):
        q, d = closest_point_on_polyline(Point2(1, 1), Polyline([(0, 0), (2, 0)]))
        assert (q.x, q.y) == (1.0, 0.0)
        assert d == 1.0

    def test_point_on_line(self):
        q, d = closest_point_on_polyline(Point2(1, 0), Polyline([(0, 0), (2, 0)]))
        assert (q.x, q.y) == (1.0, 0.0)
        assert d == 0.0

    def test_nearest_endpoint(self):
        # projection parameter clamps to the (2, 0) endpoint; distance from
        # (5, 3) to it is sqrt(3^2 + 3^2)
        q, d = closest_point_on_polyline(Point2(5, 3), Polyline([(0, 0), (2, 0)]))
        assert (q.x, q.y) == (2.0, 0.0)
        assert d == pytest.approx(math.sqrt(18), abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st_point, st.lists(st_point, min_size=2, max_size=8))
    def test_distance_bounded_by_vertices(self, p, pts):
        try:
            line = Polyline(pts)
        except ValueError:
            return
        _, d = closest_point_on_polyline(Point2(*p), line)
        vertex_dists = np.hypot(line.coords[:, 0] - p[0], line.coords[:, 1] - p[1])
        assert d <= vertex_dists.min() + 1e-9


class TestPolylineLength:
    def test_345_triangle(self):
        assert polyline_length(Polyline([(0, 0), (3, 4)])) == 5.0

    def test_l_shape(self):
        assert polyline_length(Polyline([(0, 0), (1, 0), (1, 1)])) == 2.0

    def test_straight(self):
        assert polyline_length(Polyline([(0, 0), (2, 0)])) == 2.0

    def test_short_input_is_zero(self):
        assert polyline_length(np.zeros((1, 2))) == 0.0


class TestCentroid:
    def test_unit_square(self):
        c = centroid([(0, 0), (1, 0), (1, 1), (0, 1)])
        assert (c.x, c.y) == (0.5, 0.5)

    def test_single_point(self):
        c = centroid([(1, 1)])
        assert (c.x, c.y) == (1.0, 1.0)

    def test_triangle(self):
        c = centroid([(0, 0), (3, 0), (0, 3)])
        assert (c.x, c.y) == (1.0, 1.0)

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            centroid([])


class TestSplitPolyline:
    def test_halves(self):
        pieces = split_polyline(Polyline([(0, 0), (10, 0)]), 2)
        assert np.allclose(pieces[0].coords, [(0, 0), (5, 0)])
        assert np.allclose(pieces[1].coords, [(5, 0), (10, 0)])

    def test_n1_is_identity(self):
        line = Polyline([(0, 0), (3, 4)])
        assert split_polyline(line, 1) == [line]

    def test_l_shape_quarters(self):
        line = Polyline([(0, 0), (10, 0), (10, 10)])
        pieces = split_polyline(line, 4)
        for piece in pieces:
            assert piece.length == pytest.approx(5.0, abs=1e-9)

    def test_more_pieces_than_vertices(self):
        pieces = split_polyline(Polyline([(0, 0), (10, 0)]), 7)
        assert len(pieces) == 7
        assert all(len(p) >= 2 for p in pieces)

    def test_shared_endpoints_and_concatenation(self):
        line = Polyline([(0, 0), (4, 3), (9, 3), (9, 9)])
        pieces = split_polyline(line, 5)
        for a, b in zip(pieces, pieces[1:]):
            assert np.array_equal(a.coords[-1], b.coords[0])
        merged = np.vstack([pieces[0].coords] + [p.coords[1:] for p in pieces[1:]])
        assert polyline_length(merged) == pytest.approx(line.length, rel=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st_point, min_size=2, max_size=8), st.integers(1, 9))
    def test_lengths_sum(self, pts, n):
        try:
            line = Polyline(pts)
        except ValueError:
            return
        pieces = split_polyline(line, n)
        assert sum(p.length for p in pieces) == pytest.approx(line.length, rel=1e-9)


class TestResample:
    def test_endpoints_preserved(self):
        out = resample_by_arclength([(0, 0), (1, 2), (5, 5)], 50)
        assert np.array_equal(out[0], [0, 0])
        assert np.array_equal(out[-1], [5, 5])
        assert out.shape == (50, 2)

    def test_uniform_spacing_on_straight_line(self):
        out = resample_by_arclength([(0, 0), (10, 0)], 11)
        assert np.allclose(out[:, 0], np.arange(11.0))

    def test_degenerate_single_point(self):
        out = resample_by_arclength(np.array([[2.0, 3.0]]), 5)
        assert out.shape == (5, 2)
        assert np.all(out == [2.0, 3.0])
