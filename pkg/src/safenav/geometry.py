"""2D geometric primitives: convex hulls, containment tests, polyline queries."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Boundary tolerance (meters) for containment ties; hull construction itself
# relies on exact cross-product signs.
CONTAINMENT_EPS = 1e-9


class DegenerateHullError(ValueError):
    """Point set has no area-bearing convex hull (collinear or too few points)."""


@dataclass(frozen=True)
class Point2:
    """A point in the plane, meters."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x!r}, {self.y!r})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def distance_to(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


def as_coords(points) -> np.ndarray:
    """Coerce a Polyline, (N, 2) array, or sequence of Point2/pairs to a float array."""
    if isinstance(points, Polyline):
        return points.coords
    if isinstance(points, Point2):
        return points.as_array().reshape(1, 2)
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=float)
    else:
        pts = list(points)
        if pts and isinstance(pts[0], Point2):
            arr = np.array([(p.x, p.y) for p in pts], dtype=float)
        else:
            arr = np.asarray(pts, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected (N, 2) coordinates, got shape {arr.shape}")
    return arr


class Polyline:
    """Ordered path of >= 2 points; consecutive duplicates are dropped at construction."""

    __slots__ = ("coords", "_cache")

    def __init__(self, points) -> None:
        arr = np.array(as_coords(points), dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("polyline coordinates must be finite")
        if len(arr) >= 2:
            keep = np.ones(len(arr), dtype=bool)
            keep[1:] = np.any(arr[1:] != arr[:-1], axis=1)
            arr = arr[keep]
        if len(arr) < 2:
            raise ValueError("polyline needs at least 2 distinct points")
        arr.flags.writeable = False
        self.coords = arr
        self._cache = None

    def __len__(self) -> int:
        return len(self.coords)

    def __repr__(self) -> str:
        return f"Polyline({len(self.coords)} points, length={self.length:.3f})"

    @property
    def points(self) -> list[Point2]:
        return [Point2(float(x), float(y)) for x, y in self.coords]

    def _segments(self):
        if self._cache is None:
            starts = self.coords[:-1]
            vecs = self.coords[1:] - starts
            len2 = np.einsum("ij,ij->i", vecs, vecs)
            seg_len = np.sqrt(len2)
            cum = np.concatenate([[0.0], np.cumsum(seg_len)])
            self._cache = (starts, vecs, len2, seg_len, cum)
        return self._cache

    @property
    def length(self) -> float:
        return float(self._segments()[4][-1])


class ConvexPolygon:
    """Strictly convex polygon: vertices CCW, no three consecutive collinear."""

    __slots__ = ("vertices", "_edges")

    def __init__(self, vertices) -> None:
        verts = np.array(as_coords(vertices), dtype=float)
        if len(verts) < 3:
            raise ValueError("convex polygon needs at least 3 vertices")
        edges = np.roll(verts, -1, axis=0) - verts
        nxt = np.roll(edges, -1, axis=0)
        cr = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
        if not np.all(cr > 0.0):
            raise ValueError("vertices must be CCW and strictly convex")
        verts.flags.writeable = False
        self.vertices = verts
        self._edges = None

    def __len__(self) -> int:
        return len(self.vertices)

    def _edge_data(self):
        if self._edges is None:
            e = np.roll(self.vertices, -1, axis=0) - self.vertices
            self._edges = (e, np.sqrt(np.einsum("ij,ij->i", e, e)))
        return self._edges

    @property
    def centroid(self) -> Point2:
        c = self.vertices.mean(axis=0)
        return Point2(float(c[0]), float(c[1]))

    @property
    def area(self) -> float:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> ConvexPolygon:
    """Exact convex hull via monotone chain; vertices CCW, collinear points excluded.

    Raises DegenerateHullError for fewer than 3 distinct points or all-collinear
    input, since downstream containment checks need an area-bearing region.
    """
    pts = np.unique(as_coords(points), axis=0)  # lexicographic sort
    if len(pts) < 3:
        raise DegenerateHullError("need at least 3 distinct points")
    rows = [(float(x), float(y)) for x, y in pts]
    lower: list[tuple[float, float]] = []
    for p in rows:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0.0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(rows):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0.0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateHullError("collinear input")
    return ConvexPolygon(np.array(hull, dtype=float))


def point_in_polygon(p: Point2, poly: ConvexPolygon) -> bool:
    """Closed-region containment test: boundary points count as inside."""
    edges, lens = poly._edge_data()
    v = poly.vertices
    cr = edges[:, 0] * (p.y - v[:, 1]) - edges[:, 1] * (p.x - v[:, 0])
    return bool(np.all(cr >= -CONTAINMENT_EPS * lens))


def project_onto_polyline(p, line: Polyline) -> tuple[float, float, Point2]:
    """Project a point onto a polyline.

    Returns (arc length at the projection, distance to the line, closest point).
    """
    starts, vecs, len2, seg_len, cum = line._segments()
    if isinstance(p, Point2):
        px, py = p.x, p.y
    else:
        px, py = float(p[0]), float(p[1])
    rel0 = px - starts[:, 0]
    rel1 = py - starts[:, 1]
    t = (rel0 * vecs[:, 0] + rel1 * vecs[:, 1]) / len2
    np.clip(t, 0.0, 1.0, out=t)
    cx = starts[:, 0] + t * vecs[:, 0]
    cy = starts[:, 1] + t * vecs[:, 1]
    d2 = (px - cx) ** 2 + (py - cy) ** 2
    i = int(np.argmin(d2))
    arc = float(cum[i] + t[i] * seg_len[i])
    return arc, float(math.sqrt(d2[i])), Point2(float(cx[i]), float(cy[i]))


def closest_point_on_polyline(p, line: Polyline) -> tuple[Point2, float]:
    """Closest point on the polyline (projection or vertex) and its distance."""
    arc, dist, q = project_onto_polyline(p, line)
    return q, dist


def distances_to_polyline(points, line: Polyline) -> np.ndarray:
    """Distance from each of N points to the polyline, vectorized over segments."""
    pts = as_coords(points)
    starts, vecs, len2, _, _ = line._segments()
    rel = pts[:, None, :] - starts[None, :, :]
    t = np.clip(np.einsum("nsk,sk->ns", rel, vecs) / len2, 0.0, 1.0)
    diff = rel - t[:, :, None] * vecs[None, :, :]
    d2 = np.einsum("nsk,nsk->ns", diff, diff)
    return np.sqrt(d2.min(axis=1))


def polyline_length(line) -> float:
    """Total Euclidean length; 0.0 for fewer than 2 points."""
    if isinstance(line, Polyline):
        return line.length
    arr = as_coords(line)
    if len(arr) < 2:
        return 0.0
    return float(np.sqrt(((arr[1:] - arr[:-1]) ** 2).sum(axis=1)).sum())


def centroid(points) -> Point2:
    """Arithmetic mean of the coordinates."""
    arr = as_coords(points)
    if len(arr) == 0:
        raise ValueError("centroid of an empty point set")
    c = arr.mean(axis=0)
    return Point2(float(c[0]), float(c[1]))


def point_at_arc(line: Polyline, s: float) -> np.ndarray:
    """Point at arc-length position s along the polyline (clamped to its ends)."""
    starts, vecs, _, seg_len, cum = line._segments()
    s = min(max(s, 0.0), float(cum[-1]))
    i = int(np.searchsorted(cum, s, side="right")) - 1
    i = min(max(i, 0), len(seg_len) - 1)
    t = (s - cum[i]) / seg_len[i] if seg_len[i] > 0 else 0.0
    return starts[i] + t * vecs[i]


def split_polyline(line: Polyline, n: int) -> list[Polyline]:
    """Split a polyline into n contiguous pieces of equal arc length.

    Adjacent pieces share an endpoint and their concatenation reproduces the
    input; cut points are interpolated where segment boundaries fall inside
    an edge.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return [line]
    _, _, _, _, cum = line._segments()
    total = float(cum[-1])
    bounds = [total * k / n for k in range(1, n)]
    cuts = [point_at_arc(line, s) for s in bounds]
    pieces: list[Polyline] = []
    prev_pt = line.coords[0]
    prev_s = 0.0
    for k in range(n):
        end_s = bounds[k] if k < n - 1 else total
        end_pt = cuts[k] if k < n - 1 else line.coords[-1]
        inside = (cum > prev_s) & (cum < end_s)
        pts = np.vstack([prev_pt, line.coords[inside], end_pt])
        pieces.append(Polyline(pts))
        prev_pt, prev_s = end_pt, end_s
    return pieces


def resample_by_arclength(points, n: int) -> np.ndarray:
    """Resample to n points uniformly spaced by arc length; endpoints preserved."""
    if n < 2:
        raise ValueError("n must be >= 2")
    arr = as_coords(points)
    if len(arr) == 1:
        return np.repeat(arr, n, axis=0)
    seg = np.sqrt(((arr[1:] - arr[:-1]) ** 2).sum(axis=1))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if cum[-1] == 0.0:
        return np.repeat(arr[:1], n, axis=0)
    s = np.linspace(0.0, cum[-1], n)
    return np.column_stack([np.interp(s, cum, arr[:, 0]), np.interp(s, cum, arr[:, 1])])
