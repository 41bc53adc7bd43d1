"""Points, obstacle polygons and line-of-sight tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

EPS = 1e-9


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def __iter__(self):
        yield self.x
        yield self.y

    def dist(self, other: "Point2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


def _cross(ox, oy, ax, ay, bx, by):
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def _segments_properly_cross(p, q, a, b) -> bool:
    d1 = _cross(*p, *q, *a)
    d2 = _cross(*p, *q, *b)
    d3 = _cross(*a, *b, *p)
    d4 = _cross(*a, *b, *q)
    return d1 * d2 < 0 and d3 * d4 < 0


def _point_segment_distance(px, py, ax, ay, bx, by) -> float:
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / L2))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


@dataclass(frozen=True)
class ObstaclePolygon:
    """A simple polygon; vertices in either winding order."""

    vertices: tuple[Point2D, ...]

    def __post_init__(self):
        verts = tuple(v if isinstance(v, Point2D) else Point2D(*v) for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise ValueError("obstacle needs at least 3 vertices")
        if abs(self.area) <= EPS:
            raise ValueError("obstacle has zero area")
        if not self.is_simple():
            raise ValueError("obstacle polygon is self-intersecting")

    @classmethod
    def rectangle(cls, x0: float, y0: float, x1: float, y1: float) -> "ObstaclePolygon":
        return cls((Point2D(x0, y0), Point2D(x1, y0), Point2D(x1, y1), Point2D(x0, y1)))

    @property
    def edges(self):
        vs = self.vertices
        return [(vs[i], vs[(i + 1) % len(vs)]) for i in range(len(vs))]

    @property
    def area(self) -> float:
        # signed shoelace area
        vs = self.vertices
        s = 0.0
        for i in range(len(vs)):
            a, b = vs[i], vs[(i + 1) % len(vs)]
            s += a.x * b.y - b.x * a.y
        return 0.5 * s

    @property
    def centroid(self) -> Point2D:
        vs = self.vertices
        A = self.area
        cx = cy = 0.0
        for i in range(len(vs)):
            a, b = vs[i], vs[(i + 1) % len(vs)]
            w = a.x * b.y - b.x * a.y
            cx += (a.x + b.x) * w
            cy += (a.y + b.y) * w
        return Point2D(cx / (6 * A), cy / (6 * A))

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        xs = [v.x for v in self.vertices]
        ys = [v.y for v in self.vertices]
        return min(xs), min(ys), max(xs), max(ys)

    def is_simple(self) -> bool:
        edges = self.edges
        n = len(edges)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    # adjacent edges share a vertex; only a fold-back overlap is bad
                    a, b = edges[i]
                    c, d = edges[j]
                    shared = b if j == i + 1 else a
                    other_i = a if j == i + 1 else b
                    other_j = d if j == i + 1 else c
                    if abs(_cross(*shared, *other_i, *other_j)) <= EPS:
                        ux, uy = other_i.x - shared.x, other_i.y - shared.y
                        vx, vy = other_j.x - shared.x, other_j.y - shared.y
                        if ux * vx + uy * vy > 0:
                            return False
                    continue
                a, b = edges[i]
                c, d = edges[j]
                if _segments_properly_cross(tuple(a), tuple(b), tuple(c), tuple(d)):
                    return False
                for p in (c, d):
                    if _point_segment_distance(p.x, p.y, a.x, a.y, b.x, b.y) <= EPS:
                        return False
                for p in (a, b):
                    if _point_segment_distance(p.x, p.y, c.x, c.y, d.x, d.y) <= EPS:
                        return False
        return True

    def boundary_distance(self, p: Point2D) -> float:
        return min(_point_segment_distance(p.x, p.y, a.x, a.y, b.x, b.y) for a, b in self.edges)

    def on_boundary(self, p: Point2D, tol: float = EPS) -> bool:
        return self.boundary_distance(p) <= tol

    def contains(self, p: Point2D) -> bool:
        """Strict interior test; points on the boundary are outside."""
        x0, y0, x1, y1 = self.bbox
        if p.x < x0 or p.x > x1 or p.y < y0 or p.y > y1:
            return False
        if self.on_boundary(p):
            return False
        inside = False
        px, py = p.x, p.y
        for a, b in self.edges:
            if (a.y > py) != (b.y > py):
                xint = a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y)
                if px < xint:
                    inside = not inside
        return inside


def _edge_hits(p: Point2D, q: Point2D, a: Point2D, b: Point2D) -> list[float]:
    """Parameters t in [0, 1] along pq where pq meets edge ab (endpoints of overlaps included)."""
    rx, ry = q.x - p.x, q.y - p.y
    sx, sy = b.x - a.x, b.y - a.y
    denom = rx * sy - ry * sx
    L2 = rx * rx + ry * ry
    qpx, qpy = a.x - p.x, a.y - p.y
    if abs(denom) <= EPS * math.sqrt(L2 * (sx * sx + sy * sy)):
        if abs(qpx * ry - qpy * rx) > EPS * math.sqrt(L2):
            return []
        # collinear: project the edge endpoints onto pq
        ts = [((v.x - p.x) * rx + (v.y - p.y) * ry) / L2 for v in (a, b)]
        return [t for t in ts if 0.0 <= t <= 1.0]
    t = (qpx * sy - qpy * sx) / denom
    u = (qpx * ry - qpy * rx) / denom
    if -EPS <= t <= 1 + EPS and -EPS <= u <= 1 + EPS:
        return [min(1.0, max(0.0, t))]
    return []


def _blocked_by(p: Point2D, q: Point2D, poly: ObstaclePolygon) -> bool:
    x0, y0, x1, y1 = poly.bbox
    if max(p.x, q.x) < x0 or min(p.x, q.x) > x1 or max(p.y, q.y) < y0 or min(p.y, q.y) > y1:
        return False
    ts = {0.0, 1.0}
    for a, b in poly.edges:
        ts.update(_edge_hits(p, q, a, b))
    ts = sorted(ts)
    # the open segment enters the interior iff some sub-interval midpoint is strictly inside
    for t0, t1 in zip(ts, ts[1:]):
        if t1 - t0 <= 1e-12:
            continue
        tm = 0.5 * (t0 + t1)
        if poly.contains(Point2D(p.x + tm * (q.x - p.x), p.y + tm * (q.y - p.y))):
            return True
    return False


def segment_blocked(p: Point2D, q: Point2D, obstacles: Iterable[ObstaclePolygon]) -> bool:
    """True iff the open segment pq passes through the interior of any obstacle.

    Grazing a vertex or sliding along an edge does not block.
    """
    if p == q:
        return False
    # canonical order keeps the test exactly symmetric
    if (q.x, q.y) < (p.x, p.y):
        p, q = q, p
    return any(_blocked_by(p, q, poly) for poly in obstacles)


@dataclass(frozen=True)
class SensorNode:
    id: int
    position: Point2D
    is_boundary: bool = False
    initial_energy: float = 1.0
    used_energy: float = 0.0
    # None means "derive from geometry"
    num_neighbors: int | None = None

    def __post_init__(self):
        if not isinstance(self.position, Point2D):
            object.__setattr__(self, "position", Point2D(*self.position))
        if self.initial_energy < 0:
            raise ValueError(f"node {self.id}: negative initial_energy")
        if not (0.0 <= self.used_energy <= self.initial_energy):
            raise ValueError(f"node {self.id}: used_energy must lie in [0, initial_energy]")
        if self.num_neighbors is not None and self.num_neighbors < 0:
            raise ValueError(f"node {self.id}: negative num_neighbors")


def auto_flag_boundary(
    nodes: Sequence[SensorNode], obstacles: Sequence[ObstaclePolygon], d_b: float
) -> list[SensorNode]:
    """Flag nodes within ``d_b`` of an obstacle boundary; existing flags are kept."""
    if d_b <= 0:
        raise ValueError("d_b must be positive")
    out = []
    for node in nodes:
        near = any(poly.boundary_distance(node.position) <= d_b for poly in obstacles)
        out.append(replace(node, is_boundary=True) if near and not node.is_boundary else node)
    return out


def with_neighbor_counts(nodes: Sequence[SensorNode], radius: float) -> list[SensorNode]:
    """Fill in ``num_neighbors`` (other nodes within ``radius``) where it is unset."""
    out = []
    for node in nodes:
        if node.num_neighbors is None:
            n = sum(1 for o in nodes if o.id != node.id and node.position.dist(o.position) <= radius)
            node = replace(node, num_neighbors=n)
        out.append(node)
    return out
