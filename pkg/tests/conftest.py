import numpy as np
import pytest

from mobloc.geometry import ObstaclePolygon, Point2D


@pytest.fixture
def square():
    return ObstaclePolygon.rectangle(4, 4, 6, 6)


def brute_blocked(p, q, x0, y0, x1, y1, samples=20001):
    """Dense sampling of the open segment against an axis-aligned box interior."""
    t = np.linspace(0, 1, samples)[1:-1]
    xs = p.x + t * (q.x - p.x)
    ys = p.y + t * (q.y - p.y)
    return bool(np.any((xs > x0) & (xs < x1) & (ys > y0) & (ys < y1)))


def brute_boundary_distance(p, poly, samples=4001):
    best = np.inf
    for a, b in poly.edges:
        t = np.linspace(0, 1, samples)
        xs = a.x + t * (b.x - a.x)
        ys = a.y + t * (b.y - a.y)
        best = min(best, float(np.hypot(xs - p.x, ys - p.y).min()))
    return best


P = Point2D
