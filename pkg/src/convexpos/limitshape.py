"""Boundary of the limit shape as a closed chain of parabola arcs.

A parabola arc tangent to two lines at given points is exactly the
quadratic Bezier curve whose control point is the intersection of the
two lines, so every arc is stored as (start, control, end).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geom import Polygon
from .pssolver import PSSolution, tangency_points


@dataclass(frozen=True, eq=False)
class ParabolaArc:
    start: np.ndarray
    control: np.ndarray
    end: np.ndarray

    def point(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)[..., None]
        return (1 - t) ** 2 * self.start + 2 * t * (1 - t) * self.control + t**2 * self.end

    def tangent(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)[..., None]
        return 2 * (1 - t) * (self.control - self.start) + 2 * t * (self.end - self.control)

    @property
    def triangle_area(self) -> float:
        a = self.control - self.start
        b = self.end - self.start
        return 0.5 * abs(float(a[0] * b[1] - a[1] * b[0]))

    def support(self, directions) -> np.ndarray:
        """``max_t u . B(t)`` for each unit direction ``u`` (rows of ``directions``)."""
        u = np.asarray(directions, dtype=float)
        a = u @ self.start
        b = u @ self.control
        c = u @ self.end
        best = np.maximum(a, c)
        # u.B(t) = a + 2t(b - a) + t^2 (a - 2b + c)
        curv = a - 2 * b + c
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(curv < 0, (a - b) / curv, -1.0)
        inside = (t > 0) & (t < 1)
        tv = np.where(inside, t, 0.0)
        val = (1 - tv) ** 2 * a + 2 * tv * (1 - tv) * b + tv**2 * c
        return np.where(inside, np.maximum(best, val), best)


@dataclass(frozen=True, eq=False)
class LimitShape:
    arcs: tuple[ParabolaArc, ...]
    points: np.ndarray
    ap: float

    @property
    def kappa(self) -> int:
        return len(self.arcs)

    def sample(self, per_arc: int = 256) -> np.ndarray:
        """Closed polyline through the arcs (endpoints not repeated)."""
        t = np.linspace(0.0, 1.0, per_arc, endpoint=False)
        return np.concatenate([arc.point(t) for arc in self.arcs])

    def support(self, directions) -> np.ndarray:
        return np.max([arc.support(directions) for arc in self.arcs], axis=0)

    def ap_from_triangles(self) -> float:
        return 2.0 * sum(np.cbrt(arc.triangle_area) for arc in self.arcs)


def build_limit_shape(polygon: Polygon, sol: PSSolution) -> LimitShape:
    """Arc ``j`` runs from ``p_j`` to ``p_{j+1}`` with control point ``v_{j+1}``."""
    p = tangency_points(polygon, sol)
    v = polygon.vertices
    k = polygon.kappa
    arcs = tuple(
        ParabolaArc(p[j], v[(j + 1) % k].copy(), p[(j + 1) % k]) for j in range(k)
    )
    return LimitShape(arcs=arcs, points=p, ap=sol.ap_star)


def arc_in_halfplane(arc: ParabolaArc, normal, offset: float, tol: float = 0.0):
    """Exact minimum over t in [0, 1] of ``normal . B(t) - offset``.

    Returns ``(contained, clearance)`` with ``contained = clearance >= -tol``.
    The clearance is a signed distance when ``normal`` is a unit vector.
    """
    n = np.asarray(normal, dtype=float)
    a = float(n @ arc.start) - offset
    b = float(n @ arc.control) - offset
    c = float(n @ arc.end) - offset
    best = min(a, c)
    curv = a - 2 * b + c
    if curv > 0:
        t = (a - b) / curv
        if 0.0 < t < 1.0:
            best = min(best, (1 - t) ** 2 * a + 2 * t * (1 - t) * b + t * t * c)
    return best >= -tol, best


def min_clearance(shape: LimitShape, polygon: Polygon) -> float:
    """Smallest signed distance from the arc chain to any side line of ``polygon``."""
    return min(
        arc_in_halfplane(arc, polygon.normals[j], polygon.offsets[j])[1]
        for arc in shape.arcs
        for j in range(polygon.kappa)
    )


def shape_in_polygon(shape: LimitShape, polygon: Polygon, tol: float | None = None) -> bool:
    """True iff every arc clears every side half-plane of ``polygon`` to within ``tol``."""
    if tol is None:
        tol = 1e-9 * polygon.diameter
    return min_clearance(shape, polygon) >= -tol
