"""Planar geometry for convex polygons.

Side ``j`` runs from ``vertices[j]`` to ``vertices[j + 1]`` (indices are
zero-based and cyclic) and ``theta[j]`` is the interior angle at
``vertices[j + 1]``, i.e. between side ``j`` and side ``j + 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import (
    CollinearVertices,
    DuplicateVertex,
    NonConvex,
    SingularMap,
    TooFewVertices,
)

# Relative tolerances, scaled by diameter (lengths) or diameter**2 (cross products).
DUPLICATE_TOL = 1e-12
CROSS_TOL = 1e-12


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass(frozen=True, eq=False)
class Polygon:
    """Strictly convex polygon with counterclockwise vertices.

    Clockwise input is reversed (keeping the first vertex first). Raises a
    :class:`~convexpos.errors.PolygonError` subclass on degenerate input.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise TooFewVertices("vertices must be a list of (x, y) pairs")
        if len(v) < 3:
            raise TooFewVertices(f"need at least 3 vertices, got {len(v)}")
        if not np.all(np.isfinite(v)):
            raise NonConvex("vertex coordinates must be finite")
        edges = np.roll(v, -1, axis=0) - v
        lengths = np.hypot(edges[:, 0], edges[:, 1])
        diam = _diameter(v)
        if diam == 0.0 or np.any(lengths <= DUPLICATE_TOL * diam):
            j = int(np.argmin(lengths))
            raise DuplicateVertex(f"vertices {j} and {(j + 1) % len(v)} coincide")
        cr = _cross(edges, np.roll(edges, -1, axis=0))
        tol = CROSS_TOL * diam * diam
        if np.any(np.abs(cr) <= tol):
            j = int(np.argmin(np.abs(cr)))
            raise CollinearVertices(
                f"vertices {j}, {(j + 1) % len(v)}, {(j + 2) % len(v)} are collinear"
            )
        if not (np.all(cr > 0) or np.all(cr < 0)):
            raise NonConvex("polygon is not convex")
        if cr[0] < 0:
            v = np.concatenate([v[:1], v[:0:-1]])
            edges = np.roll(v, -1, axis=0) - v
        # all turns agree in sign; a convex polygon winds exactly once
        turns = np.arctan2(
            _cross(edges, np.roll(edges, -1, axis=0)),
            np.einsum("ij,ij->i", edges, np.roll(edges, -1, axis=0)),
        )
        if abs(turns.sum() - 2 * math.pi) > 1e-9:
            raise NonConvex("polygon winds more than once (self-intersecting)")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def kappa(self) -> int:
        return len(self.vertices)

    @cached_property
    def edges(self) -> np.ndarray:
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    @cached_property
    def r(self) -> np.ndarray:
        """Side lengths, ``r[j] = |v[j+1] - v[j]|``."""
        return np.hypot(self.edges[:, 0], self.edges[:, 1])

    @cached_property
    def theta(self) -> np.ndarray:
        """Interior angles, ``theta[j]`` at ``v[j+1]``."""
        e = self.edges
        e_next = np.roll(e, -1, axis=0)
        turn = np.arctan2(_cross(e, e_next), np.einsum("ij,ij->i", e, e_next))
        return math.pi - turn

    @cached_property
    def area(self) -> float:
        v = self.vertices
        return 0.5 * float(np.sum(_cross(v, np.roll(v, -1, axis=0))))

    @cached_property
    def diameter(self) -> float:
        return _diameter(self.vertices)

    @cached_property
    def directions(self) -> np.ndarray:
        return self.edges / self.r[:, None]

    @cached_property
    def normals(self) -> np.ndarray:
        """Inward unit normals (left of each counterclockwise edge)."""
        d = self.directions
        return np.column_stack([-d[:, 1], d[:, 0]])

    @cached_property
    def offsets(self) -> np.ndarray:
        """``normals[j] . x >= offsets[j]`` describes the polygon."""
        return np.einsum("ij,ij->i", self.normals, self.vertices)

    @property
    def side_lines(self) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """(base point, unit direction, inward unit normal) for every side."""
        return [
            (self.vertices[j], self.directions[j], self.normals[j])
            for j in range(self.kappa)
        ]

    def side_distances(self, points) -> np.ndarray:
        """Signed inward distance of each point to each side line, shape (..., kappa)."""
        p = np.asarray(points, dtype=float)
        return p @ self.normals.T - self.offsets

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        """Boolean mask of points inside the closed polygon, up to ``tol`` (length)."""
        return np.all(self.side_distances(points) >= -tol, axis=-1)

    def to_json(self) -> str:
        return json.dumps({"vertices": self.vertices.tolist()})

    def __repr__(self) -> str:
        return f"Polygon(kappa={self.kappa}, area={self.area:.6g})"


def _diameter(v: np.ndarray) -> float:
    d = v[:, None, :] - v[None, :, :]
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", d, d))))


def parse_polygon(raw) -> Polygon:
    """Validate a raw vertex list and build a :class:`Polygon`."""
    if isinstance(raw, Polygon):
        return raw
    return Polygon(np.asarray(raw, dtype=float))


def load_polygon(path) -> Polygon:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or "vertices" not in data:
        raise TooFewVertices("polygon file must be a JSON object with a 'vertices' list")
    return parse_polygon(data["vertices"])


def save_polygon(polygon: Polygon, path) -> None:
    # float repr is the shortest decimal that round-trips bit-exactly
    Path(path).write_text(polygon.to_json() + "\n")


def canonicalize(polygon: Polygon) -> Polygon:
    """Rigidly move ``polygon`` so v1 = (0, 0) and v2 lies on the positive x-axis."""
    v = polygon.vertices - polygon.vertices[0]
    c, s = polygon.directions[0]
    rot = np.array([[c, s], [-s, c]])
    out = v @ rot.T
    out[0] = 0.0
    out[1, 1] = 0.0
    return Polygon(out)


@dataclass(frozen=True, eq=False)
class AffineMap:
    """``x -> linear @ x + translation``."""

    linear: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        a = np.array(self.linear, dtype=float).reshape(2, 2)
        t = np.array(self.translation, dtype=float).reshape(2)
        scale = max(float(np.max(np.abs(a))), 1e-300)
        if abs(np.linalg.det(a)) <= 1e-14 * scale * scale:
            raise SingularMap("affine map is not invertible")
        object.__setattr__(self, "linear", a)
        object.__setattr__(self, "translation", t)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.linear))

    def __call__(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.linear.T + self.translation

    def inverse(self) -> AffineMap:
        inv = np.linalg.inv(self.linear)
        return AffineMap(inv, -inv @ self.translation)


def apply_affine(polygon: Polygon, amap: AffineMap) -> Polygon:
    """Image of ``polygon``; orientation is re-normalised when ``det < 0``."""
    return Polygon(amap(polygon.vertices))


def random_affine_map(rng: np.random.Generator, max_cond: float = 20.0) -> AffineMap:
    """Random invertible map with bounded condition number (possibly reflecting)."""
    while True:
        a = rng.normal(size=(2, 2))
        if np.linalg.cond(a) < max_cond:
            return AffineMap(a, rng.normal(size=2) * 3.0)


def regular_polygon(kappa: int, area: float = 1.0) -> Polygon:
    ang = 2 * math.pi * np.arange(kappa) / kappa - math.pi / 2 - math.pi / kappa
    rad = math.sqrt(2 * area / (kappa * math.sin(2 * math.pi / kappa)))
    return Polygon(rad * np.column_stack([np.cos(ang), np.sin(ang)]))


def random_convex_polygon(
    kappa: int, rng: np.random.Generator, min_gap: float = 0.15
) -> Polygon:
    """Random strictly convex ``kappa``-gon: points on an ellipse, then a random affine map.

    ``min_gap`` is the smallest angular gap between consecutive vertices, as a
    fraction of the uniform gap ``2 pi / kappa``.
    """
    gap = min_gap * 2 * math.pi / kappa
    free = 2 * math.pi - kappa * gap
    cuts = np.sort(rng.uniform(0.0, free, size=kappa - 1))
    spans = np.diff(np.concatenate([[0.0], cuts, [free]])) + gap
    ang = rng.uniform(0, 2 * math.pi) + np.concatenate([[0.0], np.cumsum(spans[:-1])])
    pts = np.column_stack([np.cos(ang), np.sin(ang)])
    return apply_affine(Polygon(pts), random_affine_map(rng, max_cond=8.0))


def convex_hull(points) -> list[int]:
    """Indices of the counterclockwise convex hull vertices (Andrew's monotone chain).

    Collinear boundary points and repeated points are excluded.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(p)
    if n == 0:
        return []
    order = sorted(range(n), key=lambda i: (p[i, 0], p[i, 1]))
    # drop exact duplicates, keeping the first occurrence
    uniq = [order[0]]
    for i in order[1:]:
        if p[i, 0] != p[uniq[-1], 0] or p[i, 1] != p[uniq[-1], 1]:
            uniq.append(i)
    if len(uniq) <= 2:
        return uniq

    def turn(o, a, b):
        return (p[a, 0] - p[o, 0]) * (p[b, 1] - p[o, 1]) - (p[a, 1] - p[o, 1]) * (
            p[b, 0] - p[o, 0]
        )

    lower: list[int] = []
    for i in uniq:
        while len(lower) >= 2 and turn(lower[-2], lower[-1], i) <= 0:
            lower.pop()
        lower.append(i)
    upper: list[int] = []
    for i in reversed(uniq):
        while len(upper) >= 2 and turn(upper[-2], upper[-1], i) <= 0:
            upper.pop()
        upper.append(i)
    hull = lower[:-1] + upper[:-1]
    if len(hull) == 2 and hull[0] == hull[1]:
        return hull[:1]
    return hull


def is_convex_position(points) -> bool:
    """True iff every point is a vertex of the convex hull of the set."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(p) < 3:
        return len(np.unique(p, axis=0)) == len(p)
    return len(convex_hull(p)) == len(p)


def convex_position_mask(batch) -> np.ndarray:
    """Vectorised :func:`is_convex_position` over a (trials, n, 2) array, n >= 3.

    Points are sorted by angle around their centroid; they are in convex
    position iff the resulting closed polygon turns strictly left everywhere.
    """
    b = np.asarray(batch, dtype=float)
    c = b.mean(axis=1, keepdims=True)
    d = b - c
    order = np.argsort(np.arctan2(d[..., 1], d[..., 0]), axis=1)
    s = np.take_along_axis(b, order[..., None], axis=1)
    e = np.roll(s, -1, axis=1) - s
    cr = _cross(e, np.roll(e, -1, axis=1))
    return np.all(cr > 0, axis=1)


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _fan(polygon: Polygon):
    v = polygon.vertices
    a = v[0]
    b = v[1:-1]
    c = v[2:]
    areas = 0.5 * _cross(b - a, c - a)
    return a, b, c, areas


def sample_uniform(polygon: Polygon, count: int, seed=None) -> np.ndarray:
    """``count`` i.i.d. uniform points in ``polygon``, shape (count, 2).

    Fan triangulation from v1, area-weighted triangle choice, then the
    reflection method inside each triangle.
    """
    rng = make_rng(seed)
    return _sample(polygon, rng, (count,))


def _sample(polygon: Polygon, rng: np.random.Generator, shape) -> np.ndarray:
    a, b, c, areas = _fan(polygon)
    pick, s, t = rng.random((3,) + tuple(shape))
    # reflect points of the unit square's upper half into the lower triangle
    flip = s + t > 1.0
    s = np.where(flip, 1.0 - s, s)
    t = np.where(flip, 1.0 - t, t)
    ba, ca = b - a, c - a
    if len(areas) == 1:
        tri = np.zeros(s.shape, dtype=np.intp)
    else:
        cdf = np.cumsum(areas)
        cdf /= cdf[-1]
        tri = np.minimum(np.searchsorted(cdf, pick, side="right"), len(areas) - 1)
    out = np.empty(s.shape + (2,))
    for k in range(2):
        out[..., k] = a[k] + s * ba[:, k].take(tri) + t * ca[:, k].take(tri)
    return out
