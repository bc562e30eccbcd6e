"""Find the limit shape of an arbitrary convex polygon.

Every subset ``I`` of at least three side lines that bounds a compact
polygon ``K_I`` is a candidate. The curve of maximal affine perimeter that
touches every side of ``K_I`` is computed; it is kept if it fits inside
``K`` and the one with the largest affine perimeter wins.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import Executor
from dataclasses import dataclass

import numpy as np

from .errors import NoValidSubset, PolygonError, TooLarge, UnboundedCandidate
from .geom import Polygon
from .limitshape import LimitShape, build_limit_shape, min_clearance
from .pssolver import PSSolution, solve_polygon

MAX_SIDES = 24
TIE_RTOL = 1e-10
TANGENCY_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class Candidate:
    subset: tuple[int, ...]
    polygon: Polygon
    solution: PSSolution
    shape: LimitShape
    clearance: float

    @property
    def ap(self) -> float:
        return self.solution.ap_star


@dataclass(frozen=True, eq=False)
class DomReport:
    """Result of :func:`find_dom`.

    ``K_T`` is the candidate polygon ``K_{I*}``, ``tangency_set`` the sides of
    ``K`` touched by the limit shape (zero-based), ``m`` its size.
    """

    I_star: tuple[int, ...]
    K_T: Polygon
    solution: PSSolution
    tangency_set: tuple[int, ...]
    limit_shape: LimitShape
    ap_star: float
    n_candidates: int
    n_accepted: int

    @property
    def m(self) -> int:
        return len(self.tangency_set)


def _angles(polygon: Polygon) -> np.ndarray:
    d = polygon.directions
    a = np.mod(np.arctan2(d[:, 1], d[:, 0]) - math.atan2(d[0, 1], d[0, 0]), 2 * math.pi)
    a[0] = 0.0  # rounding can wrap the reference direction to 2 pi
    return a


def _bounded(angles: np.ndarray, subset) -> bool:
    a = angles[list(subset)]
    gaps = np.diff(np.concatenate([a, [a[0] + 2 * math.pi]]))
    return bool(np.all(gaps < math.pi - 1e-12))


def _intersect(n1, c1, n2, c2):
    m = np.array([n1, n2])
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if abs(det) < 1e-15:
        raise UnboundedCandidate("parallel consecutive lines")
    return np.linalg.solve(m, [c1, c2])


def build_candidate(polygon: Polygon, subset) -> Polygon:
    """Polygon ``K_I`` bounded by the side lines of ``polygon`` listed in ``subset``."""
    subset = tuple(sorted(subset))
    if len(subset) < 3 or not _bounded(_angles(polygon), subset):
        raise UnboundedCandidate(f"side lines {subset} do not bound a compact polygon")
    nrm = polygon.normals
    off = polygon.offsets
    k = len(subset)
    # vertex i is where side subset[i] starts: lines subset[i-1] and subset[i] meet
    verts = [
        _intersect(nrm[subset[i - 1]], off[subset[i - 1]], nrm[subset[i]], off[subset[i]])
        for i in range(k)
    ]
    out = np.array(verts)
    # each chosen line must carry a proper edge, traversed along its own direction
    edges = np.roll(out, -1, axis=0) - out
    along = np.einsum("ij,ij->i", edges, polygon.directions[list(subset)])
    if np.any(along <= 1e-12 * polygon.diameter):
        raise UnboundedCandidate(f"side lines {subset} leave a redundant line")
    return Polygon(out)


def enumerate_valid(polygon: Polygon) -> list[tuple[int, ...]]:
    """All subsets of at least 3 side lines bounding a compact polygon with one edge per line."""
    k = polygon.kappa
    if k > MAX_SIDES:
        raise TooLarge(f"subset enumeration is capped at {MAX_SIDES} sides, got {k}")
    angles = _angles(polygon)
    out = []
    for size in range(3, k + 1):
        for subset in itertools.combinations(range(k), size):
            if not _bounded(angles, subset):
                continue
            try:
                build_candidate(polygon, subset)
            except (UnboundedCandidate, PolygonError):
                continue
            out.append(subset)
    return out


def evaluate_candidate(polygon: Polygon, subset) -> Candidate:
    cand = build_candidate(polygon, subset)
    sol = solve_polygon(cand)
    shape = build_limit_shape(cand, sol)
    return Candidate(tuple(sorted(subset)), cand, sol, shape, min_clearance(shape, polygon))


def _accept(c: Candidate, tol: float) -> bool:
    w = c.solution.w
    return c.clearance >= -tol and bool(np.all((w > 0) & (w < 1)))


def _argmax(cands: list[Candidate]) -> Candidate:
    best_ap = max(c.ap for c in cands)
    close = [c for c in cands if c.ap >= best_ap * (1 - TIE_RTOL)]
    # order-free tie break: larger subset, then lexicographically smallest
    return min(close, key=lambda c: (-len(c.subset), c.subset))


def _evaluate(args):
    polygon, subset = args
    return evaluate_candidate(polygon, subset)


def find_dom(polygon: Polygon, tol: float | None = None, executor: Executor | None = None) -> DomReport:
    """Maximise the affine perimeter of candidate curves over all valid subsets."""
    if tol is None:
        tol = 1e-9 * polygon.diameter
    subsets = enumerate_valid(polygon)
    if executor is None:
        cands = [evaluate_candidate(polygon, s) for s in subsets]
    else:
        cands = list(executor.map(_evaluate, [(polygon, s) for s in subsets]))
    accepted = [c for c in cands if _accept(c, tol)]
    if not accepted:
        raise NoValidSubset("no candidate curve fits inside the polygon")
    best = _argmax(accepted)
    return DomReport(
        I_star=best.subset,
        K_T=best.polygon,
        solution=best.solution,
        tangency_set=tangent_sides(polygon, best.polygon),
        limit_shape=best.shape,
        ap_star=best.ap,
        n_candidates=len(cands),
        n_accepted=len(accepted),
    )


def tangent_sides(polygon: Polygon, k_t: Polygon) -> tuple[int, ...]:
    """Sides of ``polygon`` whose supporting line is a side line of ``k_t``."""
    scale = polygon.diameter
    out = []
    for j in range(polygon.kappa):
        same_dir = np.abs(k_t.normals @ polygon.normals[j] - 1.0) <= TANGENCY_RTOL
        same_off = np.abs(k_t.offsets - polygon.offsets[j]) <= TANGENCY_RTOL * scale
        if np.any(same_dir & same_off):
            out.append(j)
    return tuple(out)
