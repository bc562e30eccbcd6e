"""Monte Carlo estimators, parallel containing polygons and size-vector densities.

The parallel containing polygon (PCP) of a point set in ``K`` is the
smallest polygon with sides parallel to those of ``K`` containing the set.
It is described by side-distances ``ell`` (distance from each side of ``K``
to the closest point) and side-lengths ``c``.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection
from scipy.special import roots_jacobi, xlogy
from scipy.stats import binomtest

from .asymptotics import AsymptoticModel
from .errors import EmptyInput, InvalidSizeVector, PointOutsidePolygon, TooLarge
from .geom import Polygon, _cross, _sample, convex_hull, convex_position_mask, is_convex_position
from .limitshape import LimitShape

BLOCK = 1 << 15
MAX_CONDITIONED_N = 12
QUAD_MAX_KAPPA = 4
QUAD_MAX_N = 8
FULL_SIDED_RTOL = 1e-12


# ------------------------------------------------------------------ estimates


@dataclass(frozen=True)
class MCEstimate:
    estimator: str
    n: int
    trials: int
    successes: int
    seed: int
    polygon_hash: str = ""

    def __post_init__(self):
        if not 0 <= self.successes <= self.trials:
            raise ValueError("successes must lie in [0, trials]")

    @property
    def p_hat(self) -> float:
        return self.successes / self.trials

    @property
    def sigma(self) -> float:
        """Binomial standard error at ``p_hat``."""
        p = self.p_hat
        return math.sqrt(p * (1 - p) / self.trials)

    def wilson(self, confidence: float = 0.95) -> tuple[float, float]:
        ci = binomtest(self.successes, self.trials).proportion_ci(confidence, method="wilson")
        return float(ci.low), float(ci.high)

    def z_score(self, p_true: float) -> float:
        """Deviation of ``p_hat`` from ``p_true`` in binomial sigmas at ``p_true``."""
        if not 0.0 <= p_true <= 1.0:
            raise ValueError(f"p_true = {p_true!r} is not a probability")
        sd = math.sqrt(p_true * (1 - p_true) / self.trials)
        if sd == 0.0:
            return 0.0 if self.p_hat == p_true else math.inf
        return (self.p_hat - p_true) / sd

    def merge(self, other: MCEstimate) -> MCEstimate:
        if (self.estimator, self.n, self.polygon_hash) != (other.estimator, other.n, other.polygon_hash):
            raise ValueError("cannot merge estimates of different quantities")
        return MCEstimate(
            self.estimator, self.n, self.trials + other.trials,
            self.successes + other.successes, self.seed, self.polygon_hash,
        )

    def csv_row(self) -> list:
        lo, hi = self.wilson()
        return [self.estimator, self.polygon_hash, self.n, self.trials, self.successes,
                repr(self.p_hat), repr(lo), repr(hi), self.seed]


CSV_HEADER = ["estimator", "polygon_hash", "n", "trials", "successes", "p_hat",
              "ci_low", "ci_high", "seed"]


def polygon_hash(polygon: Polygon) -> str:
    return hashlib.sha256(polygon.vertices.tobytes()).hexdigest()[:12]


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Stream for block ``block``; independent of how blocks are spread over workers."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def _blocks(trials: int):
    full, rest = divmod(trials, BLOCK)
    return [BLOCK] * full + ([rest] if rest else [])


def _run(task, args, trials: int, seed: int, workers: int) -> np.ndarray:
    jobs = [(task, args, size, seed, b) for b, size in enumerate(_blocks(trials))]
    if workers <= 1 or len(jobs) == 1:
        parts = [_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return np.sum(parts, axis=0)


def _job(job):
    task, args, size, seed, block = job
    return task(*args, size, block_rng(seed, block))


# ----------------------------------------------------------------- the tasks


def _convex_task(polygon: Polygon, n: int, size: int, rng) -> np.ndarray:
    pts = _sample(polygon, rng, (size, n))
    return np.array([np.count_nonzero(convex_position_mask(pts))])


BIPOINTED_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])


def _bipointed_task(n: int, size: int, rng) -> np.ndarray:
    tri = Polygon(BIPOINTED_TRIANGLE)
    pts = _sample(tri, rng, (size, n))
    anchors = np.broadcast_to(BIPOINTED_TRIANGLE[:2], (size, 2, 2))
    return np.array([np.count_nonzero(convex_position_mask(np.concatenate([anchors, pts], axis=1)))])


def _full_sided_task(polygon: Polygon, n: int, size: int, rng) -> np.ndarray:
    pts = _sample(polygon, rng, (size, n))
    convex = convex_position_mask(pts)
    ell = polygon.side_distances(pts).min(axis=1)
    c = side_lengths_formula(polygon, ell)
    full = convex & np.all(c > FULL_SIDED_RTOL * polygon.diameter, axis=1)
    return np.array([np.count_nonzero(convex), np.count_nonzero(full)])


def estimate_convex_probability(polygon: Polygon, n: int, trials: int, seed: int = 0,
                                workers: int = 1) -> MCEstimate:
    """Fraction of ``trials`` uniform ``n``-tuples in ``polygon`` that are in convex position."""
    if n < 3 or trials < 1:
        raise ValueError("need n >= 3 and trials >= 1")
    (hits,) = _run(_convex_task, (polygon, n), trials, seed, workers)
    return MCEstimate("convex", n, trials, int(hits), seed, polygon_hash(polygon))


def estimate_bipointed(n: int, trials: int, seed: int = 0, workers: int = 1) -> MCEstimate:
    """Probability that ``n`` uniform points of a triangle ABC are in convex position with A and B."""
    if n < 1 or trials < 1:
        raise ValueError("need n >= 1 and trials >= 1")
    (hits,) = _run(_bipointed_task, (n,), trials, seed, workers)
    return MCEstimate("bipointed", n, trials, int(hits), seed, "bipointed")


def estimate_full_sided(polygon: Polygon, n: int, trials: int, seed: int = 0,
                        workers: int = 1) -> tuple[MCEstimate, MCEstimate, float]:
    """Estimates of ``P_K(n)``, of the full-sided probability, and their ratio."""
    if n < 3 or trials < 1:
        raise ValueError("need n >= 3 and trials >= 1")
    convex, full = _run(_full_sided_task, (polygon, n), trials, seed, workers)
    h = polygon_hash(polygon)
    p = MCEstimate("convex", n, trials, int(convex), seed, h)
    pt = MCEstimate("full_sided", n, trials, int(full), seed, h)
    return p, pt, (full / convex if convex else math.nan)


def _conditioned_block(polygon: Polygon, n: int, size: int, seed: int, block: int) -> np.ndarray:
    """Accepted tuples of one block.

    Points are added one at a time to the surviving tuples. A new point keeps
    a convex polygon in convex position iff exactly one of its edges sees the
    point (two visible edges would swallow their common vertex), and it is then
    inserted into that edge; any prefix that fails already dooms the tuple.
    Accepted tuples are returned in counterclockwise order.
    """
    rng = block_rng(seed, block)
    q = _sample(polygon, rng, (size, 3))
    cw = _cross(q[:, 1] - q[:, 0], q[:, 2] - q[:, 0]) < 0
    q[cw] = q[cw][:, ::-1]
    x, y = np.ascontiguousarray(q[..., 0]), np.ascontiguousarray(q[..., 1])
    for k in range(3, n):
        if not len(x):
            break
        p = _sample(polygon, rng, (len(x),))
        px, py = p[:, :1], p[:, 1:]
        ex = np.roll(x, -1, axis=1) - x
        ey = np.roll(y, -1, axis=1) - y
        visible = ex * (py - y) < ey * (px - x)
        keep = np.count_nonzero(visible, axis=1) == 1
        x, y, px, py, visible = x[keep], y[keep], px[keep], py[keep], visible[keep]
        # rotate so the visible edge closes the cycle, then append the point
        rot = (np.arange(k)[None] + np.argmax(visible, axis=1)[:, None] + 1) % k
        x = np.hstack([np.take_along_axis(x, rot, axis=1), px])
        y = np.hstack([np.take_along_axis(y, rot, axis=1), py])
    return np.stack([x, y], axis=-1)


def sample_convex_position(polygon: Polygon, n: int, count: int, seed: int = 0,
                           workers: int = 1, block: int = BLOCK) -> np.ndarray:
    """``count`` uniform ``n``-tuples conditioned to be in convex position, shape (count, n, 2).

    Rejection sampling over deterministic blocks; the output is the first
    ``count`` accepted tuples in block order, whatever the number of workers.
    """
    if n > MAX_CONDITIONED_N:
        raise TooLarge(f"conditioned sampling is capped at n = {MAX_CONDITIONED_N}")
    if n < 3:
        raise ValueError("need n >= 3")
    out: list[np.ndarray] = []
    have = 0
    nxt = 0
    ex = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while have < count:
            ids = range(nxt, nxt + max(1, workers))
            nxt += len(ids)
            args = [(polygon, n, block, seed, b) for b in ids]
            parts = ex.map(_conditioned_star, args) if ex else map(_conditioned_star, args)
            for p in parts:
                out.append(p)
                have += len(p)
    finally:
        if ex:
            ex.shutdown()
    return np.concatenate(out)[:count]


def _conditioned_star(args):
    return _conditioned_block(*args)


# ------------------------------------------------------------------------ PCP


@dataclass(frozen=True, eq=False)
class PCPData:
    ell: np.ndarray
    c: np.ndarray
    c_formula: np.ndarray
    contact_idx: np.ndarray
    b: np.ndarray
    s: np.ndarray | None

    @property
    def full_sided(self) -> bool:
        return self.s is not None and bool(np.all(self.s + np.roll(self.s, 1) > 0))


def cl_matrix(polygon: Polygon) -> np.ndarray:
    """Matrix ``M`` with ``(M @ ell)[j]`` the length cut from side ``j`` by the offsets ``ell``."""
    k = polygon.kappa
    th = polygon.theta
    sin, cot = np.sin(th), 1.0 / np.tan(th)
    m = np.zeros((k, k))
    for j in range(k):
        m[j, j - 1] += 1.0 / sin[j - 1]
        m[j, (j + 1) % k] += 1.0 / sin[j]
        m[j, j] += cot[j - 1] + cot[j]
    return m


def side_lengths_formula(polygon: Polygon, ell) -> np.ndarray:
    """``c_j = r_j - cl_j(ell)``; vectorised over leading axes of ``ell``."""
    return polygon.r - np.asarray(ell, dtype=float) @ cl_matrix(polygon).T


def _clip(poly: list, normal, level, tol):
    """Sutherland-Hodgman step: keep ``normal . x >= level - tol``."""
    out = []
    if not poly:
        return out
    prev = poly[-1]
    dp = normal @ prev - level
    for cur in poly:
        dc = normal @ cur - level
        if dc >= -tol:
            if dp < -tol:
                out.append(prev + (cur - prev) * (dp / (dp - dc)))
            out.append(cur)
        elif dp >= -tol:
            out.append(prev + (cur - prev) * (dp / (dp - dc)))
        prev, dp = cur, dc
    return out


def pcp_by_clipping(polygon: Polygon, ell) -> tuple[np.ndarray, np.ndarray]:
    """Clip ``polygon`` by the inward offset half-planes; return (vertices, side-lengths).

    ``c_j`` is the total length of clipped edges lying on offset line ``j``.
    """
    tol = 1e-12 * polygon.diameter
    poly = [v for v in polygon.vertices]
    levels = polygon.offsets + np.asarray(ell, dtype=float)
    for j in range(polygon.kappa):
        poly = _clip(poly, polygon.normals[j], levels[j], tol)
    pts = np.array(poly) if poly else np.zeros((0, 2))
    c = np.zeros(polygon.kappa)
    for a, b in zip(pts, np.roll(pts, -1, axis=0)):
        for j in range(polygon.kappa):
            if (abs(polygon.normals[j] @ a - levels[j]) <= 1e3 * tol
                    and abs(polygon.normals[j] @ b - levels[j]) <= 1e3 * tol):
                c[j] += float(np.hypot(*(b - a)))
                break
    return pts, c


def compute_pcp(polygon: Polygon, points) -> PCPData:
    """Side-distances, side-lengths, contact points and size-vector of a point set.

    ``s`` is ``None`` unless the points are in convex position.
    """
    z = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(z) == 0:
        raise EmptyInput("no points given")
    tol = 1e-12 * polygon.diameter
    dist = polygon.side_distances(z)
    bad = np.nonzero(np.any(dist < -tol, axis=1))[0]
    if len(bad):
        raise PointOutsidePolygon(int(bad[0]), z[bad[0]])
    ell = np.maximum(dist.min(axis=0), 0.0)
    _, c = pcp_by_clipping(polygon, ell)
    c_formula = side_lengths_formula(polygon, ell)
    k = polygon.kappa
    contact = np.empty(k, dtype=int)
    for j in range(k):
        on = np.nonzero(dist[:, j] - ell[j] <= 1e3 * tol)[0]
        contact[j] = min(on, key=lambda i: (z[i, 0], z[i, 1]))
    levels = polygon.offsets + ell
    b = np.array([
        np.linalg.solve(np.array([polygon.normals[j], polygon.normals[(j + 1) % k]]),
                        [levels[j], levels[(j + 1) % k]])
        for j in range(k)
    ])
    s = None
    if len(z) < 3 or is_convex_position(z):
        order = convex_hull(z) if len(z) >= 3 else list(range(len(z)))
        if len(order) == len(z):
            pos = np.empty(len(z), dtype=int)
            pos[order] = np.arange(len(z))
            p = pos[contact]
            s = np.mod(np.roll(p, -1) - p, len(z))
    return PCPData(ell=ell, c=c, c_formula=c_formula, contact_idx=contact, b=b, s=s)


# ------------------------------------------------------------------ densities


def size_vectors(kappa: int, n: int) -> np.ndarray:
    """All nonnegative ``s`` with ``sum(s) = n`` and no two cyclically adjacent zeros."""
    out = []
    for bars in itertools.combinations(range(n + kappa - 1), kappa - 1):
        edges = (-1,) + bars + (n + kappa - 1,)
        s = [edges[i + 1] - edges[i] - 1 for i in range(kappa)]
        if all(s[j] + s[j - 1] > 0 for j in range(kappa)):
            out.append(s)
    return np.array(out, dtype=int).reshape(-1, kappa)


def _check_size_vector(s, kappa: int, n: int) -> np.ndarray:
    s = np.asarray(s)
    if (s.shape != (kappa,) or np.any(s < 0) or np.any(s != np.round(s))
            or int(s.sum()) != n or np.any(s + np.roll(s, 1) == 0)):
        raise InvalidSizeVector(f"{s.tolist()} is not a size-vector for kappa={kappa}, n={n}")
    return s.astype(int)


def _exponents(s: np.ndarray, convention: str) -> np.ndarray:
    if convention == "statement":
        return s + np.roll(s, 1) - 1  # side j shared by corners j-1 and j
    if convention == "proof":
        return s + np.roll(s, -1) - 1
    raise ValueError(f"unknown convention {convention!r}")


def _log_coeff(polygon: Polygon, s: np.ndarray, n: int, e: np.ndarray) -> float:
    return (math.lgamma(n + 1) - n * math.log(polygon.area)
            + float(np.sum((s - 1) * np.log(np.sin(polygon.theta))))
            - sum(math.lgamma(x + 1) for x in s) - sum(math.lgamma(x + 1) for x in e))


def density_unnormalized(polygon: Polygon, ell, s, n: int, convention: str = "statement"):
    """Joint density of (side-distances, size-vector) times the full-sided probability.

    ``n! Area^{-n} prod_j sin(theta_j)^{s_j-1} c_j^{e_j} / (s_j! e_j!)`` with
    ``e_j = s_{j-1} + s_j - 1``; zero outside the feasible region ``c >= 0``.
    Vectorised over the leading axes of ``ell``.
    """
    s = _check_size_vector(s, polygon.kappa, n)
    e = _exponents(s, convention)
    ell = np.asarray(ell, dtype=float)
    c = side_lengths_formula(polygon, ell)
    feasible = np.all(c >= 0, axis=-1) & np.all(ell >= 0, axis=-1)
    with np.errstate(divide="ignore"):
        logv = _log_coeff(polygon, s, n, e) + np.sum(xlogy(e, np.maximum(c, 0.0)), axis=-1)
    out = np.where(feasible, np.exp(logv), 0.0)
    return float(out) if out.ndim == 0 else out


def feasible_region(polygon: Polygon) -> np.ndarray:
    """Vertices of ``{ell >= 0, c(ell) >= 0}``."""
    k = polygon.kappa
    m = cl_matrix(polygon)
    # rows a, b with a . x + b <= 0
    hs = np.vstack([np.hstack([-np.eye(k), np.zeros((k, 1))]),
                    np.hstack([m, -polygon.r[:, None]])])
    t = 0.5 * float(np.min(polygon.r / m.sum(axis=1)))
    return HalfspaceIntersection(hs, np.full(k, t)).intersections


def simplex_rule(dim: int, npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed Gauss-Jacobi rule on the unit simplex, exact to degree ``2 npts - 1``."""
    nodes, weights = [], []
    for i in range(dim):
        alpha = dim - 1 - i
        x, w = roots_jacobi(npts, alpha, 0.0)
        nodes.append((x + 1) / 2)
        weights.append(w / 2 ** (alpha + 1))
    u = np.stack(np.meshgrid(*nodes, indexing="ij"), axis=-1).reshape(-1, dim)
    w = np.prod(np.stack(np.meshgrid(*weights, indexing="ij"), axis=-1).reshape(-1, dim), axis=1)
    y = np.empty_like(u)
    rest = np.ones(len(u))
    for i in range(dim):
        y[:, i] = rest * u[:, i]
        rest = rest * (1 - u[:, i])
    return y, w


def polytope_rule(vertices: np.ndarray, npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes and weights over a convex polytope, by coning its facets to the centroid."""
    hull = ConvexHull(vertices)
    centre = vertices.mean(axis=0)
    y, w = simplex_rule(vertices.shape[1], npts)
    nodes, weights = [], []
    for facet in hull.simplices:
        edges = vertices[facet] - centre
        vol = abs(np.linalg.det(edges))
        nodes.append(centre + y @ edges)
        weights.append(w * vol)
    return np.concatenate(nodes), np.concatenate(weights)


def ptilde_quadrature(polygon: Polygon, n: int, convention: str = "statement") -> float:
    """Probability that ``n`` uniform points are in convex position with a full-sided PCP.

    Sum over size-vectors of the integral of :func:`density_unnormalized` over
    the feasible polytope. The integrand is a polynomial of degree ``2n - kappa``
    there, so the simplex rule used is exact up to rounding.
    """
    k = polygon.kappa
    if k > QUAD_MAX_KAPPA or n > QUAD_MAX_N:
        raise TooLarge(f"quadrature is capped at kappa <= {QUAD_MAX_KAPPA}, n <= {QUAD_MAX_N}")
    degree = 2 * n - k + 2
    nodes, weights = polytope_rule(feasible_region(polygon), degree // 2 + 1)
    c = np.maximum(side_lengths_formula(polygon, nodes), 0.0)
    with np.errstate(divide="ignore"):
        logc = np.log(c)
    total = 0.0
    for s in size_vectors(k, n):
        e = _exponents(s, convention)
        vals = np.exp(_log_coeff(polygon, s, n, e) + np.where(e > 0, logc * e, 0.0).sum(axis=1))
        total += float(weights @ vals)
    return total


def limit_density(model: AsymptoticModel, ell_bar, x) -> np.ndarray:
    """Limit joint density of the rescaled side-distances and size-vector fluctuations.

    Independent exponentials with rates ``model.m_rates`` times a centred
    Gaussian with precision ``model.sigma_inv``. Vectorised over leading axes.
    """
    m = model.m_rates
    ell_bar = np.asarray(ell_bar, dtype=float)
    x = np.asarray(x, dtype=float)
    k1 = model.sigma_inv.shape[0]
    expo = np.where(np.all(ell_bar >= 0, axis=-1),
                    np.prod(m * np.exp(-m * np.maximum(ell_bar, 0.0)), axis=-1), 0.0)
    quad = np.einsum("...i,ij,...j->...", x, model.sigma_inv, x)
    gauss = math.sqrt(model.d_K / (2 * math.pi) ** k1) * np.exp(-0.5 * quad)
    out = expo * gauss
    return float(out) if np.ndim(out) == 0 else out


# ------------------------------------------------------------------ hausdorff


def _directions(count: int) -> np.ndarray:
    a = 2 * math.pi * np.arange(count) / count
    return np.column_stack([np.cos(a), np.sin(a)])


def hausdorff_batch(shape: LimitShape, batch, n_dirs: int = 4096, chunk: int = 512) -> np.ndarray:
    """Hausdorff distance between the hull of each tuple and the limit shape.

    Uses ``d_H(A, B) = max_u |h_A(u) - h_B(u)|`` for convex sets, with the
    support functions evaluated on ``n_dirs`` equally spaced directions; the
    arc support is exact per direction. Angular discretisation error is at
    most ``pi / n_dirs`` times the largest distance of a point to the origin.
    """
    batch = np.asarray(batch, dtype=float)
    if batch.ndim == 2:
        batch = batch[None]
    u = _directions(n_dirs)
    origin = shape.points.mean(axis=0)
    h_dom = shape.support(u) - u @ origin
    out = np.empty(len(batch))
    for lo in range(0, len(batch), chunk):
        z = batch[lo:lo + chunk] - origin
        h = np.max(z @ u.T, axis=1)  # (chunk, n_dirs)
        out[lo:lo + chunk] = np.max(np.abs(h - h_dom), axis=1)
    return out


def hausdorff_to_limit_shape(shape: LimitShape, points, n_dirs: int = 4096) -> float:
    return float(hausdorff_batch(shape, np.asarray(points, dtype=float)[None], n_dirs)[0])
