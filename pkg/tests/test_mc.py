import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from convexpos.asymptotics import build_model, exact_fraction
from convexpos.domfinder import find_dom
from convexpos.errors import EmptyInput, InvalidSizeVector, PointOutsidePolygon, TooLarge
from convexpos.geom import Polygon, convex_position_mask, random_convex_polygon, regular_polygon
from convexpos.mc import (
    BLOCK,
    CSV_HEADER,
    MCEstimate,
    _convex_task,
    block_rng,
    compute_pcp,
    density_unnormalized,
    estimate_bipointed,
    estimate_convex_probability,
    estimate_full_sided,
    feasible_region,
    hausdorff_batch,
    hausdorff_to_limit_shape,
    limit_density,
    pcp_by_clipping,
    polytope_rule,
    ptilde_quadrature,
    sample_convex_position,
    side_lengths_formula,
    simplex_rule,
    size_vectors,
)

from .conftest import polygons

SQ_POINTS = [[0.2, 0.1], [0.9, 0.5], [0.4, 0.8]]


# ------------------------------------------------------------------ estimates


def test_estimate_invariants():
    e = MCEstimate("convex", 4, 1000, 700, 0)
    lo, hi = e.wilson()
    assert lo < e.p_hat < hi
    assert e.sigma == pytest.approx(math.sqrt(0.7 * 0.3 / 1000))
    with pytest.raises(ValueError):
        MCEstimate("convex", 4, 10, 11, 0)
    m = e.merge(MCEstimate("convex", 4, 500, 300, 1))
    assert (m.trials, m.successes) == (1500, 1000)
    with pytest.raises(ValueError):
        e.merge(MCEstimate("convex", 5, 500, 300, 1))
    with pytest.raises(ValueError):
        e.z_score(1.2)


def test_edge_wilson_intervals():
    lo, hi = MCEstimate("x", 1, 100, 100, 0).wilson()
    assert hi == 1.0 and lo < 1.0
    lo, hi = MCEstimate("x", 1, 100, 0, 0).wilson()
    assert lo == 0.0 and hi > 0.0


def test_csv_row():
    row = MCEstimate("convex", 4, 1000, 700, 3, "abc").csv_row()
    assert len(row) == len(CSV_HEADER)
    assert row[:5] == ["convex", "abc", 4, 1000, 700] and row[-1] == 3
    assert float(row[5]) == 0.7


def test_shard_determinism(square):
    trials = 3 * BLOCK + 17
    single = estimate_convex_probability(square, 5, trials, seed=9, workers=1)
    multi = estimate_convex_probability(square, 5, trials, seed=9, workers=3)
    assert single.successes == multi.successes
    # the total is the sum of per-block counts, each from its own derived stream
    sizes = [BLOCK, BLOCK, BLOCK, 17]
    manual = sum(int(_convex_task(square, 5, s, block_rng(9, b))[0]) for b, s in enumerate(sizes))
    assert manual == single.successes
    assert estimate_convex_probability(square, 5, trials, seed=10).successes != single.successes


@pytest.mark.parametrize(
    "shape, n",
    [("square", 4), ("square", 5), ("triangle", 4)],
)
def test_convex_probability_small(square, triangle, shape, n):
    poly = square if shape == "square" else triangle
    e = estimate_convex_probability(poly, n, 200_000, seed=n)
    assert abs(e.z_score(float(exact_fraction(shape, n)))) < 4


def test_bipointed():
    assert estimate_bipointed(1, 10_000, seed=1).successes == 10_000
    for n in (2, 3):
        e = estimate_bipointed(n, 200_000, seed=n)
        assert abs(e.z_score(float(exact_fraction("bipointed", n)))) < 4


# ------------------------------------------------------------------------ PCP


def test_pcp_square_example(square):
    d = compute_pcp(square, SQ_POINTS)
    np.testing.assert_allclose(d.ell, [0.1, 0.1, 0.2, 0.2], atol=1e-15)
    np.testing.assert_allclose(d.c, 0.7, atol=1e-15)
    np.testing.assert_allclose(d.c_formula, 0.7, atol=1e-15)
    assert d.s.tolist() == [1, 1, 1, 0]
    assert d.contact_idx.tolist() == [0, 1, 2, 0]
    np.testing.assert_allclose(d.b, [[0.9, 0.1], [0.9, 0.8], [0.2, 0.8], [0.2, 0.1]], atol=1e-15)
    assert d.full_sided


def test_pcp_single_point(square):
    d = compute_pcp(square, [[0.3, 0.6]])
    np.testing.assert_allclose(d.c, 0.0, atol=1e-12)
    np.testing.assert_allclose(d.b, np.tile([0.3, 0.6], (4, 1)), atol=1e-15)
    assert d.contact_idx.tolist() == [0, 0, 0, 0]
    assert d.s.tolist() == [0, 0, 0, 0]
    assert not d.full_sided


def test_pcp_lexicographic_contact(square):
    # two points tie for the bottom side; the lexicographically smaller one wins
    d = compute_pcp(square, [[0.7, 0.1], [0.3, 0.1], [0.5, 0.9]])
    assert d.contact_idx[0] == 1


def test_pcp_not_convex(square):
    d = compute_pcp(square, SQ_POINTS + [[0.5, 0.5]])
    assert d.s is None and not d.full_sided
    np.testing.assert_allclose(d.c, 0.7, atol=1e-15)


def test_pcp_errors(square):
    with pytest.raises(EmptyInput):
        compute_pcp(square, [])
    with pytest.raises(PointOutsidePolygon) as exc:
        compute_pcp(square, [[0.5, 0.5], [1.5, 0.5]])
    assert exc.value.index == 1


@given(polygons(3, 9), st.integers(0, 2**32 - 1), st.integers(3, 7))
@settings(max_examples=60, deadline=None)
def test_pcp_oracles(p, seed, n):
    z = sample_convex_position(p, n, 1, seed=seed)[0]
    rng = np.random.default_rng(seed)
    z = z[rng.permutation(n)]
    d = compute_pcp(p, z)
    tol = 1e-9 * p.diameter
    np.testing.assert_allclose(d.c, d.c_formula, atol=tol)
    assert np.all(d.c_formula >= -tol)
    assert d.s is not None and d.s.sum() == n
    zero_pair = (d.s + np.roll(d.s, 1)) == 0
    np.testing.assert_array_equal(d.c <= tol, zero_pair)
    # the PCP contains every point and has its sides on the offset lines
    verts, _ = pcp_by_clipping(p, d.ell)
    assert np.all(p.side_distances(z) - d.ell >= -tol)
    assert np.all(np.abs(p.side_distances(d.b) - d.ell)[np.arange(p.kappa), np.arange(p.kappa)] < tol)


# ------------------------------------------------------------------ full-sided


def test_parallelogram_always_full_sided():
    """The PCP of a point set in a parallelogram is its bounding parallelogram."""
    para = Polygon(np.array([[0, 0], [2, 0], [3, 1], [1, 1]]))
    for n in (3, 4, 6):
        p, pt, frac = estimate_full_sided(para, n, 50_000, seed=n)
        assert pt.successes == p.successes and frac == 1.0


def test_triangle_always_full_sided(triangle):
    p, pt, frac = estimate_full_sided(triangle, 3, 50_000, seed=1)
    assert frac == 1.0 and p.successes == 50_000


def test_pentagon_full_sided_trend():
    pent = regular_polygon(5)
    fracs = [estimate_full_sided(pent, n, 400_000, seed=5)[2] for n in (3, 4, 6, 8)]
    assert 0 < fracs[0] < 1
    assert all(a < b for a, b in zip(fracs, fracs[1:]))


def test_pentagon_n3_baseline():
    # recorded once with 10^6 trials, seed 5: 707990 / 10^6
    p, pt, frac = estimate_full_sided(regular_polygon(5), 3, 200_000, seed=123)
    assert abs(pt.z_score(0.70799)) < 4


# ------------------------------------------------------------------ densities


def test_size_vectors():
    assert size_vectors(3, 3).tolist() == [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 1, 1], [1, 2, 0], [2, 0, 1], [2, 1, 0]]
    for k, n in [(3, 5), (4, 4), (4, 7), (5, 6)]:
        brute = [s for s in itertools.product(range(n + 1), repeat=k)
                 if sum(s) == n and all(s[j] + s[j - 1] > 0 for j in range(k))]
        assert sorted(map(tuple, size_vectors(k, n).tolist())) == sorted(brute)


def test_density_example(square):
    assert density_unnormalized(square, np.zeros(4), [1, 1, 1, 0], 3) == pytest.approx(6.0, rel=1e-14)
    assert density_unnormalized(square, [0.6, 0.0, 0.6, 0.0], [1, 1, 1, 0], 3) == 0.0
    ell = np.random.default_rng(0).random((5, 7, 4)) * 0.5
    out = density_unnormalized(square, ell, [1, 1, 1, 0], 3)
    assert out.shape == (5, 7)
    assert np.all(out[np.any(side_lengths_formula(square, ell) < 0, axis=-1)] == 0)


@pytest.mark.parametrize("s, n", [([1, 1, 1, 1], 3), ([2, 0, 0, 1], 3), ([-1, 2, 1, 1], 3), ([1, 1, 1], 3), ([1.5, 0.5, 1, 0], 3)])
def test_density_invalid_size_vector(square, s, n):
    with pytest.raises(InvalidSizeVector):
        density_unnormalized(square, np.zeros(4), s, n)


def test_density_scales_with_area(square):
    big = Polygon(square.vertices * 2.0)
    a = density_unnormalized(square, [0.1, 0.2, 0.05, 0.3], [1, 2, 1, 1], 5)
    b = density_unnormalized(big, [0.2, 0.4, 0.1, 0.6], [1, 2, 1, 1], 5)
    # lengths double, densities in ell (4 dims) scale by 2^-4
    assert b == pytest.approx(a / 16, rel=1e-12)


@pytest.mark.parametrize("dim, npts", [(1, 3), (2, 4), (3, 3), (4, 2)])
def test_simplex_rule_exact(dim, npts):
    y, w = simplex_rule(dim, npts)
    assert w.sum() == pytest.approx(1 / math.factorial(dim), rel=1e-13)
    # Dirichlet integrals of monomials of total degree <= 2 npts - 1
    for a in itertools.product(range(2 * npts), repeat=dim):
        if sum(a) > 2 * npts - 1:
            continue
        exact = math.prod(math.factorial(x) for x in a) / math.factorial(sum(a) + dim)
        assert w @ np.prod(y**np.array(a), axis=1) == pytest.approx(exact, rel=1e-12)


def test_polytope_rule_volume():
    rng = np.random.default_rng(3)
    for p in [random_convex_polygon(k, rng) for k in (3, 4)]:
        verts = feasible_region(p)
        nodes, w = polytope_rule(verts, 2)
        assert w.sum() == pytest.approx(ConvexHull(verts).volume, rel=1e-12)
        c = side_lengths_formula(p, nodes)
        assert np.all(c >= -1e-12) and np.all(nodes >= -1e-12)


@pytest.mark.parametrize("n", range(3, 9))
def test_quadrature_matches_triangle_formula(triangle, n):
    """In a triangle every convex configuration is full-sided, so the two agree."""
    assert ptilde_quadrature(triangle, n) == pytest.approx(float(exact_fraction("triangle", n)), rel=1e-12)


@pytest.mark.parametrize("n", range(3, 8))
def test_quadrature_matches_square_formula(square, n):
    assert ptilde_quadrature(square, n) == pytest.approx(float(exact_fraction("square", n)), rel=1e-12)


def test_quadrature_affine_invariant(triangle):
    skew = Polygon(np.array([[0, 0], [3, 0], [1, 2]]))
    assert ptilde_quadrature(skew, 5) == pytest.approx(ptilde_quadrature(triangle, 5), rel=1e-12)


def test_quadrature_vs_mc_quadrilateral():
    quad = random_convex_polygon(4, np.random.default_rng(3))
    for n in (4, 5):
        q = ptilde_quadrature(quad, n)
        p, pt, _ = estimate_full_sided(quad, n, 200_000, seed=n)
        assert abs(pt.z_score(q)) < 4
        assert q <= p.wilson(0.9999)[1]


def test_quadrature_guards(square):
    with pytest.raises(TooLarge):
        ptilde_quadrature(regular_polygon(5), 4)
    with pytest.raises(TooLarge):
        ptilde_quadrature(square, 9)


def test_limit_density_at_origin(square):
    model = build_model(square)
    v = limit_density(model, np.zeros(4), np.zeros(3))
    assert v == pytest.approx(math.sqrt(1024 / (2 * math.pi) ** 3), rel=1e-12)
    assert v == pytest.approx(2.0317963, abs=1e-7)
    assert limit_density(model, [-0.1, 0, 0, 0], np.zeros(3)) == 0.0
    batch = limit_density(model, np.zeros((6, 4)), np.zeros((6, 3)))
    np.testing.assert_allclose(batch, v)


# ------------------------------------------------------------ conditioned / hausdorff


def test_conditioned_sampling(square):
    z = sample_convex_position(square, 6, 3000, seed=4)
    assert z.shape == (3000, 6, 2)
    assert np.all(convex_position_mask(z))
    assert np.all(square.contains(z.reshape(-1, 2)))
    np.testing.assert_array_equal(z, sample_convex_position(square, 6, 3000, seed=4, workers=2))
    with pytest.raises(TooLarge):
        sample_convex_position(square, 13, 1)


def test_conditioned_acceptance_rate(square):
    from convexpos.mc import _conditioned_block

    for n in (4, 6):
        acc = len(_conditioned_block(square, n, 200_000, 1, 0))
        p = float(exact_fraction("square", n))
        assert abs(acc - 200_000 * p) < 4 * math.sqrt(200_000 * p * (1 - p))


def _dist_to_convex(points, poly):
    """Distance from each point to a counterclockwise convex polygon (0 inside)."""
    a, b = poly, np.roll(poly, -1, axis=0)
    e = b - a
    rel = points[:, None, :] - a[None]
    inside = np.all(e[None, :, 0] * rel[..., 1] - e[None, :, 1] * rel[..., 0] >= 0, axis=1)
    t = np.clip(np.einsum("pkd,kd->pk", rel, e) / np.einsum("kd,kd->k", e, e), 0, 1)
    d = np.linalg.norm(rel - t[..., None] * e[None], axis=-1).min(axis=1)
    return np.where(inside, 0.0, d)


def _max_dist(points, poly, chunk=256):
    return max(_dist_to_convex(points[i:i + chunk], poly).max() for i in range(0, len(points), chunk))


def _hausdorff_oracle(shape, pts, per_arc=300, per_edge=300):
    curve = shape.sample(per_arc)
    hull = pts[ConvexHull(pts).vertices]
    t = np.linspace(0, 1, per_edge, endpoint=False)[:, None]
    border = np.concatenate([a + t * (b - a) for a, b in zip(hull, np.roll(hull, -1, axis=0))])
    return max(_max_dist(curve, hull), _max_dist(border, curve))


def test_hausdorff_self(square):
    shape = find_dom(square).limit_shape
    assert hausdorff_to_limit_shape(shape, shape.sample(512)) < 1e-5


@given(polygons(3, 7), st.integers(0, 2**32 - 1))
@settings(max_examples=10, deadline=None)
def test_hausdorff_matches_dense_oracle(p, seed):
    shape = find_dom(p).limit_shape
    z = sample_convex_position(p, 5, 4, seed=seed)
    got = hausdorff_batch(shape, z)
    want = [_hausdorff_oracle(shape, zz) for zz in z]
    np.testing.assert_allclose(got, want, atol=2e-3 * p.diameter)


def test_hausdorff_corner_triangle(square):
    shape = find_dom(square).limit_shape
    pts = np.array([[0.01, 0.01], [0.05, 0.01], [0.01, 0.05]])
    d = hausdorff_to_limit_shape(shape, pts)
    # the far tangency point (1, 0.5) is at distance ~1.03 from the corner triangle
    assert d == pytest.approx(_hausdorff_oracle(shape, pts), abs=2e-3)
    assert d > 0.9
