import math

import numpy as np
import pytest
from hypothesis import strategies as st

from convexpos.geom import Polygon, random_convex_polygon

UNIT_SQUARE = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
TRUNCATED_SQUARE = [[0.1, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.1]]
EQUILATERAL_SIDE = 2.0 * 3.0 ** -0.25  # area 1


def equilateral_vertices():
    s = EQUILATERAL_SIDE
    return [[0.0, 0.0], [s, 0.0], [s / 2, s * math.sqrt(3) / 2]]


@pytest.fixture
def square():
    return Polygon(np.array(UNIT_SQUARE))


@pytest.fixture
def truncated():
    return Polygon(np.array(TRUNCATED_SQUARE))


@pytest.fixture
def triangle():
    return Polygon(np.array(equilateral_vertices()))


@st.composite
def polygons(draw, min_sides=3, max_sides=10):
    """Random convex polygons, affinely distorted."""
    kappa = draw(st.integers(min_sides, max_sides))
    seed = draw(st.integers(0, 2**63 - 1))
    return random_convex_polygon(kappa, np.random.default_rng(seed))


def random_polygons(count, seed, kappas=range(3, 13)):
    rng = np.random.default_rng(seed)
    kappas = list(kappas)
    return [random_convex_polygon(kappas[i % len(kappas)], rng) for i in range(count)]
