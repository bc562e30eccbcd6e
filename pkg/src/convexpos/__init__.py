"""Convex position of random points in a convex polygon: limit shapes and asymptotics."""

from .asymptotics import AsymptoticModel, build_model, exact_reference, log_exact
from .domfinder import DomReport, find_dom
from .errors import ConvexPosError
from .geom import Polygon, is_convex_position, load_polygon, regular_polygon, sample_uniform
from .limitshape import LimitShape, build_limit_shape
from .mc import (
    MCEstimate,
    PCPData,
    compute_pcp,
    density_unnormalized,
    estimate_bipointed,
    estimate_convex_probability,
    estimate_full_sided,
    hausdorff_to_limit_shape,
    limit_density,
    ptilde_quadrature,
    sample_convex_position,
)
from .pssolver import PSSolution, solve_polygon, solve_ps

__version__ = "0.1.0"

__all__ = [
    "AsymptoticModel", "ConvexPosError", "DomReport", "LimitShape", "MCEstimate", "PCPData",
    "PSSolution", "Polygon", "build_limit_shape", "build_model", "compute_pcp",
    "density_unnormalized", "estimate_bipointed", "estimate_convex_probability",
    "estimate_full_sided", "exact_reference", "find_dom", "hausdorff_to_limit_shape",
    "is_convex_position", "limit_density", "load_polygon", "log_exact", "ptilde_quadrature",
    "regular_polygon", "sample_convex_position", "sample_uniform", "solve_polygon", "solve_ps",
]
