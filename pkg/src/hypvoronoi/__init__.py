"""Bernoulli percolation on Poisson-Voronoi tessellations of the hyperbolic plane."""

__version__ = "0.1.0"

from .discretization import SectorIndex, build_sector_index, locate_sector, sector_area
from .events import AlwaysTrue, OneArm, OwnerBlack
from .geometry import HPoint, hyp_ball_volume, hyp_distance
from .local import LocalTessellation
from .percolation import (
    EstimateResult,
    estimate_pc,
    estimate_theta,
    fit_decay,
    fkg_audit,
    mean_field_check,
    russo_audit,
    sharpness_grid,
    sharpness_ode_check,
    theta_curve,
)
from .sampling import ColoredConfig, RngStream, SectorField, sample_ppp
from .tessellation import Tessellation, build_delaunay_d2, owner_of

__all__ = [
    "__version__", "SectorIndex", "build_sector_index", "locate_sector", "sector_area",
    "AlwaysTrue", "OneArm", "OwnerBlack", "HPoint", "hyp_ball_volume", "hyp_distance",
    "LocalTessellation", "EstimateResult", "estimate_pc", "estimate_theta", "fit_decay",
    "fkg_audit", "mean_field_check", "russo_audit", "sharpness_grid", "sharpness_ode_check",
    "theta_curve", "ColoredConfig", "RngStream", "SectorField", "sample_ppp", "Tessellation",
    "build_delaunay_d2", "owner_of",
]
