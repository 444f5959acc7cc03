"""Geodesics of the degenerate metric sqrt(W)|dp| for multi-well potentials W,
and the heteroclinic orbits of U'' = grad W(U) they induce."""

__version__ = "0.1.0"

from .curve import DiscreteCurve, weighted_length
from .errors import (
    ArgumentError,
    DegenerateInteriorError,
    EvaluationError,
    GeometryError,
    SolverError,
    UnsupportedDimensionError,
    WellgeoError,
)
from .geodesic import GeodesicResult, SolveOptions, minimize_E
from .heteroclinic import HeteroclinicProfile, connect, equipartition_reparametrize
from .metric import distance, distance_matrix, obstruction_report, split_at_wells, sweep_epsilon
from .oracle import GridSpec, grid_distance
from .potential import (
    Potential,
    load_potential,
    make_alikakos_fusco,
    make_builtin,
    make_double_well,
    make_oscillatory,
    make_six_well,
)

__all__ = [
    "ArgumentError",
    "DegenerateInteriorError",
    "DiscreteCurve",
    "EvaluationError",
    "GeodesicResult",
    "GeometryError",
    "GridSpec",
    "HeteroclinicProfile",
    "Potential",
    "SolveOptions",
    "SolverError",
    "UnsupportedDimensionError",
    "WellgeoError",
    "connect",
    "distance",
    "distance_matrix",
    "equipartition_reparametrize",
    "grid_distance",
    "load_potential",
    "make_alikakos_fusco",
    "make_builtin",
    "make_double_well",
    "make_oscillatory",
    "make_six_well",
    "minimize_E",
    "obstruction_report",
    "split_at_wells",
    "sweep_epsilon",
    "weighted_length",
]
