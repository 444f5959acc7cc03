"""Exception hierarchy shared by all modules."""


class WellgeoError(Exception):
    """Base class for errors raised by wellgeo."""


class ArgumentError(WellgeoError, ValueError):
    """Invalid argument: wrong dimension, bad index, inconsistent options."""


class EvaluationError(WellgeoError, ArithmeticError):
    """A potential or expression could not be evaluated at the requested point."""

    def __init__(self, message, subexpression=None):
        super().__init__(message)
        self.subexpression = subexpression


class DegenerateInteriorError(WellgeoError):
    """A curve touches the zero set of W away from its endpoints."""


class SolverError(WellgeoError):
    """The geodesic solver hit a numerical failure (NaN, inf)."""


class GeometryError(WellgeoError):
    """Well neighbourhoods overlap or a curve is otherwise geometrically unusable."""


class UnsupportedDimensionError(WellgeoError):
    """The requested operation does not support the ambient dimension."""
