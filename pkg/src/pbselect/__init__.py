"""Anytime algorithm selection for pseudo-Boolean optimization portfolios."""

__version__ = "0.1.0"

from .features import FeatureVector, extract_basic, extract_linear, extract_nonlinear
from .grid import TimestepGrid, make_grid
from .opb import Constraint, Instance, Term, is_linear, linearize, parse_opb, serialize

__all__ = [
    "Constraint",
    "FeatureVector",
    "Instance",
    "Term",
    "TimestepGrid",
    "extract_basic",
    "extract_linear",
    "extract_nonlinear",
    "is_linear",
    "linearize",
    "make_grid",
    "parse_opb",
    "serialize",
    "__version__",
]
