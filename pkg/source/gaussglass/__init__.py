"""Numerical laboratory for the fully Gaussian spin glass."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DimensionError,
    DivergenceError,
    DomainError,
    GaussGlassError,
    NumericError,
    SingularFunctionalError,
)
from .params import McConfig, McEstimate, ModelParams, Scheme  # noqa: E402

__all__ = [
    "DimensionError",
    "DivergenceError",
    "DomainError",
    "GaussGlassError",
    "McConfig",
    "McEstimate",
    "ModelParams",
    "NumericError",
    "Scheme",
    "SingularFunctionalError",
    "__version__",
]
