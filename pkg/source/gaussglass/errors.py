"""
Exception hierarchy shared by every gaussglass module.

Domain violations are raised as ``ValueError`` subclasses so callers that only
know the standard library still catch them; numerical failures carry a
``diagnostics`` dictionary describing where the computation gave up.
"""

from typing import Any, Dict, Optional


class GaussGlassError(Exception):
    """Base class for all gaussglass errors"""
    pass


class DomainError(GaussGlassError, ValueError):
    """A parameter lies outside the domain of the requested formula"""
    pass


class DimensionError(GaussGlassError, ValueError):
    """Vector or matrix sizes do not match"""
    pass


class NumericError(GaussGlassError, ArithmeticError):
    """A numerical procedure failed (non-finite values, no convergence)"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DivergenceError(NumericError):
    """A quantity diverges: finite-time blow-up or critical line reached"""

    def __init__(
        self,
        message: str,
        blowup_time: Optional[float] = None,
        diagnostics: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message, diagnostics)
        self.blowup_time = blowup_time


class SingularFunctionalError(NumericError):
    """The broken-replica denominator vanishes somewhere on [0, Q]"""

    def __init__(self, message: str, q: float, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message, diagnostics)
        self.q = q
