"""
Value objects shared across the package: model parameters, Monte Carlo
configuration and estimates.

They are pydantic models so that run records serialize them verbatim.
"""

import math
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .streams import check_seed


class ModelParams(BaseModel):
    """Parameters (β, λ, h, N) of the fully Gaussian spin glass."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    beta: float = Field(..., ge=0.0, description="inverse temperature")
    lam: float = Field(0.0, alias="lambda", description="variance shift λ")
    h: float = Field(0.0, description="external field")
    n_sites: int = Field(..., ge=1)
    diagonal_removed: bool = Field(False, description="use Z' (no diagonal couplings)")

    @field_validator("beta", "lam", "h")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError(f"parameter must be finite, got {value}")
        return value

    @property
    def beta_lambda(self) -> float:
        """Effective inverse temperature β/(1−λ) (only meaningful for λ < 1)."""
        return self.beta / (1.0 - self.lam)

    def with_sites(self, n_sites: int) -> "ModelParams":
        return self.model_copy(update={"n_sites": n_sites})

    def with_beta(self, beta: float) -> "ModelParams":
        return self.model_copy(update={"beta": beta})


class Scheme(str, Enum):
    """How per-sample log-partition values are produced."""
    quadrature_if_small = "quadrature_if_small"
    radial_mc = "radial_mc"


class McConfig(BaseModel):
    """Sampling configuration for the quenched engines."""

    model_config = ConfigDict(frozen=True)

    n_disorder: int = Field(200, ge=1)
    n_directions: int = Field(4096, ge=1)
    radial_points: int = Field(512, ge=1)
    seed: int = 20240601
    scheme: Scheme = Scheme.quadrature_if_small
    quadrature_max_n: int = Field(3, ge=1, le=3)
    sphere_points: int = Field(48, ge=4, description="angular nodes per axis for quadrature moments")
    bias_correction: bool = True
    max_skip_fraction: float = Field(0.01, ge=0.0, le=1.0)
    workers: Optional[int] = Field(None, ge=1, description="never affects results")

    @field_validator("seed")
    @classmethod
    def _seed_range(cls, value: int) -> int:
        return check_seed(value)

    def use_quadrature(self, n_sites: int) -> bool:
        return self.scheme == Scheme.quadrature_if_small and n_sites <= self.quadrature_max_n


class McEstimate(BaseModel):
    """Mean and standard error of a stochastic quantity."""

    model_config = ConfigDict(frozen=True)

    mean: float
    std_error: float = Field(..., ge=0.0)
    n_samples: int = Field(..., ge=1)
    n_skipped: int = Field(0, ge=0)

    def within(self, target: float, n_sigma: float = 3.0, slack: float = 0.0) -> bool:
        """True if ``target`` lies inside ``mean ± (n_sigma·SE + slack)``."""
        return abs(self.mean - target) <= n_sigma * self.std_error + slack

    def at_most(self, bound: float, n_sigma: float = 3.0, slack: float = 0.0) -> bool:
        """One-sided check ``mean <= bound + n_sigma·SE + slack``."""
        return self.mean <= bound + n_sigma * self.std_error + slack

    def at_least(self, bound: float, n_sigma: float = 3.0, slack: float = 0.0) -> bool:
        return self.mean >= bound - n_sigma * self.std_error - slack

    def __str__(self) -> str:
        return f"{self.mean:.6g} ± {self.std_error:.2g} (n={self.n_samples})"
