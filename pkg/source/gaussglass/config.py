import logging

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from .params import McConfig, ModelParams, Scheme

logger = logging.getLogger(__name__)


class OutputFormat(str, Enum):
    csv = "csv"
    json = "json"


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="GAUSSGLASS_",
        env_file=".env",
        extra="ignore",
        case_sensitive=False,
    )

    SEED: int = 20240601

    # Quenched sampling
    SAMPLES: int = 200
    DIRECTIONS: int = 4096
    RADIAL_POINTS: int = 512
    QUADRATURE_MAX_N: int = 3
    SPHERE_POINTS: int = 48
    SCHEME: Scheme = Scheme.quadrature_if_small
    BIAS_CORRECTION: bool = True
    MAX_SKIP_FRACTION: float = 0.01

    # Worker count for disorder samples and RSB restarts (None = hardware parallelism)
    THREADS: Optional[int] = None

    # Interpolation and ODE resolution
    T_GRID: int = 11
    ODE_STEPS: int = 10000

    # Broken-replica infimum search
    RSB_LEVELS: int = 3
    RSB_RESTARTS: int = 16
    RSB_Q_MAX: float = 4.0

    # Optional on-disk store of run records
    RESULTS_DIR: Optional[str] = None
    RESULTS_MAX_SIZE_MB: float = 64.0

    # Run parameters; every command-line flag has a key here
    BETA: float = Field(0.5, ge=0.0)
    LAMBDA: float = 0.0
    H: float = 0.0
    N: int = Field(2, ge=1)
    DIAGONAL_REMOVED: bool = False
    FORMAT: OutputFormat = OutputFormat.json
    OUT: Optional[str] = None
    VERBOSE: bool = False
    SCAN_QUANTITY: str = "rs"
    BETA_RANGE: Tuple[float, float, int] = (0.1, 3.0, 30)
    LAMBDA_RANGE: Tuple[float, float, int] = (-1.0, 0.9, 20)
    Q_BAR: Optional[float] = None
    T: float = Field(0.5, ge=0.0, le=1.0)
    SPLIT: Optional[int] = None
    T_POINTS: int = Field(11, ge=2)
    MC: bool = False
    CURVE: bool = False
    ORDER_PARAMETER: Optional[str] = None
    VERIFY_LEVEL: str = "fast"
    HOST: str = "127.0.0.1"
    PORT: int = 8000

    def mc_config(self, **overrides: Any) -> McConfig:
        """Build the sampling configuration; ``overrides`` use McConfig field names."""
        values: Dict[str, Any] = {
            "n_disorder": self.SAMPLES,
            "n_directions": self.DIRECTIONS,
            "radial_points": self.RADIAL_POINTS,
            "seed": self.SEED,
            "scheme": self.SCHEME,
            "quadrature_max_n": self.QUADRATURE_MAX_N,
            "sphere_points": self.SPHERE_POINTS,
            "bias_correction": self.BIAS_CORRECTION,
            "max_skip_fraction": self.MAX_SKIP_FRACTION,
            "workers": self.THREADS,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return McConfig(**values)

    def model_params(self, **overrides: Any) -> ModelParams:
        values: Dict[str, Any] = {
            "beta": self.BETA,
            "lam": self.LAMBDA,
            "h": self.H,
            "n_sites": self.N,
            "diagonal_removed": self.DIAGONAL_REMOVED,
        }
        values.update(overrides)
        return ModelParams(**values)


def read_config_file(path: str) -> Dict[str, Any]:
    """
    Read a flat TOML configuration file.

    Keys are matched case-insensitively against ``Settings`` fields; nested
    tables are rejected because the schema is flat.

    Args:
        path: Path to the TOML file

    Returns:
        Dictionary of upper-cased keys to values
    """
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")

    with file_path.open("rb") as handle:
        raw = tomllib.load(handle)

    known = set(Settings.model_fields)
    values: Dict[str, Any] = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            raise ValueError(f"Config key '{key}' is a table; the config schema is flat")
        upper = key.upper()
        if upper not in known:
            logger.warning(f"Ignoring unknown config key '{key}' in {path}")
            continue
        values[upper] = value

    logger.debug(f"Loaded {len(values)} config values from {path}")
    return values


def load_settings(config_path: Optional[str] = None, **flags: Any) -> Settings:
    """
    Resolve settings with precedence flags > config file > environment > defaults.

    Args:
        config_path: Optional flat TOML file
        flags: Command-line values keyed by Settings field name; None means "not given"

    Returns:
        The resolved Settings
    """
    values: Dict[str, Any] = {}
    if config_path:
        values.update(read_config_file(config_path))
    values.update({k.upper(): v for k, v in flags.items() if v is not None})
    # Init kwargs outrank environment variables in pydantic-settings.
    return Settings(**values)
