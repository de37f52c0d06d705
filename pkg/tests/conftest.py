import os

import pytest

from gaussglass.config import Settings
from gaussglass.params import McConfig, ModelParams, Scheme


@pytest.fixture
def quad_cfg() -> McConfig:
    """Quadrature per sample for N <= 3, few samples, serial."""
    return McConfig(n_disorder=12, n_directions=256, radial_points=128, sphere_points=24,
                    seed=1234, workers=1)


@pytest.fixture
def mc_cfg() -> McConfig:
    """Radial Monte Carlo at every N, few samples, serial."""
    return McConfig(n_disorder=12, n_directions=512, radial_points=128, seed=1234,
                    scheme=Scheme.radial_mc, workers=1)


@pytest.fixture
def params() -> ModelParams:
    return ModelParams(beta=0.5, lam=0.0, n_sites=2)


@pytest.fixture
def clean_env(tmp_path, monkeypatch):
    """Run from an empty directory with no GAUSSGLASS_ variables set."""
    monkeypatch.chdir(tmp_path)
    for key in list(os.environ):
        if key.startswith("GAUSSGLASS_"):
            monkeypatch.delenv(key)
    return tmp_path


@pytest.fixture
def settings(clean_env) -> Settings:
    """Settings isolated from the caller's environment and .env file."""
    return Settings(SAMPLES=8, DIRECTIONS=256, RADIAL_POINTS=128, SPHERE_POINTS=24, THREADS=1)
