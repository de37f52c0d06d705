"""
The fully Gaussian spin glass at finite N.

Spins are real, z ~ N(0, I_N), couplings J_ij are i.i.d. standard normal and the
partition function carries a quartic regularizer,

    Z_N = E_z exp( −βH(z, J) − β²/(4N) (Σ z_i²)² + λ/2 Σ z_i² ),

so that it is finite for every J. This module evaluates H, the exponent, overlaps
and log Z_N for a single disorder sample, either deterministically (N <= 3) or
by the stratified radial-spherical estimator.
"""

import json
import logging
import math
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import DimensionError, DomainError
from .params import McConfig, ModelParams
from .polar import (
    GibbsStream,
    PolarForm,
    QuarticBlock,
    adaptive_log_partition,
    gibbs_stream,
    random_directions,
    sphere_rule,
)
from .streams import Purpose, check_seed, generator

logger = logging.getLogger(__name__)

_HEADER = struct.Struct("<QQQQ")

# Accepted disagreement between the sphere rule and its half-resolution copy
REFINEMENT_TOLERANCE = 1e-8


@dataclass(frozen=True)
class DisorderSample:
    """An N×N matrix of standard normal couplings and the stream that produced it."""
    n: int
    couplings: np.ndarray
    seed: int = 0
    index: int = 0
    purpose: Purpose = Purpose.DISORDER

    def __post_init__(self):
        couplings = np.array(self.couplings, dtype=np.float64)
        if couplings.shape != (self.n, self.n):
            raise DimensionError(f"couplings have shape {couplings.shape}, expected ({self.n}, {self.n})")
        check_seed(self.seed)
        couplings.setflags(write=False)
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "purpose", Purpose(self.purpose))

    @property
    def stream_key(self) -> Tuple[int, int]:
        """(purpose, index): where this sample's direction streams branch off."""
        return int(self.purpose), self.index

    def _identity(self) -> tuple:
        return self.n, self.seed, self.index, int(self.purpose)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DisorderSample):
            return NotImplemented
        return self._identity() == other._identity() and np.array_equal(self.couplings, other.couplings)

    def __hash__(self) -> int:
        return hash((*self._identity(), self.couplings.tobytes()))

    def to_bytes(self) -> bytes:
        """Header (n, seed, purpose, index) as little-endian u64, then row-major float64 couplings."""
        header = _HEADER.pack(self.n, self.seed, int(self.purpose), self.index)
        return header + self.couplings.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "DisorderSample":
        n, seed, purpose, index = _HEADER.unpack_from(data)
        body = data[_HEADER.size:]
        if len(body) != 8 * n * n:
            raise DimensionError(f"expected {8 * n * n} bytes of couplings, got {len(body)}")
        couplings = np.frombuffer(body, dtype="<f8").reshape(n, n)
        return cls(n=n, couplings=couplings, seed=seed, index=index, purpose=Purpose(purpose))

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n,
            "seed": self.seed,
            "purpose": int(self.purpose),
            "index": self.index,
            "couplings": self.couplings.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "DisorderSample":
        data = json.loads(text)
        return cls(n=data["n"], couplings=np.array(data["couplings"], dtype=np.float64),
                   seed=data.get("seed", 0), index=data.get("index", 0),
                   purpose=Purpose(data.get("purpose", Purpose.DISORDER)))


@dataclass(frozen=True)
class SpinConfig:
    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.float64)
        if z.ndim != 1:
            raise DimensionError(f"spin configuration must be a vector, got shape {z.shape}")
        if not np.all(np.isfinite(z)):
            raise ValueError("spin configuration has non-finite entries")
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.z.shape[0]


class Method(str, Enum):
    quadrature = "quadrature"
    monte_carlo = "monte_carlo"


class LogPartitionResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    log_z: float
    method: Method
    std_error: float = Field(0.0, ge=0.0)

    @model_validator(mode="after")
    def _deterministic_has_no_error(self) -> "LogPartitionResult":
        if self.method == Method.quadrature and self.std_error != 0.0:
            raise ValueError("quadrature results carry no standard error")
        return self


@dataclass
class GibbsMoments:
    """Gibbs averages of one disorder sample: log Z, ω(z) and ω(z zᵀ)."""
    log_z: float
    log_z_se: float
    first: np.ndarray
    second: np.ndarray


def _as_vector(z) -> np.ndarray:
    return z.z if isinstance(z, SpinConfig) else SpinConfig(z).z


def _check_sizes(z: np.ndarray, j: DisorderSample, p: ModelParams):
    if not (z.shape[0] == j.n == p.n_sites):
        raise DimensionError(
            f"size mismatch: configuration {z.shape[0]}, couplings {j.n}, model N={p.n_sites}"
        )


def coupling_form(j: DisorderSample, p: ModelParams) -> np.ndarray:
    """
    Symmetric matrix W with −H(z) = z·Wz + h Σ z_i.

    W = (J + Jᵀ)/(2√(2N)); with diagonal_removed its diagonal is zero, which is the
    same as coupling Ĵ_ij = (J_ij + J_ji)/√2 with weight 1/√N over pairs i < j.
    """
    if j.n != p.n_sites:
        raise DimensionError(f"couplings are {j.n}×{j.n}, model has N={p.n_sites}")
    w = (j.couplings + j.couplings.T) / (2.0 * math.sqrt(2.0 * p.n_sites))
    if p.diagonal_removed:
        np.fill_diagonal(w, 0.0)
    return w


def hamiltonian(z, j: DisorderSample, p: ModelParams) -> float:
    z = _as_vector(z)
    _check_sizes(z, j, p)
    return -float(z @ coupling_form(j, p) @ z) - p.h * float(np.sum(z))


def regularized_exponent(z, j: DisorderSample, p: ModelParams) -> float:
    """−βH(z) − β²/(4N)(Σz²)² + λ/2 Σz²; tends to −∞ as ‖z‖ grows for β > 0."""
    z = _as_vector(z)
    _check_sizes(z, j, p)
    s = float(z @ z)
    return -p.beta * hamiltonian(z, j, p) - p.beta ** 2 / (4.0 * p.n_sites) * s * s + 0.5 * p.lam * s


def overlap(z1, z2) -> float:
    z1, z2 = _as_vector(z1), _as_vector(z2)
    if z1.shape != z2.shape:
        raise DimensionError(f"overlap of configurations of sizes {z1.shape[0]} and {z2.shape[0]}")
    return float(z1 @ z2) / z1.shape[0]


def polar_form(j: DisorderSample, p: ModelParams) -> PolarForm:
    """The exponent of Z_N as a PolarForm."""
    n = p.n_sites
    quad = p.beta * coupling_form(j, p) + 0.5 * p.lam * np.eye(n)
    field = np.full(n, p.beta * p.h)
    quartic = (QuarticBlock(tuple(range(n)), p.beta ** 2 / (4.0 * n)),) if p.beta > 0 else ()
    return PolarForm(quad, field, quartic)


def log_partition_quadrature(
    j: DisorderSample,
    p: ModelParams,
    radial_points: int = 512,
    quadrature_max_n: int = 3,
) -> LogPartitionResult:
    """
    Deterministic log Z_N for N <= 3.

    The symmetric coupling form is diagonalized (the base measure, regularizer and
    λ-term are rotation invariant) and the angles are integrated adaptively with
    Gauss–Legendre in the radius; a nonzero field is integrated over the full sphere.
    """
    if p.n_sites > min(quadrature_max_n, 3):
        raise DomainError(f"quadrature supports N <= {min(quadrature_max_n, 3)}, got N={p.n_sites}")
    log_z = adaptive_log_partition(polar_form(j, p), radial_points)
    return LogPartitionResult(log_z=log_z, method=Method.quadrature)


def log_partition_mc(j: DisorderSample, p: ModelParams, cfg: McConfig) -> LogPartitionResult:
    """
    Stochastic log Z_N from random orthonormal direction frames.

    The directions come from the stream (seed, DIRECTIONS, sample purpose, sample
    index, 0), so the estimate is reproducible per disorder sample and samples of
    different families never share frames.
    """
    rng = generator(cfg.seed, Purpose.DIRECTIONS, *j.stream_key, 0)
    directions = random_directions(p.n_sites, cfg.n_directions, rng)
    stream = gibbs_stream(polar_form(j, p), directions, cfg.radial_points, powers=(),
                          bias_correction=cfg.bias_correction)
    return LogPartitionResult(log_z=stream.log_z, method=Method.monte_carlo, std_error=stream.log_z_se)


def log_partition(j: DisorderSample, p: ModelParams, cfg: McConfig) -> LogPartitionResult:
    """Dispatch on cfg.scheme: quadrature for small N, radial Monte Carlo otherwise."""
    if cfg.use_quadrature(p.n_sites):
        return log_partition_quadrature(j, p, cfg.radial_points, cfg.quadrature_max_n)
    return log_partition_mc(j, p, cfg)


def replica_streams(
    form: PolarForm,
    cfg: McConfig,
    key: Tuple[int, int],
    powers: Tuple[int, ...] = (1, 2),
) -> Tuple[GibbsStream, GibbsStream]:
    """
    Two direction streams for the same Gibbs state, one per replica.

    In quadrature mode both replicas use the same deterministic sphere rule (a
    product rule for the double integral); the rule is compared with its
    half-resolution copy and a disagreement above REFINEMENT_TOLERANCE is logged.
    Otherwise each replica gets its own random frames.

    Args:
        form: Exponent of the Gibbs weight
        cfg: Monte Carlo settings
        key: ``DisorderSample.stream_key`` of the sample the form was built from
        powers: Moments of z accumulated along the streams

    Returns:
        (replica 1, replica 2)
    """
    n = form.n
    if cfg.use_quadrature(n):
        rule = sphere_rule(n, cfg.sphere_points)
        stream = gibbs_stream(form, rule, cfg.radial_points, powers)
        if n > 1:
            coarse = gibbs_stream(form, sphere_rule(n, max(4, cfg.sphere_points // 2)),
                                  cfg.radial_points, ())
            drift = abs(coarse.log_z - stream.log_z)
            if drift > REFINEMENT_TOLERANCE:
                logger.warning(f"sphere rule not converged for sample {key}: "
                               f"|Δ log Z| = {drift:.3g} between {cfg.sphere_points} and half nodes")
        return stream, stream

    streams = []
    for replica in (1, 2):
        rng = generator(cfg.seed, Purpose.DIRECTIONS, *key, replica)
        directions = random_directions(n, cfg.n_directions, rng)
        streams.append(gibbs_stream(form, directions, cfg.radial_points, powers, cfg.bias_correction))
    return streams[0], streams[1]


def gibbs_moments(j: DisorderSample, p: ModelParams, cfg: McConfig,
                  form: Optional[PolarForm] = None) -> GibbsMoments:
    """ω(z), ω(z zᵀ) and log Z for one disorder sample."""
    stream, _ = replica_streams(form or polar_form(j, p), cfg, j.stream_key)
    return GibbsMoments(stream.log_z, stream.log_z_se, stream.first_moment(), stream.second_moment())
