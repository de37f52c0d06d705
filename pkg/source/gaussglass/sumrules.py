"""
Interpolation arguments evaluated at finite N.

Two interpolating partition functions are realized as PolarForms:

* the replica-symmetric interpolation, where at time t the two-body part is
  scaled by √t, the regularizer by t, and a one-body cavity term
  β√(1−t)√q̄ Σ J′_i z_i + (1−t)c/2 Σ z_i² (c = −β²q̄) is added;
* the size interpolation, where √t·J on all N sites is traded against
  √(1−t)·J′ on the first N₁ sites and √(1−t)·J″ on the remaining N₂.

Both derivatives reduce to two-replica overlap moments, estimated per disorder
sample with the same radial-spherical streams as the pressures.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import trapezoid

from .closed_forms import rs_trial_pressure, sigma
from .errors import DimensionError, DomainError
from .model import DisorderSample, coupling_form, overlap, replica_streams
from .montecarlo import guarded, reduce_samples, run_samples, sample_disorder
from .parallel import TaskResult
from .params import McConfig, McEstimate, ModelParams
from .polar import PolarForm, QuarticBlock, pair_moment
from .streams import Purpose, generator

logger = logging.getLogger(__name__)


class RsInterpolationSpec(BaseModel):
    """Time, overlap and multiplier of the RS interpolation."""

    model_config = ConfigDict(frozen=True)

    t: float = Field(..., ge=0.0, le=1.0)
    q_bar: float = Field(..., ge=0.0)
    c: float
    cavity_fields: Optional[List[float]] = None

    @classmethod
    def for_params(cls, p: ModelParams, t: float, q_bar: float,
                   cavity_fields: Optional[Sequence[float]] = None) -> "RsInterpolationSpec":
        """Interpolation settings with the multiplier fixed to c = −β²q̄."""
        fields = list(cavity_fields) if cavity_fields is not None else None
        return cls(t=t, q_bar=q_bar, c=-p.beta ** 2 * q_bar, cavity_fields=fields)

    def at(self, t: float) -> "RsInterpolationSpec":
        return self.model_copy(update={"t": t})


@dataclass
class RsCurvePoint:
    t: float
    pressure: McEstimate
    derivative: McEstimate


def _check_rs(p: ModelParams, spec: RsInterpolationSpec):
    if p.h != 0.0:
        raise DomainError("the RS interpolation is implemented at h = 0")
    if p.diagonal_removed:
        raise DomainError("the RS interpolation uses the full Hamiltonian with diagonal couplings")
    if not math.isclose(spec.c, -p.beta ** 2 * spec.q_bar, rel_tol=1e-12, abs_tol=1e-15):
        raise DomainError(f"multiplier c must equal -beta^2 q_bar = {-p.beta ** 2 * spec.q_bar}, got {spec.c}")
    sigma(p.beta, p.lam, spec.q_bar)


def rs_interpolation_form(j: DisorderSample, p: ModelParams, spec: RsInterpolationSpec,
                          cavity_fields: Optional[np.ndarray] = None) -> PolarForm:
    """The exponent of Z_N(t, J, J′)."""
    n = p.n_sites
    fields = np.asarray(cavity_fields if cavity_fields is not None else spec.cavity_fields, dtype=np.float64)
    if fields.shape != (n,):
        raise DimensionError(f"need {n} cavity fields, got shape {fields.shape}")
    t = spec.t
    quad = math.sqrt(t) * p.beta * coupling_form(j, p) + 0.5 * ((1.0 - t) * spec.c + p.lam) * np.eye(n)
    field = p.beta * math.sqrt(1.0 - t) * math.sqrt(spec.q_bar) * fields
    coefficient = t * p.beta ** 2 / (4.0 * n)
    quartic = (QuarticBlock(tuple(range(n)), coefficient),) if coefficient > 0 else ()
    return PolarForm(quad, field, quartic)


def cavity_fields(seed: int, index: int, n: int) -> np.ndarray:
    """The one-body fields J′_i of a disorder sample."""
    return generator(seed, Purpose.CAVITY, index).standard_normal(n)


def _rs_sample_values(item: tuple) -> List[Tuple[float, float]]:
    """(log Z(t)/N, ⟨(q₁₂ − q̄)²⟩_t) at each requested time."""
    index, p, cfg, spec, times = item
    j = sample_disorder(p.n_sites, cfg.seed, index)
    fields = cavity_fields(cfg.seed, index, p.n_sites)
    out = []
    for t in times:
        form = rs_interpolation_form(j, p, spec.at(t), fields)
        s1, s2 = replica_streams(form, cfg, j.stream_key)
        q1, q2 = pair_moment(s1, s2, 1), pair_moment(s1, s2, 2)
        out.append((s1.log_z / p.n_sites, q2 - 2.0 * spec.q_bar * q1 + spec.q_bar ** 2))
    return out


def _rs_task(item: tuple) -> TaskResult:
    return guarded(_rs_sample_values)(item)


def _rs_samples(p: ModelParams, spec: RsInterpolationSpec, cfg: McConfig,
                times: Sequence[float]) -> Tuple[np.ndarray, int]:
    """Array (samples, len(times), 2) of per-sample pressures and fluctuation terms."""
    _check_rs(p, spec)
    items = [(i, p, cfg, spec, list(times)) for i in range(cfg.n_disorder)]
    values, skipped = run_samples(_rs_task, items, cfg)
    return np.array(values, dtype=np.float64).reshape(-1, len(times), 2), skipped


def rs_phi_zero(p: ModelParams, q_bar: float) -> float:
    """φ_N(0) = log σ + ½β²q̄σ², the factorized one-body pressure."""
    s = sigma(p.beta, p.lam, q_bar)
    return math.log(s) + 0.5 * p.beta ** 2 * q_bar * s * s


def rs_interpolating_pressure(p: ModelParams, spec: RsInterpolationSpec, cfg: McConfig) -> McEstimate:
    """
    φ_N(t) = E log Z_N(t, J, J′) / N at the time carried by ``spec``.

    Args:
        p: Model parameters, with h = 0 and the diagonal kept
        spec: Interpolation time, trial overlap and multiplier
        cfg: Disorder and direction sampling

    Returns:
        Mean over disorder samples; at t = 0 the exact one-body value with zero error

    Raises:
        DomainError: if the field is nonzero, the diagonal is removed or c ≠ −β²q̄
    """
    _check_rs(p, spec)
    if spec.t == 0.0:
        return McEstimate(mean=rs_phi_zero(p, spec.q_bar), std_error=0.0, n_samples=cfg.n_disorder)
    table, skipped = _rs_samples(p, spec, cfg, [spec.t])
    return reduce_samples(table[:, 0, 0], skipped)


def rs_interpolation_derivative(p: ModelParams, spec: RsInterpolationSpec, cfg: McConfig) -> McEstimate:
    """dφ/dt = β²q̄²/4 − β²/4 ⟨(q₁₂ − q̄)²⟩_t, from overlap moments."""
    table, skipped = _rs_samples(p, spec, cfg, [spec.t])
    b2 = p.beta ** 2
    return reduce_samples(0.25 * b2 * spec.q_bar ** 2 - 0.25 * b2 * table[:, 0, 1], skipped)


def _t_grid(t_grid: int) -> np.ndarray:
    if t_grid < 2:
        raise DomainError("the t grid needs at least two points")
    return np.linspace(0.0, 1.0, t_grid)


def rs_sum_rule_residual(p: ModelParams, q_bar: float, cfg: McConfig, t_grid: int = 11) -> McEstimate:
    """
    A_N − [Ã(q̄) − β²/4 ∫_0^1 ⟨(q₁₂ − q̄)²⟩_t dt], the integral by the trapezoid rule.

    Every term is evaluated on the same disorder sample and the residual is reduced
    per sample, so the standard error accounts for the correlations between terms.

    Args:
        p: Model parameters (h = 0, diagonal kept)
        q_bar: Trial overlap, any value in the domain of σ
        cfg: Disorder and direction sampling
        t_grid: Number of equally spaced times in [0, 1], at least two

    Returns:
        The residual, zero up to sampling and trapezoid error for every q̄
    """
    spec = RsInterpolationSpec.for_params(p, 1.0, q_bar)
    times = _t_grid(t_grid)
    table, skipped = _rs_samples(p, spec, cfg, times)
    pressure = table[:, -1, 0]
    fluctuation = trapezoid(table[:, :, 1], times, axis=1)
    trial = rs_trial_pressure(p.beta, p.lam, q_bar)
    residual = pressure - (trial - 0.25 * p.beta ** 2 * fluctuation)
    estimate = reduce_samples(residual, skipped)
    logger.info(f"RS sum rule N={p.n_sites}, beta={p.beta}, q_bar={q_bar}: residual {estimate}")
    return estimate


def rs_interpolation_curve(p: ModelParams, q_bar: float, cfg: McConfig,
                           t_grid: int = 11) -> List[RsCurvePoint]:
    """φ_N(t) and dφ/dt on an equally spaced grid of [0, 1]."""
    spec = RsInterpolationSpec.for_params(p, 1.0, q_bar)
    times = _t_grid(t_grid)
    table, skipped = _rs_samples(p, spec, cfg, times)
    b2 = p.beta ** 2
    points = []
    for k, t in enumerate(times):
        derivative = reduce_samples(0.25 * b2 * q_bar ** 2 - 0.25 * b2 * table[:, k, 1], skipped)
        if t == 0.0:
            pressure = McEstimate(mean=rs_phi_zero(p, q_bar), std_error=0.0, n_samples=derivative.n_samples)
        else:
            pressure = reduce_samples(table[:, k, 0], skipped)
        points.append(RsCurvePoint(t=float(t), pressure=pressure, derivative=derivative))
    return points


def size_interpolation_form(j: DisorderSample, j_first: DisorderSample, j_second: DisorderSample,
                            p: ModelParams, t: float) -> PolarForm:
    """
    Exponent of Z_N(t): √t·β W_N(J) on all sites plus √(1−t)·β W_{N_k}(J^(k)) on the
    two blocks, with the regularizers weighted by t and 1−t.
    """
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t must lie in [0, 1], got {t}")
    n, n1, n2 = p.n_sites, j_first.n, j_second.n
    if n1 + n2 != n or j.n != n:
        raise DimensionError(f"block sizes {n1} + {n2} do not add up to N={n}")
    b = p.beta
    quad = math.sqrt(t) * b * coupling_form(j, p)
    quad[:n1, :n1] += math.sqrt(1.0 - t) * b * coupling_form(j_first, p.with_sites(n1))
    quad[n1:, n1:] += math.sqrt(1.0 - t) * b * coupling_form(j_second, p.with_sites(n2))
    quad += 0.5 * p.lam * np.eye(n)

    blocks = [
        (tuple(range(n)), t * b ** 2 / (4.0 * n)),
        (tuple(range(n1)), (1.0 - t) * b ** 2 / (4.0 * n1)),
        (tuple(range(n1, n)), (1.0 - t) * b ** 2 / (4.0 * n2)),
    ]
    quartic = tuple(QuarticBlock(idx, c) for idx, c in blocks if c > 0)
    return PolarForm(quad, np.full(n, b * p.h), quartic)


def _size_sample_values(item: tuple) -> Tuple[float, float, float]:
    """(⟨q²_N⟩, ⟨q²_{N₁}⟩, ⟨q²_{N₂}⟩) under the size-interpolated measure."""
    index, n1, n2, p, t, cfg = item
    j = sample_disorder(p.n_sites, cfg.seed, index, Purpose.DISORDER)
    j_first = sample_disorder(n1, cfg.seed, index, Purpose.DISORDER_PRIME)
    j_second = sample_disorder(n2, cfg.seed, index, Purpose.DISORDER_SECOND)
    form = size_interpolation_form(j, j_first, j_second, p, t)
    s1, s2 = replica_streams(form, cfg, j.stream_key, powers=(2,))
    return (pair_moment(s1, s2, 2),
            pair_moment(s1, s2, 2, block=range(n1)),
            pair_moment(s1, s2, 2, block=range(n1, p.n_sites)))


def _size_task(item: tuple) -> TaskResult:
    return guarded(_size_sample_values)(item)


def _size_samples(n1: int, n2: int, p: ModelParams, t: float, cfg: McConfig) -> Tuple[np.ndarray, int]:
    if n1 < 1 or n2 < 1 or n1 + n2 != p.n_sites:
        raise DimensionError(f"need n1 + n2 = N with positive parts, got {n1} + {n2} vs N={p.n_sites}")
    if p.h != 0.0:
        raise DomainError("the size interpolation is run at h = 0")
    items = [(i, n1, n2, p, t, cfg) for i in range(cfg.n_disorder)]
    values, skipped = run_samples(_size_task, items, cfg)
    return np.array(values, dtype=np.float64).reshape(-1, 3), skipped


def thermo_block_overlaps(n1: int, n2: int, p: ModelParams, t: float,
                          cfg: McConfig) -> Tuple[McEstimate, McEstimate, McEstimate]:
    """
    ⟨q²_N⟩, ⟨q²_{N₁}⟩, ⟨q²_{N₂}⟩ under the size-interpolated measure at time t.

    Args:
        n1: Size of the first block, sites 0..n1−1
        n2: Size of the second block; n1 + n2 must equal p.n_sites
        p: Model parameters at h = 0
        t: Interpolation time in [0, 1]
        cfg: Disorder and direction sampling

    Returns:
        (whole system, first block, second block)

    Raises:
        DimensionError: if the blocks do not split N into positive parts
        DomainError: if the field is nonzero
    """
    table, skipped = _size_samples(n1, n2, p, t, cfg)
    return tuple(reduce_samples(table[:, k], skipped) for k in range(3))


def thermo_interpolation_derivative(n1: int, n2: int, p: ModelParams, t: float,
                                    cfg: McConfig) -> McEstimate:
    """
    dφ/dt = −β²/4 (⟨q²_N⟩ − N₁/N ⟨q²_{N₁}⟩ − N₂/N ⟨q²_{N₂}⟩), nonnegative because
    q_N is a convex combination of the block overlaps.
    """
    table, skipped = _size_samples(n1, n2, p, t, cfg)
    n = p.n_sites
    combination = table[:, 0] - (n1 / n) * table[:, 1] - (n2 / n) * table[:, 2]
    return reduce_samples(-0.25 * p.beta ** 2 * combination, skipped)


def overlap_decomposition_residual(z1, z2, n1: int) -> float:
    """q_N − (N₁/N) q_{N₁} − (N₂/N) q_{N₂} for one pair of configurations."""
    z1, z2 = np.asarray(z1, dtype=np.float64), np.asarray(z2, dtype=np.float64)
    n = z1.shape[0]
    if z2.shape != z1.shape or not 0 < n1 < n:
        raise DimensionError(f"invalid split {n1} of configurations of sizes {z1.shape}, {z2.shape}")
    return (overlap(z1, z2)
            - (n1 / n) * overlap(z1[:n1], z2[:n1])
            - ((n - n1) / n) * overlap(z1[n1:], z2[n1:]))
