"""
Quenched-disorder sampling.

Each disorder sample J is drawn from its own counter-based stream
(seed, purpose, index), evaluated independently (log Z, Z or replica overlap
moments), and the per-sample values are reduced in index order with a
streaming mean/variance. Standard errors are between-sample only; the
within-sample error of the stochastic scheme is part of that spread.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np

from .closed_forms import annealed_pressure
from .errors import DimensionError, DomainError, NumericError
from .model import DisorderSample, log_partition, polar_form, replica_streams
from .parallel import TaskResult, run_tasks
from .params import McConfig, McEstimate, ModelParams
from .polar import pair_moment
from .streams import Purpose, generator

logger = logging.getLogger(__name__)


class RunningStats:
    """Welford accumulator for mean and variance."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self._m2 = 0.0

    def push(self, value: float):
        self.n += 1
        delta = value - self.mean
        self.mean += delta / self.n
        self._m2 += delta * (value - self.mean)

    @property
    def variance(self) -> float:
        return self._m2 / (self.n - 1) if self.n > 1 else 0.0

    @property
    def std_error(self) -> float:
        return math.sqrt(self.variance / self.n) if self.n > 0 else 0.0

    def estimate(self, n_skipped: int = 0) -> McEstimate:
        if self.n == 0:
            raise NumericError("no disorder sample produced a value")
        return McEstimate(mean=self.mean, std_error=self.std_error, n_samples=self.n, n_skipped=n_skipped)


@dataclass
class DiagonalComparison:
    """Quenched pressures of Z and Z' on the same disorder, and their paired difference."""
    full: McEstimate
    removed: McEstimate
    difference: McEstimate


def sample_disorder(n: int, seed: int, index: int, purpose: Purpose = Purpose.DISORDER) -> DisorderSample:
    """
    The index-th N×N coupling matrix of a stream family.

    Args:
        n: Number of sites
        seed: Master seed
        index: Sample index within the family
        purpose: DISORDER for J, DISORDER_PRIME / DISORDER_SECOND for the block
            couplings of the size interpolation

    Returns:
        The sample, tagged with its stream so its direction frames are its own
    """
    if n < 1:
        raise DimensionError(f"n must be positive, got {n}")
    rng = generator(seed, purpose, index)
    return DisorderSample(n=n, couplings=rng.standard_normal((n, n)), seed=seed, index=index,
                          purpose=purpose)


def run_samples(worker: Callable[[Any], TaskResult], items: Sequence[Any],
                cfg: McConfig) -> Tuple[List[Any], int]:
    """
    Run per-sample tasks and drop the ones that failed numerically.

    Returns:
        (values in index order, number skipped)

    Raises:
        NumericError: if more than cfg.max_skip_fraction of the samples failed
    """
    results = run_tasks(worker, items, cfg.workers)
    values = [r.value for r in results if not r.error]
    skipped = len(results) - len(values)
    if skipped:
        logger.warning(f"Skipped {skipped}/{len(results)} disorder samples after numeric failures")
    if skipped > cfg.max_skip_fraction * len(results):
        raise NumericError(
            f"{skipped} of {len(results)} disorder samples failed",
            {"skipped": skipped, "total": len(results), "max_skip_fraction": cfg.max_skip_fraction},
        )
    return values, skipped


def reduce_samples(values: Sequence[float], skipped: int = 0) -> McEstimate:
    stats = RunningStats()
    for value in values:
        stats.push(float(value))
    return stats.estimate(skipped)


def guarded(task: Callable[[tuple], Any]) -> Callable[[tuple], TaskResult]:
    """Wrap a per-sample function so numeric failures become skipped samples."""
    def run(item: tuple) -> TaskResult:
        index = item[0]
        try:
            return TaskResult(index=index, value=task(item))
        except NumericError as e:
            return TaskResult(index=index, error=str(e), error_type=type(e).__name__)
    return run


def _log_z_values(item: tuple) -> List[float]:
    index, params, cfg, purpose = item
    j = sample_disorder(params[0].n_sites, cfg.seed, index, purpose)
    return [log_partition(j, p, cfg).log_z for p in params]


def _overlap_values(item: tuple) -> List[float]:
    index, p, cfg, max_power = item
    j = sample_disorder(p.n_sites, cfg.seed, index)
    s1, s2 = replica_streams(polar_form(j, p), cfg, j.stream_key, tuple(range(1, max_power + 1)))
    return [pair_moment(s1, s2, k) for k in range(1, max_power + 1)]


# Module-level so worker processes can unpickle them.
def _log_z_task(item: tuple) -> TaskResult:
    return guarded(_log_z_values)(item)


def _overlap_task(item: tuple) -> TaskResult:
    return guarded(_overlap_values)(item)


def log_partition_samples(params: Sequence[ModelParams], cfg: McConfig,
                          purpose: Purpose = Purpose.DISORDER) -> Tuple[np.ndarray, int]:
    """
    log Z for every disorder sample, for each of several parameter sets that share N.

    Returns:
        (array of shape (samples, len(params)), number skipped)
    """
    if len({p.n_sites for p in params}) != 1:
        raise DimensionError("parameter sets evaluated on shared disorder must have the same N")
    items = [(i, list(params), cfg, purpose) for i in range(cfg.n_disorder)]
    values, skipped = run_samples(_log_z_task, items, cfg)
    return np.array(values, dtype=np.float64).reshape(-1, len(params)), skipped


def quenched_pressure(p: ModelParams, cfg: McConfig, purpose: Purpose = Purpose.DISORDER) -> McEstimate:
    """
    A_N = E log Z_N / N over cfg.n_disorder samples.

    Args:
        p: Model parameters
        cfg: Sampling configuration; quadrature per sample when N <= cfg.quadrature_max_n
        purpose: Stream family of the couplings

    Returns:
        Mean and between-sample standard error, with the number of skipped samples

    Raises:
        NumericError: if more than cfg.max_skip_fraction of the samples failed
    """
    logger.info(f"Quenched pressure N={p.n_sites}, beta={p.beta}, lambda={p.lam}, "
                f"{cfg.n_disorder} samples, quadrature={cfg.use_quadrature(p.n_sites)}")
    log_z, skipped = log_partition_samples([p], cfg, purpose)
    return reduce_samples(log_z[:, 0] / p.n_sites, skipped)


def annealed_mean_partition_mc(p: ModelParams, cfg: McConfig) -> McEstimate:
    """Disorder average of Z_N itself, to compare with (1−λ)^{−N/2}."""
    log_z, skipped = log_partition_samples([p], cfg)
    return reduce_samples(np.exp(log_z[:, 0]), skipped)


def second_moment_ratio_mc(p: ModelParams, cfg: McConfig) -> McEstimate:
    """
    E(Z'²)/E²(Z') with a delta-method standard error from the joint sample
    covariance of (Z', Z'²).

    Raises:
        DomainError: unless the diagonal is removed and β_λ < 1
    """
    if not p.diagonal_removed:
        raise DomainError("the second-moment ratio is defined for the diagonal-removed model")
    if p.lam >= 1.0 or p.beta_lambda >= 1.0:
        raise DomainError(f"second-moment ratio requires beta_lambda < 1, got {p.beta_lambda}")

    log_z, skipped = log_partition_samples([p], cfg)
    z = np.exp(log_z[:, 0] - np.mean(log_z[:, 0]))   # the ratio is scale free
    n = z.shape[0]
    z2 = z * z
    a, b = float(np.mean(z2)), float(np.mean(z))
    ratio = a / (b * b)
    if n < 2:
        return McEstimate(mean=ratio, std_error=0.0, n_samples=n, n_skipped=skipped)
    cov = np.cov(np.vstack([z2, z]), ddof=1)
    grad = np.array([1.0 / (b * b), -2.0 * a / b ** 3])
    var = float(grad @ cov @ grad) / n
    return McEstimate(mean=ratio, std_error=math.sqrt(max(var, 0.0)), n_samples=n, n_skipped=skipped)


def overlap_moment_samples(p: ModelParams, cfg: McConfig, max_power: int) -> Tuple[np.ndarray, int]:
    """Per-sample ⟨q₁₂^k⟩, shape (samples, max_power), and the number skipped."""
    items = [(i, p, cfg, max_power) for i in range(cfg.n_disorder)]
    values, skipped = run_samples(_overlap_task, items, cfg)
    return np.array(values, dtype=np.float64).reshape(-1, max_power), skipped


def replica_overlap_moments(p: ModelParams, cfg: McConfig, max_power: int = 2) -> List[McEstimate]:
    """
    ⟨q₁₂^k⟩ for k = 1..max_power, two replicas per disorder sample.

    Args:
        p: Model parameters
        cfg: Sampling configuration; the two replicas share one sphere rule in
            quadrature mode and use independent frames otherwise
        max_power: Highest overlap power

    Returns:
        One estimate per power, lowest first
    """
    if max_power < 1:
        raise DomainError("max_power must be at least 1")
    table, skipped = overlap_moment_samples(p, cfg, max_power)
    return [reduce_samples(table[:, k], skipped) for k in range(max_power)]


def superadditivity_check(n1: int, n2: int, p: ModelParams, cfg: McConfig) -> McEstimate:
    """
    N·A_N − N₁·A_{N₁} − N₂·A_{N₂} with independent disorder for the three systems.

    Args:
        n1: Size of the first subsystem
        n2: Size of the second subsystem
        p: Parameters of the whole system, N = n1 + n2
        cfg: Sampling configuration

    Returns:
        The gap, nonnegative up to sampling error; the standard errors of the
        three pressures add in quadrature

    Raises:
        DimensionError: if n1 + n2 differs from N or a part is empty
    """
    if n1 < 1 or n2 < 1 or n1 + n2 != p.n_sites:
        raise DimensionError(f"need n1 + n2 = N with positive parts, got {n1} + {n2} vs N={p.n_sites}")
    whole = quenched_pressure(p, cfg, Purpose.DISORDER)
    first = quenched_pressure(p.with_sites(n1), cfg, Purpose.DISORDER_PRIME)
    second = quenched_pressure(p.with_sites(n2), cfg, Purpose.DISORDER_SECOND)
    n = p.n_sites
    gap = n * whole.mean - n1 * first.mean - n2 * second.mean
    se = math.sqrt((n * whole.std_error) ** 2 + (n1 * first.std_error) ** 2 + (n2 * second.std_error) ** 2)
    logger.info(f"Superadditivity {n}={n1}+{n2}: gap {gap:.6g} ± {se:.2g}")
    return McEstimate(mean=gap, std_error=se, n_samples=min(whole.n_samples, first.n_samples, second.n_samples),
                      n_skipped=whole.n_skipped + first.n_skipped + second.n_skipped)


def pressure_sequence(sizes: Sequence[int], p: ModelParams, cfg: McConfig) -> List[McEstimate]:
    """A_N along a list of system sizes."""
    return [quenched_pressure(p.with_sites(n), cfg) for n in sizes]


def diagonal_comparison(p: ModelParams, cfg: McConfig) -> DiagonalComparison:
    """Quenched pressures of Z and Z' evaluated on the same couplings."""
    full = p.model_copy(update={"diagonal_removed": False})
    removed = p.model_copy(update={"diagonal_removed": True})
    log_z, skipped = log_partition_samples([full, removed], cfg)
    per_site = log_z / p.n_sites
    return DiagonalComparison(
        full=reduce_samples(per_site[:, 0], skipped),
        removed=reduce_samples(per_site[:, 1], skipped),
        difference=reduce_samples(per_site[:, 0] - per_site[:, 1], skipped),
    )


def jensen_gap(p: ModelParams, cfg: McConfig, quenched: Optional[McEstimate] = None) -> McEstimate:
    """(1/N) log E Z_N − A_N, nonnegative by Jensen's inequality."""
    if p.diagonal_removed:
        raise DomainError("the exact annealed pressure is known for the full Hamiltonian only")
    if p.h != 0.0:
        raise DomainError("the annealed pressure is known in closed form at h = 0 only")
    quenched = quenched or quenched_pressure(p, cfg)
    return McEstimate(mean=annealed_pressure(p.beta, p.lam) - quenched.mean, std_error=quenched.std_error,
                      n_samples=quenched.n_samples, n_skipped=quenched.n_skipped)
