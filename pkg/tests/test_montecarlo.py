import math

import numpy as np
import pytest

from gaussglass.closed_forms import annealed_pressure
from gaussglass.errors import DimensionError, DomainError, NumericError
from gaussglass.montecarlo import (
    RunningStats,
    annealed_mean_partition_mc,
    diagonal_comparison,
    guarded,
    jensen_gap,
    pressure_sequence,
    quenched_pressure,
    reduce_samples,
    replica_overlap_moments,
    run_samples,
    sample_disorder,
    second_moment_ratio_mc,
    superadditivity_check,
)
from gaussglass.params import McConfig, ModelParams
from gaussglass.streams import Purpose


def test_running_stats_match_numpy():
    values = np.random.default_rng(0).normal(size=50)
    stats = RunningStats()
    for v in values:
        stats.push(float(v))
    assert stats.mean == pytest.approx(values.mean(), abs=1e-14)
    assert stats.variance == pytest.approx(values.var(ddof=1), rel=1e-12)
    assert stats.std_error == pytest.approx(values.std(ddof=1) / math.sqrt(50), rel=1e-12)


def test_empty_reduction_fails():
    with pytest.raises(NumericError):
        reduce_samples([])


def test_sample_disorder_streams():
    a = sample_disorder(3, seed=5, index=2)
    assert a == sample_disorder(3, seed=5, index=2)
    assert a != sample_disorder(3, seed=5, index=3)
    assert a != sample_disorder(3, seed=5, index=2, purpose=Purpose.DISORDER_PRIME)
    with pytest.raises(DimensionError):
        sample_disorder(0, seed=5, index=0)


def _flaky(item: tuple) -> float:
    index = item[0]
    if index % 2:
        raise NumericError("odd sample")
    return float(index)


def test_failed_samples_are_skipped_up_to_the_limit():
    items = [(i,) for i in range(4)]
    values, skipped = run_samples(guarded(_flaky), items, McConfig(max_skip_fraction=0.5, workers=1))
    assert values == [0.0, 2.0]
    assert skipped == 2
    with pytest.raises(NumericError):
        run_samples(guarded(_flaky), items, McConfig(max_skip_fraction=0.25, workers=1))


def test_quenched_pressure_is_exact_without_coupling(quad_cfg):
    estimate = quenched_pressure(ModelParams(beta=0.0, lam=0.4, n_sites=2), quad_cfg)
    assert estimate.mean == pytest.approx(annealed_pressure(0.0, 0.4), abs=1e-10)
    assert estimate.std_error == pytest.approx(0.0, abs=1e-12)
    assert estimate.n_samples == quad_cfg.n_disorder


def test_worker_count_does_not_change_results(quad_cfg):
    p = ModelParams(beta=1.3, lam=0.1, n_sites=2)
    serial = quenched_pressure(p, quad_cfg)
    pooled = quenched_pressure(p, quad_cfg.model_copy(update={"workers": 2}))
    assert serial == pooled


def test_quenched_pressure_respects_jensen(quad_cfg):
    p = ModelParams(beta=1.5, lam=0.0, n_sites=3)
    gap = jensen_gap(p, quad_cfg)
    assert gap.at_least(0.0)
    with pytest.raises(DomainError):
        jensen_gap(p.model_copy(update={"diagonal_removed": True}), quad_cfg)


def test_pressure_sequence(quad_cfg):
    sequence = pressure_sequence([1, 2, 3], ModelParams(beta=0.0, lam=0.5, n_sites=1), quad_cfg)
    assert [e.mean for e in sequence] == pytest.approx([annealed_pressure(0.0, 0.5)] * 3, abs=1e-10)


def test_superadditivity_without_coupling(quad_cfg):
    gap = superadditivity_check(1, 2, ModelParams(beta=0.0, lam=0.5, n_sites=3), quad_cfg)
    assert gap.mean == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(DimensionError):
        superadditivity_check(1, 1, ModelParams(beta=0.5, n_sites=3), quad_cfg)


def test_superadditivity_gap_is_nonnegative(quad_cfg):
    gap = superadditivity_check(1, 2, ModelParams(beta=1.0, n_sites=3), quad_cfg)
    assert gap.at_least(0.0)


def test_diagonal_comparison_shares_disorder(quad_cfg):
    comparison = diagonal_comparison(ModelParams(beta=0.0, lam=0.2, n_sites=2), quad_cfg)
    assert comparison.difference.mean == pytest.approx(0.0, abs=1e-10)
    assert comparison.full.mean == pytest.approx(comparison.removed.mean, abs=1e-10)


def test_overlap_moments_of_the_free_measure(quad_cfg):
    first, second = replica_overlap_moments(ModelParams(beta=0.0, lam=0.5, n_sites=2), quad_cfg)
    assert first.mean == pytest.approx(0.0, abs=1e-12)
    assert second.mean == pytest.approx(2.0, rel=1e-10)
    with pytest.raises(DomainError):
        replica_overlap_moments(ModelParams(beta=0.0, n_sites=2), quad_cfg, max_power=0)


def test_second_moment_ratio_domain(quad_cfg):
    with pytest.raises(DomainError):
        second_moment_ratio_mc(ModelParams(beta=0.5, n_sites=2), quad_cfg)
    with pytest.raises(DomainError):
        second_moment_ratio_mc(ModelParams(beta=1.5, n_sites=2, diagonal_removed=True), quad_cfg)


def test_second_moment_ratio_is_at_least_one(quad_cfg):
    ratio = second_moment_ratio_mc(ModelParams(beta=0.5, n_sites=2, diagonal_removed=True), quad_cfg)
    assert ratio.mean >= 1.0
    assert ratio.std_error >= 0.0


@pytest.mark.slow
def test_annealed_identity():
    p = ModelParams(beta=0.6, lam=0.2, n_sites=2)
    cfg = McConfig(n_disorder=4000, radial_points=128, sphere_points=24, seed=3)
    estimate = annealed_mean_partition_mc(p, cfg)
    assert estimate.within(1.0 / 0.8, n_sigma=4.0)
