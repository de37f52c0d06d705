import math

import numpy as np
import pytest

from gaussglass.errors import DivergenceError, DomainError
from gaussglass.fluctuations import (
    Prediction,
    annealed_susceptibility,
    blowup_time,
    cavity_moments,
    initial_conditions,
    integrate_triple,
    mc_xi_second_moment,
    ode_rhs,
    triple_trajectory,
)
from gaussglass.params import McConfig, McEstimate, ModelParams
from gaussglass.streams import Purpose, generator


def test_annealed_initial_conditions():
    start = initial_conditions(0.4, 0.3, 0.0)
    assert start.a == pytest.approx(1.0 / 0.49)
    assert (start.b, start.c) == (0.0, 0.0)
    assert start.prediction == Prediction.annealed_exact


def test_condensed_initial_conditions_use_the_ansatz():
    start = initial_conditions(2.0, 0.0, 0.25)
    # σ² = 1/2 and β²q̄ = 1
    assert start.c == pytest.approx(3.0 / 16.0 - 1.0 / 16.0)
    assert start.b == pytest.approx(1.0 / 8.0 + start.c)
    assert start.a == pytest.approx(0.25 + 0.25 + start.c)
    assert start.prediction == Prediction.gaussian_ansatz


def test_cavity_moments():
    assert cavity_moments(1.0, 0.5, 0.0, 1.3) == (0.0, pytest.approx(2.0))
    first, second = cavity_moments(2.0, 0.0, 0.25, 1.0)
    assert first == pytest.approx(0.5)
    assert second - first ** 2 == pytest.approx(0.5)


def test_rhs_vanishes_without_coupling():
    assert ode_rhs(initial_conditions(0.0, 0.0, 0.0), 0.0) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("beta,lam", [(0.5, 0.0), (0.4, 0.3), (0.9, -0.5)])
def test_annealed_solution(beta, lam):
    triple = integrate_triple(beta, lam, 0.0)
    assert triple.a == pytest.approx(annealed_susceptibility(beta, lam), rel=1e-10)
    assert triple.a == pytest.approx(1.0 / ((1.0 - lam) ** 2 - beta ** 2), rel=1e-10)
    assert triple.b == 0.0
    assert triple.c == 0.0
    assert triple.t == pytest.approx(1.0)


def test_intermediate_time():
    triple = integrate_triple(0.5, 0.0, 0.0, t_end=0.5)
    assert triple.a == pytest.approx(1.0 / (1.0 - 0.125), rel=1e-10)
    assert integrate_triple(0.5, 0.0, 0.0, t_end=0.0).a == 1.0


def test_blowup_time():
    assert blowup_time(2.0, 0.0) == pytest.approx(0.25)
    assert blowup_time(0.0, 0.3) == math.inf
    with pytest.raises(DomainError):
        blowup_time(1.0, 1.0)


def test_critical_line_diverges():
    with pytest.raises(DivergenceError) as excinfo:
        annealed_susceptibility(1.0, 0.0)
    assert excinfo.value.blowup_time == pytest.approx(1.0)
    with pytest.raises(DivergenceError):
        integrate_triple(1.0, 0.0, 0.0)
    with pytest.raises(DivergenceError) as excinfo:
        triple_trajectory(2.0, 0.0, 0.0)
    assert excinfo.value.blowup_time == pytest.approx(0.25)


def test_trajectory_grid():
    trajectory = triple_trajectory(0.5, 0.0, 0.0, t_points=11, n_steps=1000)
    assert len(trajectory) == 11
    assert [p.t for p in trajectory] == pytest.approx([k / 10 for k in range(11)])
    a_values = [p.a for p in trajectory]
    assert a_values == sorted(a_values)
    with pytest.raises(DomainError):
        triple_trajectory(0.5, 0.0, 0.0, t_points=1)


def test_condensed_trajectory_is_labelled():
    trajectory = triple_trajectory(0.3, 0.0, 0.01, t_points=3, n_steps=2000)
    assert len(trajectory) == 3
    assert all(p.prediction == Prediction.gaussian_ansatz for p in trajectory)


def test_xi_second_moment_of_the_free_measure(quad_cfg):
    estimate = mc_xi_second_moment(ModelParams(beta=0.0, lam=0.5, n_sites=2), quad_cfg)
    assert estimate.mean == pytest.approx(4.0, rel=1e-9)


@pytest.mark.slow
def test_xi_second_moment_in_the_annealed_region():
    p = ModelParams(beta=0.3, lam=0.0, n_sites=3)
    cfg = McConfig(n_disorder=400, radial_points=128, sphere_points=24, seed=11)
    estimate = mc_xi_second_moment(p, cfg)
    # finite-N value is close to, but not equal to, the N → ∞ susceptibility
    assert estimate.mean == pytest.approx(annealed_susceptibility(0.3, 0.0), rel=0.25)


def sample_mean(values: np.ndarray) -> McEstimate:
    return McEstimate(mean=float(np.mean(values)), std_error=float(np.std(values, ddof=1)) / math.sqrt(values.size),
                      n_samples=values.size)


@pytest.mark.slow
def test_initial_conditions_against_sampled_cavity_fields():
    rng = np.random.default_rng(8)
    for index in range(20):
        beta, lam, q_bar = rng.uniform(0.1, 2.0), rng.uniform(-1.0, 0.9), rng.uniform(0.0, 1.0)
        j_prime = generator(31, Purpose.CAVITY, index).standard_normal(200_000)
        first, second = cavity_moments(beta, lam, q_bar, j_prime)
        start = initial_conditions(beta, lam, q_bar)
        assert sample_mean(second ** 2 - q_bar ** 2).within(start.a, n_sigma=4.0)
        assert sample_mean(second * first ** 2 - q_bar ** 2).within(start.b, n_sigma=4.0)
        assert sample_mean(first ** 4 - q_bar ** 2).within(start.c, n_sigma=4.0)
