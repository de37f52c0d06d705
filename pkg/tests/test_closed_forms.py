import math

import numpy as np
import pytest

from gaussglass.closed_forms import (
    Regime,
    annealed_mean_partition_finite_n,
    annealed_mean_partition_prime_finite_n,
    annealed_mean_partition_prime_root,
    annealed_pressure,
    is_annealed_region,
    phase_regime,
    rs_optimal_qbar,
    rs_pressure,
    rs_trial_gradient,
    rs_trial_pressure,
    second_moment_bound,
    shell_lower_bound,
    shell_lower_bound_numeric,
    shell_objective,
    sigma,
    spherical_pressure,
    spherical_variational,
)
from gaussglass.errors import DomainError
from gaussglass.params import ModelParams


@pytest.mark.parametrize("lam", [-1.0, 0.0, 0.5, 0.9])
def test_annealed_pressure(lam):
    assert annealed_pressure(0.3, lam) == pytest.approx(-0.5 * math.log(1.0 - lam))


def test_annealed_pressure_undefined_beyond_one():
    with pytest.raises(DomainError):
        annealed_pressure(0.3, 1.0)


def test_annealed_mean_partition():
    p = ModelParams(beta=0.7, lam=0.5, n_sites=4)
    assert annealed_mean_partition_finite_n(p) == pytest.approx(4.0)
    with pytest.raises(DomainError):
        annealed_mean_partition_finite_n(p.model_copy(update={"diagonal_removed": True}))
    with pytest.raises(DomainError):
        annealed_mean_partition_finite_n(p.model_copy(update={"h": 0.1}))


def test_diagonal_removed_annealed_partition():
    free = ModelParams(beta=0.0, lam=0.5, n_sites=3, diagonal_removed=True)
    assert annealed_mean_partition_prime_root(free) == pytest.approx(math.sqrt(2.0), rel=1e-12)
    coupled = free.with_beta(0.8)
    root = annealed_mean_partition_prime_root(coupled)
    assert root < math.sqrt(2.0)
    assert annealed_mean_partition_prime_finite_n(coupled) == pytest.approx(root ** 3)
    # approaches (1 − λ)^{−1/2} as N grows
    assert annealed_mean_partition_prime_root(coupled.with_sites(10_000)) == pytest.approx(math.sqrt(2.0), rel=1e-3)


@pytest.mark.parametrize("beta,lam,expected", [
    (0.5, 0.0, Regime.annealed),
    (1.0, 0.0, Regime.annealed),
    (1.01, 0.0, Regime.condensed),
    (0.4, 0.5, Regime.annealed),
    (0.6, 0.5, Regime.condensed),
])
def test_phase_regime(beta, lam, expected):
    assert phase_regime(beta, lam) == expected
    assert is_annealed_region(beta, lam) == (expected == Regime.annealed)


def test_sigma_domain():
    assert sigma(1.0, 0.0, 0.0) == 1.0
    assert sigma(2.0, 0.5, 0.25) == pytest.approx(1.0 / math.sqrt(1.5))
    with pytest.raises(DomainError):
        sigma(1.0, 1.5, 0.1)


def test_rs_pressure_annealed_branch():
    solution = rs_pressure(0.5, 0.0)
    assert solution.pressure == 0.0
    assert solution.q_bar == 0.0
    assert solution.regime == Regime.annealed


def test_rs_pressure_condensed_value():
    solution = rs_pressure(2.0, 0.0)
    assert solution.regime == Regime.condensed
    assert solution.q_bar == pytest.approx(0.25)
    assert solution.pressure == pytest.approx(-0.5 * math.log(2.0) + 0.3125, abs=1e-12)
    assert solution.pressure == pytest.approx(-0.034074, abs=1e-6)
    assert 2.0 * solution.sigma ** 2 == pytest.approx(1.0)


def test_rs_optimum_minimizes_the_trial_functional():
    for beta, lam in [(1.5, 0.0), (2.5, -0.5), (1.0, 0.8)]:
        q_star = rs_optimal_qbar(beta, lam)
        best = rs_trial_pressure(beta, lam, q_star)
        grid = np.linspace(0.0, 2.0, 201)
        assert all(rs_trial_pressure(beta, lam, q) >= best - 1e-14 for q in grid)
        assert rs_trial_gradient(beta, lam, q_star) == pytest.approx(0.0, abs=1e-14)


def test_rs_trial_at_zero_overlap_is_annealed():
    assert rs_trial_pressure(0.7, 0.3, 0.0) == pytest.approx(annealed_pressure(0.7, 0.3))


def test_rs_gradient_matches_finite_differences():
    beta, lam, q = 1.7, -0.2, 0.6
    h = 1e-6
    fd = (rs_trial_pressure(beta, lam, q + h) - rs_trial_pressure(beta, lam, q - h)) / (2 * h)
    assert rs_trial_gradient(beta, lam, q) == pytest.approx(fd, abs=1e-8)


@pytest.mark.parametrize("beta,lam", [(0.3, 0.0), (1.0, 0.0), (2.0, 0.0), (0.5, 0.7), (3.0, -1.0), (1.2, 0.95)])
def test_shell_supremum_equals_rs(beta, lam):
    shell = shell_lower_bound(beta, lam)
    assert shell.value == pytest.approx(rs_pressure(beta, lam).pressure, abs=1e-10)
    numeric = shell_lower_bound_numeric(beta, lam)
    assert numeric.value == pytest.approx(shell.value, abs=1e-9)
    assert numeric.value >= shell_objective(beta, lam, 0.5 * shell.r_squared)


def test_shell_objective_domain():
    with pytest.raises(DomainError):
        shell_objective(1.0, 0.0, 0.0)


def test_spherical_model():
    for beta in (0.5, 1.0, 2.0, 3.0):
        _, variational = spherical_variational(beta)
        assert spherical_pressure(beta, 1.0) == pytest.approx(variational, abs=1e-12)
    assert spherical_variational(0.5) == (0.0, pytest.approx(0.0625))
    assert spherical_variational(2.0)[0] == pytest.approx(0.5)
    with pytest.raises(DomainError):
        spherical_pressure(1.0, 0.0)


def test_second_moment_bound():
    assert second_moment_bound(0.6) == pytest.approx(1.25)
    assert second_moment_bound(0.0) == 1.0
    with pytest.raises(DomainError):
        second_moment_bound(1.0)


@pytest.mark.parametrize("lam", [-1.0, -0.5, 0.0, 0.5, 0.9])
def test_rs_pressure_is_continuous_at_the_critical_line(lam):
    beta_c = 1.0 - lam
    at = rs_pressure(beta_c, lam)
    below, above = rs_pressure(beta_c - 1e-7, lam), rs_pressure(beta_c + 1e-7, lam)
    assert (below.regime, at.regime, above.regime) == (Regime.annealed, Regime.annealed, Regime.condensed)
    assert abs(below.pressure - at.pressure) <= 1e-10
    assert abs(above.pressure - at.pressure) <= 1e-10
    assert above.q_bar == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("beta,lam", [(0.1, 0.0), (0.5, 0.5), (1.0, 0.0), (2.0, -0.5), (3.0, 0.9), (1.5, -1.0)])
def test_rs_trial_is_convex_in_the_squared_overlap(beta, lam):
    u = np.linspace(0.0, 4.0, 401)
    values = np.array([rs_trial_pressure(beta, lam, math.sqrt(x)) for x in u])
    slopes = np.diff(values) / np.diff(u)
    assert np.all(np.diff(slopes) >= -1e-10)


def test_rs_pressure_is_an_upper_bound_ordering():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        beta = rng.uniform(0.05, 3.0)
        lam = rng.uniform(-1.0, 0.9)
        q_bar = rng.uniform(0.0, 3.0)
        rs = rs_pressure(beta, lam).pressure
        assert rs_trial_pressure(beta, lam, q_bar) >= rs - 1e-12
        assert rs <= annealed_pressure(beta, lam) + 1e-12


def test_shell_supremum_equals_rs_on_a_grid():
    worst = 0.0
    for beta in np.linspace(3.0 / 50, 3.0, 50):
        for lam in np.linspace(-1.0, 0.9, 50):
            worst = max(worst, abs(shell_lower_bound(beta, lam).value - rs_pressure(beta, lam).pressure))
    assert worst <= 1e-10
