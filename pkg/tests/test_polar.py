import math

import numpy as np
import pytest
from scipy import integrate

from gaussglass.errors import NumericError
from gaussglass.polar import (
    PolarForm,
    QuarticBlock,
    adaptive_log_partition,
    gibbs_stream,
    log_sphere_constant,
    pair_moment,
    random_directions,
    sphere_rule,
    truncation_radius,
)
from gaussglass.streams import generator


def gaussian_form(n: int, lam: float) -> PolarForm:
    return PolarForm(0.5 * lam * np.eye(n), np.zeros(n))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_sphere_rule_is_a_probability_with_isotropic_second_moment(n):
    rule = sphere_rule(n, 12)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(np.linalg.norm(rule.u, axis=1), 1.0, atol=1e-14)
    second = (rule.u * rule.weights[:, None]).T @ rule.u
    np.testing.assert_allclose(second, np.eye(n) / n, atol=1e-14)
    assert not rule.stochastic


def test_sphere_rule_limited_to_three_dimensions():
    with pytest.raises(ValueError):
        sphere_rule(4, 12)


def test_random_directions_are_orthonormal_frames():
    n = 4
    directions = random_directions(n, 40, generator(3, 4, 0))
    assert directions.size == 5 * 2 * n
    assert directions.stochastic
    first_frame = directions.u[:n]
    np.testing.assert_allclose(first_frame @ first_frame.T, np.eye(n), atol=1e-12)
    np.testing.assert_allclose(directions.u[n:2 * n], -first_frame)
    assert list(directions.groups[:2 * n]) == [0] * (2 * n)


def test_random_directions_use_at_least_two_frames():
    directions = random_directions(3, 1, generator(3, 4, 0))
    assert int(directions.groups.max()) + 1 == 2


def test_log_sphere_constant():
    assert log_sphere_constant(2) == pytest.approx(0.0, abs=1e-15)
    assert log_sphere_constant(1) == pytest.approx(0.5 * math.log(2.0 / math.pi))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_gaussian_partition_function_is_exact(n):
    lam = 0.3
    exact = -0.5 * n * math.log(1.0 - lam)
    form = gaussian_form(n, lam)
    assert gibbs_stream(form, sphere_rule(n, 8), 128).log_z == pytest.approx(exact, abs=1e-12)
    assert adaptive_log_partition(form, 128) == pytest.approx(exact, abs=1e-10)


def test_random_directions_exact_for_isotropic_forms():
    lam = -0.5
    stream = gibbs_stream(gaussian_form(5, lam), random_directions(5, 64, generator(1, 4, 0)), 128)
    assert stream.log_z == pytest.approx(-2.5 * math.log(1.0 - lam), abs=1e-12)
    assert stream.log_z_se == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_pair_moments_of_a_gaussian(n):
    lam = 0.2
    s2 = 1.0 / (1.0 - lam)
    stream = gibbs_stream(gaussian_form(n, lam), sphere_rule(n, 12), 128)
    assert pair_moment(stream, stream, 1) == pytest.approx(0.0, abs=1e-13)
    assert pair_moment(stream, stream, 2) == pytest.approx(s2 * s2 / n, rel=1e-12)
    assert pair_moment(stream, stream, 2, block=[0]) == pytest.approx(s2 * s2, rel=1e-12)


def test_gibbs_second_moment_of_a_gaussian():
    stream = gibbs_stream(gaussian_form(2, 0.5), sphere_rule(2, 12), 128)
    np.testing.assert_allclose(stream.second_moment(), 2.0 * np.eye(2), atol=1e-12)
    np.testing.assert_allclose(stream.first_moment(), 0.0, atol=1e-13)


def test_unconfined_form_is_rejected():
    with pytest.raises(NumericError):
        truncation_radius(PolarForm(np.eye(2), np.zeros(2)))


def test_min_quartic_of_disjoint_blocks():
    form = PolarForm(np.zeros((2, 2)), np.zeros(2), (
        QuarticBlock((0,), 0.3), QuarticBlock((1,), 0.2), QuarticBlock((0, 1), 0.05),
    ))
    assert form.min_quartic() == pytest.approx(0.05 + 0.12)
    assert not form.isotropic_quartic


def test_one_dimensional_form_with_field_against_direct_integration():
    form = PolarForm(np.array([[0.3]]), np.array([0.7]), (QuarticBlock((0,), 0.2),))

    def integrand(z: float) -> float:
        return math.exp(-0.5 * z * z + 0.3 * z * z + 0.7 * z - 0.2 * z ** 4) / math.sqrt(2.0 * math.pi)

    direct, _ = integrate.quad(integrand, -math.inf, math.inf, epsabs=0.0, epsrel=1e-13)
    assert adaptive_log_partition(form, 256) == pytest.approx(math.log(direct), abs=1e-10)
    assert gibbs_stream(form, sphere_rule(1, 4), 256).log_z == pytest.approx(math.log(direct), abs=1e-10)


def test_block_quartic_form_against_cartesian_integration():
    quad = np.array([[0.1, 0.2], [0.2, -0.1]])
    form = PolarForm(quad, np.array([0.3, -0.2]), (
        QuarticBlock((0,), 0.3), QuarticBlock((1,), 0.2), QuarticBlock((0, 1), 0.05),
    ))

    def integrand(y: float, x: float) -> float:
        z = np.array([x, y])
        return math.exp(form.exponent(z) - 0.5 * float(z @ z)) / (2.0 * math.pi)

    direct, _ = integrate.dblquad(integrand, -8.0, 8.0, -8.0, 8.0, epsabs=0.0, epsrel=1e-11)
    stream = gibbs_stream(form, sphere_rule(2, 48), 256)
    assert stream.log_z == pytest.approx(math.log(direct), abs=1e-8)
