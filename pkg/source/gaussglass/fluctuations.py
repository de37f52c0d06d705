"""
Rescaled overlap fluctuations ξ₁₂ = √N (q₁₂ − q̄) along the RS interpolation.

The correlations A = ⟨ξ₁₂²⟩, B = ⟨ξ₁₂ξ₁₃⟩, C = ⟨ξ₁₂ξ₃₄⟩ obey a closed quadratic
system in the interpolation time t. In the annealed regime B = C = 0 and
A(t) = 1/(σ⁻⁴ − β²t), which diverges on the critical line at t = 1.
"""

import logging
import math
from enum import Enum
from typing import List, Tuple

from pydantic import BaseModel, ConfigDict

from .closed_forms import rs_optimal_qbar, sigma
from .errors import DivergenceError, DomainError
from .montecarlo import overlap_moment_samples, reduce_samples
from .params import McConfig, McEstimate, ModelParams

logger = logging.getLogger(__name__)

# |A| beyond this value counts as a blow-up of the integrator
BLOWUP_THRESHOLD = 1e12


class Prediction(str, Enum):
    annealed_exact = "annealed_exact"
    gaussian_ansatz = "gaussian_ansatz"


class CorrelationTriple(BaseModel):
    model_config = ConfigDict(frozen=True)

    a: float
    b: float
    c: float
    t: float
    prediction: Prediction = Prediction.annealed_exact


def cavity_moments(beta: float, lam: float, q_bar: float, j_prime):
    """
    ω(z) and ω(z²) of the one-body cavity measure with field β√q̄ J′.

    Args:
        beta: Inverse temperature
        lam: Variance shift λ
        q_bar: Trial overlap, nonnegative
        j_prime: Cavity field, a float or an array of independent draws

    Returns:
        (ω(z), ω(z²)) with the shape of ``j_prime``
    """
    if q_bar < 0:
        raise DomainError(f"q_bar must be nonnegative, got {q_bar}")
    s2 = sigma(beta, lam, q_bar) ** 2
    return beta * math.sqrt(q_bar) * s2 * j_prime, s2 + beta ** 2 * q_bar * s2 * s2 * j_prime ** 2


def initial_conditions(beta: float, lam: float, q_bar: float) -> CorrelationTriple:
    """
    (A, B, C) at t = 0 from the Gaussian moments E J′² = 1, E J′⁴ = 3:

        A(0) = σ⁴ + 2β²q̄σ⁶ + 3β⁴q̄²σ⁸ − q̄²
        B(0) = β²q̄σ⁶ + 3β⁴q̄²σ⁸ − q̄²
        C(0) = 3β⁴q̄²σ⁸ − q̄²

    These are the J′ averages of ω(z²)², ω(z²)ω(z)² and ω(z)⁴, minus q̄².

    Returns:
        The triple at t = 0, marked exact when q̄ = 0

    Raises:
        DomainError: if q̄ < 0 or (β, λ, q̄) lies outside the domain of σ
    """
    if q_bar < 0:
        raise DomainError(f"q_bar must be nonnegative, got {q_bar}")
    s2 = sigma(beta, lam, q_bar) ** 2
    b2q = beta ** 2 * q_bar
    common = 3.0 * b2q ** 2 * s2 ** 4 - q_bar ** 2
    prediction = Prediction.annealed_exact if q_bar == 0.0 else Prediction.gaussian_ansatz
    return CorrelationTriple(
        a=s2 * s2 + 2.0 * b2q * s2 ** 3 + common,
        b=b2q * s2 ** 3 + common,
        c=common,
        t=0.0,
        prediction=prediction,
    )


def ode_rhs(triple: CorrelationTriple, beta: float) -> Tuple[float, float, float]:
    return _rhs(triple.a, triple.b, triple.c, beta * beta)


def _rhs(a: float, b: float, c: float, beta2: float) -> Tuple[float, float, float]:
    return (
        beta2 * (a * a - 4.0 * b * b + 3.0 * c * c),
        beta2 * (2.0 * a * b - 6.0 * b * c + 6.0 * c * c - 2.0 * b * b),
        beta2 * (0.5 * a * c + 4.0 * b * b - 16.0 * b * c + 10.0 * c * c),
    )


def blowup_time(beta: float, lam: float) -> float:
    """σ⁻⁴/β² = (1−λ)²/β², where the annealed A(t) diverges."""
    if lam >= 1.0:
        raise DomainError(f"annealed fluctuations need lambda < 1, got {lam}")
    if beta == 0.0:
        return math.inf
    return (1.0 - lam) ** 2 / beta ** 2


def triple_trajectory(beta: float, lam: float, q_bar: float, t_points: int = 11,
                      n_steps: int = 10000) -> List[CorrelationTriple]:
    """
    RK4 solution of the (A, B, C) system recorded at ``t_points`` equally spaced
    times in [0, 1], ``n_steps`` steps over the whole interval.

    Raises:
        DivergenceError: if A exceeds BLOWUP_THRESHOLD or stops being finite
    """
    if t_points < 2:
        raise DomainError("t_points must be at least 2")
    return _integrate(beta, lam, q_bar, 1.0, n_steps, t_points)


def _integrate(beta: float, lam: float, q_bar: float, t_end: float, n_steps: int,
               t_points: int) -> List[CorrelationTriple]:
    if not 0.0 <= t_end <= 1.0:
        raise DomainError(f"t_end must lie in [0, 1], got {t_end}")
    if n_steps < 1:
        raise DomainError("n_steps must be positive")
    start = initial_conditions(beta, lam, q_bar)
    if q_bar == 0.0 and t_end > 0.0:
        t_star = blowup_time(beta, lam)
        if t_star <= t_end:
            raise DivergenceError(f"A(t) diverges at t* = {t_star:.6g} <= {t_end}", blowup_time=t_star)

    beta2 = beta * beta
    h = t_end / n_steps
    record = {round(k * n_steps / (t_points - 1)) for k in range(t_points)} if t_points > 1 else {n_steps}
    a, b, c = start.a, start.b, start.c
    out = [start] if 0 in record else []
    for step in range(1, n_steps + 1):
        k1 = _rhs(a, b, c, beta2)
        k2 = _rhs(a + 0.5 * h * k1[0], b + 0.5 * h * k1[1], c + 0.5 * h * k1[2], beta2)
        k3 = _rhs(a + 0.5 * h * k2[0], b + 0.5 * h * k2[1], c + 0.5 * h * k2[2], beta2)
        k4 = _rhs(a + h * k3[0], b + h * k3[1], c + h * k3[2], beta2)
        a += h * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) / 6.0
        b += h * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) / 6.0
        c += h * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]) / 6.0
        t = step * h
        if not (math.isfinite(a) and abs(a) < BLOWUP_THRESHOLD):
            raise DivergenceError(f"correlation system blew up near t = {t:.6g}", blowup_time=t,
                                  diagnostics={"step": step, "h": h})
        if step in record:
            out.append(CorrelationTriple(a=a, b=b, c=c, t=t, prediction=start.prediction))
    return out


def integrate_triple(beta: float, lam: float, q_bar: float, t_end: float = 1.0,
                     n_steps: int = 10000) -> CorrelationTriple:
    """
    (A, B, C) at t_end. At q̄ = 0 this is the exact annealed solution; for q̄ > 0
    the result is only the prediction of the Gaussian closure.

    Args:
        beta: Inverse temperature
        lam: Variance shift λ
        q_bar: Trial overlap of the interpolation
        t_end: Final time in [0, 1]
        n_steps: RK4 steps between 0 and t_end

    Returns:
        The triple at t_end

    Raises:
        DivergenceError: if t_end reaches the annealed blow-up time or the
            integrator leaves BLOWUP_THRESHOLD
    """
    if q_bar > 0.0:
        logger.info(f"q_bar={q_bar} > 0: correlation triple is a Gaussian-ansatz prediction")
    if t_end == 0.0:
        return initial_conditions(beta, lam, q_bar)
    return _integrate(beta, lam, q_bar, t_end, n_steps, 1)[-1]


def annealed_susceptibility(beta: float, lam: float) -> float:
    """⟨ξ₁₂²⟩ at t = 1 in the annealed regime: 1/((1−λ)² − β²)."""
    if lam >= 1.0 or beta >= 1.0 - lam:
        raise DivergenceError(f"critical line reached: beta={beta} >= 1 - lambda={1.0 - lam}",
                              blowup_time=blowup_time(beta, lam) if lam < 1.0 else None)
    return 1.0 / ((1.0 - lam) ** 2 - beta ** 2)


def mc_xi_second_moment(p: ModelParams, cfg: McConfig) -> McEstimate:
    """
    N·⟨(q₁₂ − q̄*)²⟩ from two-replica sampling, q̄* the RS optimum.

    Args:
        p: Model parameters
        cfg: Sampling configuration

    Returns:
        Disorder mean of the rescaled fluctuation, to compare with A(1)
    """
    q_star = rs_optimal_qbar(p.beta, p.lam)
    table, skipped = overlap_moment_samples(p, cfg, max_power=2)
    xi2 = p.n_sites * (table[:, 1] - 2.0 * q_star * table[:, 0] + q_star ** 2)
    return reduce_samples(xi2, skipped)
