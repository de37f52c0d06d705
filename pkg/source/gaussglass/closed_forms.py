"""
Closed-form pressures of the Gaussian spin glass (zero external field).

Annealed pressure, replica-symmetric trial functional and its optimum, the
spherical model and the spherical-shell lower bound, whose supremum coincides
with the replica-symmetric pressure everywhere.
"""

import logging
import math
from enum import Enum
from typing import Tuple

from pydantic import BaseModel, ConfigDict
from scipy import integrate, optimize

from .errors import DomainError, NumericError
from .params import ModelParams

logger = logging.getLogger(__name__)

# Agreement required between the two condensed-phase expressions of A^RS
BRANCH_AGREEMENT = 1e-12


class Regime(str, Enum):
    annealed = "annealed"
    condensed = "condensed"


class RsSolution(BaseModel):
    model_config = ConfigDict(frozen=True)

    q_bar: float
    sigma: float
    pressure: float
    regime: Regime


class ShellSolution(BaseModel):
    model_config = ConfigDict(frozen=True)

    r_squared: float
    value: float


def _require_annealed_domain(lam: float):
    if lam >= 1.0:
        raise DomainError(f"annealed pressure undefined for lambda >= 1 (lambda={lam})")


def annealed_pressure(beta: float, lam: float) -> float:
    """−½ log(1−λ), independent of β."""
    _require_annealed_domain(lam)
    return -0.5 * math.log1p(-lam)


def annealed_mean_partition_finite_n(p: ModelParams) -> float:
    """E_J Z_N = (1−λ)^{−N/2}, exact at every N."""
    _require_annealed_domain(p.lam)
    if p.diagonal_removed:
        raise DomainError("the exact annealed identity holds for the full Hamiltonian only")
    if p.h != 0.0:
        raise DomainError("annealed closed forms assume h = 0")
    return (1.0 - p.lam) ** (-p.n_sites / 2.0)


def _quartic_gaussian_integral(coupling: float) -> float:
    """∫ φ(z) exp(−coupling·z⁴) dz to 1e-12 relative accuracy."""
    if coupling == 0.0:
        return 1.0

    def integrand(z: float) -> float:
        return math.exp(-0.5 * z * z - coupling * z ** 4)

    value, abserr = integrate.quad(integrand, 0.0, math.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    if abserr > 1e-12 * value:
        raise NumericError("quartic Gaussian integral did not converge",
                           {"coupling": coupling, "value": value, "abserr": abserr})
    return 2.0 * value / math.sqrt(2.0 * math.pi)


def annealed_mean_partition_prime_root(p: ModelParams) -> float:
    """
    N-th root of E_J Z'_N:
    (1−λ)^{−1/2} ∫ φ(z) exp(−β² z⁴ / (4N(1−λ)²)) dz.
    """
    _require_annealed_domain(p.lam)
    if p.h != 0.0:
        raise DomainError("annealed closed forms assume h = 0")
    coupling = p.beta ** 2 / (4.0 * p.n_sites * (1.0 - p.lam) ** 2)
    return _quartic_gaussian_integral(coupling) / math.sqrt(1.0 - p.lam)


def annealed_mean_partition_prime_finite_n(p: ModelParams) -> float:
    """E_J Z'_N for the diagonal-removed Hamiltonian."""
    return annealed_mean_partition_prime_root(p) ** p.n_sites


def is_annealed_region(beta: float, lam: float) -> bool:
    """β <= 1−λ; the critical line itself counts as annealed (q̄ = 0 there)."""
    return beta <= 1.0 - lam


def phase_regime(beta: float, lam: float) -> Regime:
    return Regime.annealed if is_annealed_region(beta, lam) else Regime.condensed


def second_moment_bound(beta_lambda: float) -> float:
    """1/√(1−β_λ²), the large-N bound on E(Z'²)/E²(Z')."""
    if not 0.0 <= beta_lambda < 1.0:
        raise DomainError(f"second-moment bound requires 0 <= beta_lambda < 1, got {beta_lambda}")
    return 1.0 / math.sqrt(1.0 - beta_lambda ** 2)


def sigma(beta: float, lam: float, q_bar: float) -> float:
    """σ = (1 − λ + β² q̄)^{−1/2} on the domain D = {1 − λ + β² q̄ > 0}."""
    denom = 1.0 - lam + beta ** 2 * q_bar
    if denom <= 0.0:
        raise DomainError(
            f"outside domain D: 1 - lambda + beta^2 q_bar = {denom} <= 0 "
            f"(beta={beta}, lambda={lam}, q_bar={q_bar})"
        )
    return 1.0 / math.sqrt(denom)


def rs_trial_pressure(beta: float, lam: float, q_bar: float) -> float:
    """Ã(β, λ, q̄) = log σ + ½β²q̄σ² + β²q̄²/4."""
    if q_bar < 0.0:
        raise DomainError(f"q_bar must be nonnegative, got {q_bar}")
    s = sigma(beta, lam, q_bar)
    return math.log(s) + 0.5 * beta ** 2 * q_bar * s * s + 0.25 * beta ** 2 * q_bar ** 2


def rs_trial_gradient(beta: float, lam: float, q_bar: float) -> float:
    """∂Ã/∂q̄ = (β²/2) q̄ (1 − β²σ⁴)."""
    s2 = sigma(beta, lam, q_bar) ** 2
    return 0.5 * beta ** 2 * q_bar * (1.0 - beta ** 2 * s2 * s2)


def rs_optimal_qbar(beta: float, lam: float) -> float:
    if is_annealed_region(beta, lam):
        return 0.0
    return (beta - (1.0 - lam)) / beta ** 2


def rs_pressure(beta: float, lam: float) -> RsSolution:
    """
    A^RS(β, λ) = inf over q̄ of Ã.

    In the condensed regime βσ² = 1 and the pressure is also
    −½ log β + βq̄/2 + β²q̄²/4; both forms are evaluated and must agree.
    """
    regime = phase_regime(beta, lam)
    if regime == Regime.annealed:
        _require_annealed_domain(lam)
        return RsSolution(q_bar=0.0, sigma=sigma(beta, lam, 0.0),
                          pressure=annealed_pressure(beta, lam), regime=regime)

    q_bar = rs_optimal_qbar(beta, lam)
    trial = rs_trial_pressure(beta, lam, q_bar)
    reduced = -0.5 * math.log(beta) + 0.5 * beta * q_bar + 0.25 * beta ** 2 * q_bar ** 2
    if abs(trial - reduced) > BRANCH_AGREEMENT * max(1.0, abs(trial)):
        raise NumericError("condensed RS expressions disagree",
                           {"beta": beta, "lambda": lam, "trial": trial, "reduced": reduced})
    return RsSolution(q_bar=q_bar, sigma=sigma(beta, lam, q_bar), pressure=trial, regime=regime)


def spherical_pressure(beta: float, r: float) -> float:
    """Pressure of the spherical model on the sphere of radius R√N."""
    if r <= 0.0:
        raise DomainError(f"radius must be positive, got {r}")
    x = beta * r * r
    if x < 1.0:
        return 0.25 * x * x
    return x - math.log(r) - 0.5 * math.log(beta) - 0.75


def spherical_variational(beta: float) -> Tuple[float, float]:
    """Minimizer and minimum of ½(q/(1−q) + log(1−q) + β²(1−q²)/2) over [0, 1)."""
    q = 0.0 if beta <= 1.0 else 1.0 - 1.0 / beta
    value = 0.5 * (q / (1.0 - q) + math.log1p(-q) + 0.5 * beta ** 2 * (1.0 - q * q))
    return q, value


def shell_objective(beta: float, lam: float, r_squared: float) -> float:
    """A^sf(β, R) − β²R⁴/4 + (λ−1)R²/2 + log R + ½, piecewise in βR²."""
    if r_squared <= 0.0:
        raise DomainError(f"r_squared must be positive, got {r_squared}")
    x = r_squared
    if beta * x < 1.0:
        return 0.5 * (lam - 1.0) * x + 0.5 * math.log(x) + 0.5
    return beta * x - 0.25 * beta ** 2 * x * x + 0.5 * (lam - 1.0) * x - 0.5 * math.log(beta) - 0.25


def shell_lower_bound(beta: float, lam: float) -> ShellSolution:
    """
    Supremum of the shell objective over R², at its closed-form stationary point.

    The result is checked against rs_pressure on the way out.
    """
    if lam < 1.0 and beta <= 1.0 - lam:
        x = 1.0 / (1.0 - lam)
    elif beta > 1.0 - lam:
        x = (2.0 * beta + lam - 1.0) / beta ** 2
    else:
        raise DomainError(f"no stationary shell radius for beta={beta}, lambda={lam}")

    solution = ShellSolution(r_squared=x, value=shell_objective(beta, lam, x))
    rs = rs_pressure(beta, lam).pressure
    if abs(solution.value - rs) > 1e-10 * max(1.0, abs(rs)):
        raise NumericError("shell supremum differs from the RS pressure",
                           {"beta": beta, "lambda": lam, "shell": solution.value, "rs": rs})
    return solution


def shell_lower_bound_numeric(beta: float, lam: float) -> ShellSolution:
    """Bounded Brent maximization of the shell objective over R² (concave in R²)."""
    hi = 1.0
    if lam < 1.0:
        hi += 4.0 / (1.0 - lam)
    if beta > 0.0:
        hi += 4.0 * (2.0 * beta + abs(lam) + 1.0) / beta ** 2
    elif lam >= 1.0:
        raise DomainError(f"shell objective is unbounded for beta=0, lambda={lam}")

    result = optimize.minimize_scalar(lambda x: -shell_objective(beta, lam, x),
                                      bounds=(1e-12, hi), method="bounded",
                                      options={"xatol": 1e-12, "maxiter": 500})
    if not result.success:
        raise NumericError("shell maximization failed", {"message": result.message})
    logger.debug(f"numeric shell optimum beta={beta}, lambda={lam}: R^2={result.x:.12g}")
    return ShellSolution(r_squared=float(result.x), value=-float(result.fun))
