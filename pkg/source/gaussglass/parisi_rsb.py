"""
Broken-replica trial pressures for piecewise-constant order parameters.

An order parameter x(q) on [0, Q] takes the value m_a on [q_{a−1}, q_a), a = 1..K,
with 0 = q_0 <= q_1 <= ... <= q_K = Q and 0 <= m_1 <= ... <= m_K <= 1. The trial
pressure is

    Â(β, λ; x) = log σ(Q) + ½β²σ²(Q) ∫_0^Q dq / D(q) + β²Q²/4 − β²/2 ∫_0^Q q x(q) dq,
    D(q) = 1 − β²σ²(Q) ∫_q^Q x(q') dq'.

D is affine on every level, so all integrals have closed forms. The Parisi
equation under the quadratic ansatz reduces to the backward system
a' = −b/2, b' = −x b², integrated here with RK4 in the variables (1/b, a) on a
graded mesh as an independent check.
"""

import json
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import optimize

from .closed_forms import sigma
from .errors import DomainError, GaussGlassError, SingularFunctionalError
from .parallel import TaskResult, run_tasks
from .streams import Purpose, generator

logger = logging.getLogger(__name__)

# Smallest admissible value of the denominator D(q)
DENOMINATOR_FLOOR = 1e-12

# Objective value assigned to infeasible points during the search
_PENALTY = 1e6

ENTROPY_AGREEMENT = 1e-12


class PiecewiseOrderParameter(BaseModel):
    """Step function x(q): value m[a] on [q[a−1], q[a]) with q[−1] = 0."""

    model_config = ConfigDict(frozen=True)

    q: List[float] = Field(..., min_length=1)
    m: List[float] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _check_levels(self) -> "PiecewiseOrderParameter":
        if len(self.q) != len(self.m):
            raise DomainError(f"{len(self.q)} breakpoints but {len(self.m)} values")
        previous = 0.0
        for value in self.q:
            if not math.isfinite(value) or value < previous:
                raise DomainError(f"breakpoints must satisfy 0 <= q_1 <= ... <= q_K, got {self.q}")
            previous = value
        previous = 0.0
        for value in self.m:
            if not math.isfinite(value) or value < previous or value > 1.0:
                raise DomainError(f"values must satisfy 0 <= m_1 <= ... <= m_K <= 1, got {self.m}")
            previous = value
        return self

    @property
    def k_levels(self) -> int:
        return len(self.q)

    @property
    def big_q(self) -> float:
        return self.q[-1]

    def levels(self) -> List[Tuple[float, float, float]]:
        """(q_lo, q_hi, m) for every level, bottom to top."""
        lows = [0.0] + list(self.q[:-1])
        return list(zip(lows, self.q, self.m))

    def value_at(self, q: float) -> float:
        for lo, hi, m in self.levels():
            if lo <= q < hi:
                return m
        return 1.0 if q >= self.big_q else 0.0

    def tail_integral(self, q: float) -> float:
        """∫_q^Q x(q') dq'."""
        return _tail_integral(self.q, self.m, q)

    def to_json(self) -> str:
        return json.dumps({"q": list(self.q), "m": list(self.m)})

    @classmethod
    def from_json(cls, text: str) -> "PiecewiseOrderParameter":
        data = json.loads(text)
        return cls(q=data["q"], m=data["m"])


@dataclass
class ParisiProfile:
    """b(q) and a(q) on a grid of [0, Q], from the backward integration."""
    grid: np.ndarray
    b_values: np.ndarray
    a_values: np.ndarray
    reference_error: float = 0.0


@dataclass
class RsbSearchResult:
    x: PiecewiseOrderParameter
    value: float
    restarts: int
    feasible_restarts: int


def rs_order_parameter(q_bar: float) -> PiecewiseOrderParameter:
    """The replica-symmetric order parameter: x = 0 on [0, q̄), jumping to 1 at q̄."""
    if q_bar < 0:
        raise DomainError(f"q_bar must be nonnegative, got {q_bar}")
    return PiecewiseOrderParameter(q=[q_bar, q_bar], m=[0.0, 1.0])


def _tail_integral(qs: Sequence[float], ms: Sequence[float], q: float) -> float:
    total = 0.0
    lo = 0.0
    for hi, m in zip(qs, ms):
        if hi > q:
            total += m * (hi - max(lo, q))
        lo = hi
    return total


def _level_denominators(k: float, qs: Sequence[float], ms: Sequence[float]):
    """Yield (q_lo, q_hi, m, D(q_lo), D(q_hi)) from the top level down."""
    tail = 0.0
    lows = [0.0] + list(qs[:-1])
    for lo, hi, m in reversed(list(zip(lows, qs, ms))):
        d_hi = 1.0 - k * tail
        tail += m * (hi - lo)
        yield lo, hi, m, 1.0 - k * tail, d_hi


def _check_denominator(k: float, qs: Sequence[float], ms: Sequence[float]):
    """Raise SingularFunctionalError at the largest q where D drops to the floor."""
    for lo, hi, m, d_lo, d_hi in _level_denominators(k, qs, ms):
        if d_lo <= DENOMINATOR_FLOOR:
            # D is affine on the level and increasing in q
            if d_hi <= DENOMINATOR_FLOOR or m == 0.0:
                crossing = hi
            else:
                crossing = hi - (d_hi - DENOMINATOR_FLOOR) / (k * m)
            raise SingularFunctionalError(
                f"denominator 1 - beta^2 sigma^2(Q) int_q^Q x vanishes at q = {crossing:.6g}",
                q=crossing,
                diagnostics={"k": k, "q": list(qs), "m": list(ms)},
            )


def _closed_form(k: float, qs: Sequence[float], ms: Sequence[float]) -> float:
    _check_denominator(k, qs, ms)
    total = 0.0
    for lo, hi, m, d_lo, d_hi in _level_denominators(k, qs, ms):
        width = hi - lo
        if width == 0.0:
            continue
        eps = k * m * width / d_hi
        if eps == 0.0:
            total += width / d_hi
        else:
            # ∫ dq / D over the level, D affine from d_lo to d_hi
            total += width / d_hi * (-math.log1p(-eps) / eps)
    return 0.5 * k * total


def _entropy_integral(beta: float, qs: Sequence[float], ms: Sequence[float]) -> float:
    lows = [0.0] + list(qs[:-1])
    q_x = sum(0.5 * m * (hi * hi - lo * lo) for lo, hi, m in zip(lows, qs, ms))
    big_q = qs[-1]
    return 0.25 * beta ** 2 * big_q ** 2 - 0.5 * beta ** 2 * q_x


def _entropy_sum(beta: float, qs: Sequence[float], ms: Sequence[float]) -> float:
    m_next = list(ms[1:]) + [1.0]
    return 0.25 * beta ** 2 * sum((mn - m) * q * q for q, m, mn in zip(qs, ms, m_next))


def _functional(beta: float, lam: float, qs: Sequence[float], ms: Sequence[float]) -> float:
    s = sigma(beta, lam, qs[-1])
    k = beta ** 2 * s * s
    return math.log(s) + _closed_form(k, qs, ms) + _entropy_integral(beta, qs, ms)


def _k(beta: float, lam: float, x: PiecewiseOrderParameter) -> float:
    return beta ** 2 * sigma(beta, lam, x.big_q) ** 2


def rsb_pressure_functional(beta: float, lam: float, x: PiecewiseOrderParameter) -> float:
    """Â(β, λ; x), all integrals in closed form."""
    return _functional(beta, lam, x.q, x.m)


def parisi_b_profile(beta: float, lam: float, x: PiecewiseOrderParameter, q: float) -> float:
    """b(q) from 1/b(q) = 1/(β²σ²(Q)) − ∫_q^Q x."""
    if not 0.0 <= q <= x.big_q:
        raise DomainError(f"q = {q} outside [0, Q = {x.big_q}]")
    k = _k(beta, lam, x)
    d = 1.0 - k * x.tail_integral(q)
    if d <= DENOMINATOR_FLOOR:
        raise SingularFunctionalError(f"b(q) diverges at q = {q:.6g}", q=q)
    return k / d


def parisi_closed_form(beta: float, lam: float, x: PiecewiseOrderParameter) -> float:
    """f(0, 0; x) = ½β²σ²(Q) ∫_0^Q dq / D(q)."""
    return _closed_form(_k(beta, lam, x), x.q, x.m)


def _level_mesh(u_top: float, m: float, width: float, n_steps: int) -> np.ndarray:
    """
    Values of 1/b on the steps of one level, top to bottom. With x = m > 0 they
    are geometric, so every step shrinks 1/b by the same ratio.
    """
    if m == 0.0:
        return np.full(n_steps + 1, u_top)
    log_ratio = math.log1p(-m * width / u_top)
    return u_top * np.exp(np.arange(n_steps + 1) / n_steps * log_ratio)


def parisi_ode_profile(beta: float, lam: float, x: PiecewiseOrderParameter,
                       n_steps: int = 10000) -> ParisiProfile:
    """
    Integrate b' = −x b², a' = −b/2 backward from b(Q) = β²σ²(Q), a(Q) = 0.

    The pair is stepped as (u, a) with u = 1/b, u' = x, using RK4 with ``n_steps``
    steps per level and restarting at every jump of x. On a level u is linear in
    q; steps are placed so that u shrinks by a fixed ratio per step, which keeps
    the relative step size independent of how close D(0) comes to zero. The
    largest relative gap between the stepped u and the exact D(q)/(β²σ²(Q)) at the
    level ends is reported as ``reference_error``.

    Raises:
        SingularFunctionalError: if D(q) drops to the floor on [0, Q]
    """
    k = _k(beta, lam, x)
    _check_denominator(k, x.q, x.m)
    if k == 0.0:
        grid = np.unique([0.0] + list(x.q))
        return ParisiProfile(grid, np.zeros_like(grid), np.zeros_like(grid))

    u, a = 1.0 / k, 0.0
    grid, bs, as_ = [x.big_q], [k], [a]
    reference_error = 0.0
    for lo, hi, m, d_lo, _ in _level_denominators(k, x.q, x.m):
        width = hi - lo
        if width == 0.0:
            continue
        mesh = _level_mesh(u, m, width, n_steps).tolist()
        for u0, u1 in zip(mesh[:-1], mesh[1:]):
            h = (u1 - u0) / m if m > 0.0 else -width / n_steps
            # u' = x is constant on the level and a does not feed back, so the
            # u stages are exact and stages 2 and 3 coincide
            u_mid = 0.5 * (u0 + u1)
            a += h * (-0.5 / u0 - 2.0 / u_mid - 0.5 / u1) / 6.0
        u = mesh[-1]
        if not (u > 0.0 and math.isfinite(a)):
            raise SingularFunctionalError(f"b(q) blew up near q = {lo:.6g}", q=lo)
        exact = d_lo / k
        reference_error = max(reference_error, abs(u - exact) / exact)
        grid.append(lo)
        bs.append(1.0 / u)
        as_.append(a)

    logger.debug(f"Parisi ODE: a(0) = {a:.15g}, 1/b reference error {reference_error:.3g}")
    order = slice(None, None, -1)
    return ParisiProfile(np.array(grid[order]), np.array(bs[order]), np.array(as_[order]), reference_error)


def parisi_ode_solve(beta: float, lam: float, x: PiecewiseOrderParameter, n_steps: int = 10000) -> float:
    """a(0) = f(0, 0; x) from the backward ODE."""
    if x.big_q == 0.0:
        return 0.0
    return float(parisi_ode_profile(beta, lam, x, n_steps).a_values[0])


def rsb_entropy_term(beta: float, x: PiecewiseOrderParameter) -> float:
    """
    β²/4 Σ_a (m_{a+1} − m_a) q_a² with m_{K+1} = 1, which equals
    β²Q²/4 − β²/2 ∫_0^Q q x(q) dq; both forms are computed and compared.
    """
    discrete = _entropy_sum(beta, x.q, x.m)
    integral = _entropy_integral(beta, x.q, x.m)
    if abs(discrete - integral) > ENTROPY_AGREEMENT * max(1.0, abs(integral)):
        raise GaussGlassError(f"entropy term mismatch: sum {discrete!r} vs integral {integral!r}")
    return integral


def stationarity_residual(beta: float, lam: float, x: PiecewiseOrderParameter) -> float:
    """max over [0, Q] of |D(q) − βσ²(Q)|; D is affine per level so breakpoints suffice."""
    s2 = sigma(beta, lam, x.big_q) ** 2
    k = beta ** 2 * s2
    points = [0.0] + list(x.q)
    return max(abs(1.0 - k * x.tail_integral(q) - beta * s2) for q in points)


def _objective(beta: float, lam: float, qs: Sequence[float], ms: Sequence[float]) -> float:
    try:
        return _functional(beta, lam, qs, ms)
    except (DomainError, SingularFunctionalError):
        return _PENALTY


def _coordinate_bounds(vec: np.ndarray, i: int, k_levels: int, q_max: float) -> Tuple[float, float]:
    if i < k_levels:
        lo = vec[i - 1] if i > 0 else 0.0
        hi = vec[i + 1] if i < k_levels - 1 else q_max
    else:
        j = i - k_levels
        lo = vec[i - 1] if j > 0 else 0.0
        hi = vec[i + 1] if j < k_levels - 1 else 1.0
    return lo, hi


def _coordinate_descent(beta: float, lam: float, vec: np.ndarray, k_levels: int, q_max: float,
                        max_sweeps: int = 50, tol: float = 1e-12) -> Tuple[np.ndarray, float]:
    def value(v: np.ndarray) -> float:
        return _objective(beta, lam, v[:k_levels], v[k_levels:])

    current = value(vec)
    for sweep in range(max_sweeps):
        start = current
        for i in range(2 * k_levels):
            lo, hi = _coordinate_bounds(vec, i, k_levels, q_max)
            if hi - lo <= 0.0:
                continue
            trial = vec.copy()

            def along(t: float) -> float:
                trial[i] = t
                return value(trial)

            result = optimize.minimize_scalar(along, bounds=(lo, hi), method="bounded",
                                              options={"xatol": 1e-12})
            # Endpoints are often optimal under the ordering constraints.
            candidates = [(float(result.fun), float(result.x)), (along(lo), lo), (along(hi), hi)]
            best_val, best_t = min(candidates)
            if best_val < current:
                vec[i] = best_t
                current = best_val
        if start - current <= tol:
            break
    return vec, current


def _project(vec: np.ndarray, k_levels: int, q_max: float) -> np.ndarray:
    q = np.sort(np.clip(vec[:k_levels], 0.0, q_max))
    m = np.sort(np.clip(vec[k_levels:], 0.0, 1.0))
    return np.concatenate([q, m])


def _polish(beta: float, lam: float, vec: np.ndarray, k_levels: int, q_max: float) -> np.ndarray:
    def penalized(v: np.ndarray) -> float:
        p = _project(v, k_levels, q_max)
        return _objective(beta, lam, p[:k_levels], p[k_levels:]) + float(np.sum((v - p) ** 2))

    result = optimize.minimize(penalized, vec, method="Nelder-Mead",
                               options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
    return _project(result.x, k_levels, q_max)


def _initial_point(rng: np.random.Generator, beta: float, lam: float, k_levels: int,
                   q_max: float, tries: int = 50) -> Optional[np.ndarray]:
    q_low = max(0.0, (lam - 1.0) / beta ** 2) if beta > 0 else 0.0
    for _ in range(tries):
        big_q = rng.uniform(q_low, q_max)
        q = np.sort(np.append(rng.uniform(0.0, big_q, k_levels - 1), big_q))
        m = np.sort(rng.uniform(0.0, 1.0, k_levels))
        vec = np.concatenate([q, m])
        if _objective(beta, lam, q, m) < _PENALTY:
            return vec
    return None


def _restart_task(item: tuple) -> TaskResult:
    index, beta, lam, k_levels, seed, q_max = item
    rng = generator(seed, Purpose.RESTARTS, index)
    vec = _initial_point(rng, beta, lam, k_levels, q_max)
    if vec is None:
        return TaskResult(index=index, error="no feasible starting point", error_type="DomainError")
    vec, value = _coordinate_descent(beta, lam, vec, k_levels, q_max)
    polished = _polish(beta, lam, vec, k_levels, q_max)
    polished, polished_value = _coordinate_descent(beta, lam, polished, k_levels, q_max)
    if polished_value < value:
        vec, value = polished, polished_value
    return TaskResult(index=index, value=(vec.tolist(), value))


def rsb_infimum_search(
    beta: float,
    lam: float,
    k_levels: int = 3,
    restarts: int = 16,
    seed: int = 20240601,
    q_max: float = 4.0,
    workers: Optional[int] = 1,
) -> RsbSearchResult:
    """
    Minimize Â over K-level order parameters with Q in [q_{K−1}, q_max].

    Each restart draws a random feasible start from the (seed, RESTARTS, index)
    stream, runs coordinate descent (bounded Brent per coordinate within its
    ordering interval), a Nelder–Mead polish on the projected problem and a final
    descent. The best value wins, ties going to the lowest restart index.

    Raises:
        DomainError: if no restart finds a feasible point
    """
    if k_levels < 1 or restarts < 1:
        raise DomainError("k_levels and restarts must be positive")
    items = [(r, beta, lam, k_levels, seed, q_max) for r in range(restarts)]
    results = run_tasks(_restart_task, items, workers)

    best: Optional[Tuple[float, int, List[float]]] = None
    feasible = 0
    for result in results:
        if result.error:
            continue
        feasible += 1
        vec, value = result.value
        if best is None or value < best[0]:
            best = (value, result.index, vec)
    if best is None:
        raise DomainError(f"no feasible order parameter found for beta={beta}, lambda={lam}")

    value, index, vec = best
    x = PiecewiseOrderParameter(q=vec[:k_levels], m=vec[k_levels:])
    logger.info(f"RSB search beta={beta}, lambda={lam}, K={k_levels}: {value:.12g} "
                f"(restart {index}, {feasible}/{restarts} feasible)")
    return RsbSearchResult(x=x, value=value, restarts=restarts, feasible_restarts=feasible)
