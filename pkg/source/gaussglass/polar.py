"""
Radial-spherical integration of Gaussian-measure partition functions.

Every partition function in this package has the form

    Z = E_z exp( z·Kz + f·z − Σ_B c_B ‖z_B‖⁴ ),   z ~ N(0, I_N),

with K symmetric, f a field vector and a set of quartic blocks B (index sets with
coefficients c_B >= 0).  Writing z = r·u with u on the unit sphere, the radial
integral along each direction u,

    I(u) = ∫_0^∞ r^{N−1} exp( a(u) r² + c(u) r − b(u) r⁴ ) dr,
    a(u) = u·Ku − ½,  c(u) = f·u,  b(u) = Σ_B c_B ‖u_B‖⁴,

is one-dimensional and smooth, so it is done with a fixed Gauss–Legendre grid on
[0, r_max].  What remains is an average over directions, done either with a
deterministic rule on the sphere (small N) or with random orthonormal frames
(stratified Monte Carlo).  Gibbs moments of z come from the same profiles through
the conditional radial moments E[r^p | u].
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln

from .errors import DimensionError, NumericError

logger = logging.getLogger(__name__)

# Neglected radial tail relative to the envelope peak
TAIL_RATIO = 1e-14
_LOG_TAIL = math.log(TAIL_RATIO)

# Rows of the pairwise Gram matrix processed at once
_PAIR_CHUNK = 512


@dataclass(frozen=True)
class QuarticBlock:
    """A term c·‖z_B‖⁴ subtracted from the exponent."""
    indices: Tuple[int, ...]
    coefficient: float


@dataclass(frozen=True)
class PolarForm:
    """Exponent z·Kz + f·z − Σ_B c_B ‖z_B‖⁴ against the standard Gaussian measure."""
    quad: np.ndarray
    field: np.ndarray
    quartic: Tuple[QuarticBlock, ...] = ()

    def __post_init__(self):
        n = self.quad.shape[0]
        if self.quad.shape != (n, n):
            raise DimensionError(f"quadratic form must be square, got {self.quad.shape}")
        if self.field.shape != (n,):
            raise DimensionError(f"field has shape {self.field.shape}, expected ({n},)")
        for block in self.quartic:
            if block.coefficient < 0:
                raise ValueError("quartic coefficients must be nonnegative")
            if any(i < 0 or i >= n for i in block.indices):
                raise DimensionError(f"quartic block {block.indices} out of range for N={n}")

    @property
    def n(self) -> int:
        return self.quad.shape[0]

    @property
    def has_field(self) -> bool:
        return bool(np.any(self.field != 0.0))

    @property
    def isotropic_quartic(self) -> bool:
        """True when every quartic block covers all sites (rotation invariant)."""
        return all(len(b.indices) == self.n for b in self.quartic)

    def exponent(self, z: np.ndarray) -> float:
        """The exponent at a configuration, without the Gaussian base measure."""
        value = float(z @ self.quad @ z + self.field @ z)
        for block in self.quartic:
            s = float(np.sum(z[list(block.indices)] ** 2))
            value -= block.coefficient * s * s
        return value

    def coefficients(self, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Radial coefficients (a, b, c) for the rows of ``u``."""
        a = np.einsum("mi,ij,mj->m", u, self.quad, u) - 0.5
        c = u @ self.field
        b = np.zeros(u.shape[0])
        for block in self.quartic:
            s = np.sum(u[:, list(block.indices)] ** 2, axis=1)
            b += block.coefficient * s * s
        return a, b, c

    def min_quartic(self) -> float:
        """Lower bound of b(u) over the unit sphere."""
        full = sum(b.coefficient for b in self.quartic if len(b.indices) == self.n)
        partial = [b for b in self.quartic if len(b.indices) < self.n]
        if not partial:
            return full
        covered = sorted(i for b in partial for i in b.indices)
        if covered != list(range(self.n)) or any(b.coefficient == 0 for b in partial):
            return full
        # Disjoint blocks covering all sites: min of Σ c_B s_B² with Σ s_B = 1
        return full + 1.0 / sum(1.0 / b.coefficient for b in partial)

    def rotated(self) -> Tuple["PolarForm", np.ndarray]:
        """
        Diagonalize the quadratic form.

        Only valid when the quartic part is rotation invariant.

        Returns:
            (form in eigen-coordinates, eigenvalues in ascending order)
        """
        if not self.isotropic_quartic:
            raise ValueError("cannot rotate a form with block quartic terms")
        mu, vecs = np.linalg.eigh(0.5 * (self.quad + self.quad.T))
        return PolarForm(np.diag(mu), vecs.T @ self.field, self.quartic), mu


@dataclass(frozen=True)
class DirectionSet:
    """Directions on the unit sphere with weights summing to one."""
    u: np.ndarray
    weights: np.ndarray
    groups: Optional[np.ndarray] = None   # frame index of each direction (random sets)

    @property
    def size(self) -> int:
        return self.u.shape[0]

    @property
    def stochastic(self) -> bool:
        return self.groups is not None


@dataclass
class RadialProfile:
    """Per-direction log radial integrals and conditional radial moments."""
    log_weight: np.ndarray
    moments: Dict[int, np.ndarray] = field(default_factory=dict)
    r_max: float = 0.0


@dataclass
class GibbsStream:
    """A direction set together with its profile and normalized Gibbs weights."""
    directions: DirectionSet
    profile: RadialProfile
    pi: np.ndarray
    log_z: float
    log_z_se: float

    def radial_moment(self, power: int) -> np.ndarray:
        return self.profile.moments[power]

    def first_moment(self) -> np.ndarray:
        """ω(z) estimated from this stream."""
        return (self.pi * self.radial_moment(1)) @ self.directions.u

    def second_moment(self) -> np.ndarray:
        """ω(z zᵀ) estimated from this stream."""
        u = self.directions.u
        return (u * (self.pi * self.radial_moment(2))[:, None]).T @ u


@lru_cache(maxsize=16)
def _leggauss(points: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(points)


def log_sphere_constant(n: int) -> float:
    """log of (2π)^{−N/2}·|S^{N−1}|, the prefactor in front of E_u I(u)."""
    return (1.0 - n / 2.0) * math.log(2.0) - float(gammaln(n / 2.0))


def _envelope(n: int, a: float, b: float, c: float, r: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        log_r = np.log(r)
    return (n - 1) * log_r + a * r * r + c * r - b * r ** 4


def truncation_radius(form: PolarForm) -> float:
    """
    Radius beyond which the radial integrand of every direction is below
    TAIL_RATIO of the envelope peak.

    The envelope uses the largest a(u), the largest |c(u)| and the smallest b(u).
    """
    n = form.n
    a_max = float(np.linalg.eigvalsh(0.5 * (form.quad + form.quad.T))[-1]) - 0.5
    c_max = float(np.linalg.norm(form.field))
    b_min = form.min_quartic()
    if b_min <= 0.0 and a_max >= 0.0:
        raise NumericError(
            "partition function diverges: no quartic confinement and a nonnegative quadratic term",
            {"a_max": a_max, "b_min": b_min},
        )

    grid = np.geomspace(1e-6, 1e3, 4000)
    env = _envelope(n, a_max, b_min, c_max, grid)
    peak = int(np.argmax(env))
    target = env[peak] + _LOG_TAIL

    lo = grid[peak]
    hi = max(lo * 2.0, 1.0)
    while _envelope(n, a_max, b_min, c_max, np.array([hi]))[0] > target:
        hi *= 2.0
        if hi > 1e8:
            raise NumericError("could not bracket the radial truncation radius",
                               {"a_max": a_max, "b_min": b_min, "c_max": c_max})

    def excess(r: float) -> float:
        return _envelope(n, a_max, b_min, c_max, np.array([r]))[0] - target

    return float(optimize.brentq(excess, lo, hi, xtol=1e-12))


def radial_profile(
    form: PolarForm,
    directions: np.ndarray,
    radial_points: int = 512,
    powers: Sequence[int] = (),
    r_max: Optional[float] = None,
) -> RadialProfile:
    """
    Evaluate log I(u) and E[r^p | u] for each row of ``directions``.

    Args:
        form: The exponent
        directions: Array (M, N) of unit vectors
        radial_points: Gauss–Legendre nodes on [0, r_max]
        powers: Radial moment orders to return
        r_max: Truncation radius (computed when omitted)

    Returns:
        RadialProfile with log_weight of shape (M,) and one array per power
    """
    if directions.ndim != 2 or directions.shape[1] != form.n:
        raise DimensionError(f"directions must have shape (M, {form.n}), got {directions.shape}")
    if r_max is None:
        r_max = truncation_radius(form)

    x, w = _leggauss(radial_points)
    r = 0.5 * r_max * (x + 1.0)
    log_w = np.log(0.5 * r_max * w)

    a, b, c = form.coefficients(directions)
    log_f = ((form.n - 1) * np.log(r))[None, :] + a[:, None] * r * r + c[:, None] * r \
        - b[:, None] * r ** 4 + log_w[None, :]
    if not np.all(np.isfinite(log_f)):
        raise NumericError("non-finite radial integrand", {"r_max": r_max})

    row_max = np.max(log_f, axis=1, keepdims=True)
    scaled = np.exp(log_f - row_max)
    mass = np.sum(scaled, axis=1)
    profile = RadialProfile(log_weight=np.log(mass) + row_max[:, 0], r_max=r_max)
    for p in powers:
        profile.moments[p] = (scaled @ r ** p) / mass
    return profile


def sphere_rule(n: int, points: int) -> DirectionSet:
    """
    Deterministic product rule for the uniform measure on S^{N−1}, N <= 3.

    N = 1 uses the two points ±1; N = 2 the trapezoid rule in the angle with
    ``4·points`` nodes (spectral for periodic integrands); N = 3 Gauss–Legendre in
    cos θ (``points`` nodes) times the trapezoid rule in φ (``2·points`` nodes).
    """
    if n == 1:
        return DirectionSet(np.array([[1.0], [-1.0]]), np.array([0.5, 0.5]))
    if n == 2:
        m = 4 * points
        theta = 2.0 * np.pi * np.arange(m) / m
        u = np.column_stack([np.cos(theta), np.sin(theta)])
        return DirectionSet(u, np.full(m, 1.0 / m))
    if n == 3:
        x, w = _leggauss(points)
        m_phi = 2 * points
        phi = 2.0 * np.pi * np.arange(m_phi) / m_phi
        cos_t = np.repeat(x, m_phi)
        sin_t = np.sqrt(1.0 - cos_t ** 2)
        phis = np.tile(phi, points)
        u = np.column_stack([sin_t * np.cos(phis), sin_t * np.sin(phis), cos_t])
        weights = np.repeat(w, m_phi) / (2.0 * m_phi)
        return DirectionSet(u, weights)
    raise ValueError(f"deterministic sphere rules exist for N <= 3, got N={n}")


def random_directions(n: int, count: int, rng: np.random.Generator) -> DirectionSet:
    """
    Stratified random directions: Haar-random orthonormal frames and their
    antipodes, 2N directions per frame, at least two frames.

    Each frame integrates even quadratic functions of u exactly, and the frame
    averages are i.i.d., which gives the standard error.
    """
    frames = max(2, math.ceil(count / (2 * n)))
    blocks = []
    for _ in range(frames):
        g = rng.standard_normal((n, n))
        q, r = np.linalg.qr(g)
        q = q * np.sign(np.diag(r))[None, :]
        blocks.append(q.T)
        blocks.append(-q.T)
    # Rows are ordered (frame, sign, column), so each frame is contiguous.
    u = np.concatenate(blocks, axis=0)
    groups = np.repeat(np.arange(frames), 2 * n)
    return DirectionSet(u, np.full(u.shape[0], 1.0 / u.shape[0]), groups)


def gibbs_stream(
    form: PolarForm,
    directions: DirectionSet,
    radial_points: int = 512,
    powers: Sequence[int] = (1, 2),
    bias_correction: bool = True,
) -> GibbsStream:
    """
    Combine radial profiles into log Z and normalized Gibbs weights.

    For random direction sets the standard error of log Z comes from the spread
    of frame averages (delta method) and, when ``bias_correction`` is set, the
    second-order bias −Var/(2·mean²) of the plug-in logarithm is removed.
    """
    profile = radial_profile(form, directions.u, radial_points, powers)
    shift = float(np.max(profile.log_weight))
    rel = np.exp(profile.log_weight - shift) * directions.weights
    total = float(np.sum(rel))
    if not (total > 0 and math.isfinite(total)):
        raise NumericError("direction average underflowed", {"shift": shift})
    pi = rel / total
    log_z = log_sphere_constant(form.n) + shift + math.log(total)
    log_z_se = 0.0

    if directions.stochastic:
        frames = int(directions.groups.max()) + 1
        per_frame = np.bincount(directions.groups, weights=rel) * frames
        mean = float(np.mean(per_frame))
        var_of_mean = float(np.var(per_frame, ddof=1)) / frames
        log_z_se = math.sqrt(var_of_mean) / mean
        if bias_correction:
            log_z += var_of_mean / (2.0 * mean * mean)

    return GibbsStream(directions, profile, pi, log_z, log_z_se)


def pair_moment(
    s1: GibbsStream,
    s2: GibbsStream,
    power: int,
    block: Optional[Sequence[int]] = None,
) -> float:
    """
    ⟨q^p⟩ for two replicas drawn from independent streams of the same Gibbs state.

    q is the overlap restricted to ``block`` (all sites by default):
    q = (1/|B|) Σ_{i∈B} z¹_i z²_i.
    """
    idx = slice(None) if block is None else list(block)
    size = s1.directions.u.shape[1] if block is None else len(block)
    alpha = s1.pi * s1.radial_moment(power)
    beta_ = s2.pi * s2.radial_moment(power)
    u2 = s2.directions.u[:, idx]
    total = 0.0
    for start in range(0, s1.directions.size, _PAIR_CHUNK):
        stop = start + _PAIR_CHUNK
        gram = s1.directions.u[start:stop, idx] @ u2.T
        total += float(alpha[start:stop] @ (gram ** power) @ beta_)
    return total / size ** power


def _periodic_mean(fn, epsrel: float, diagnostics: Dict[str, float],
                   start: int = 16, max_nodes: int = 1 << 14) -> float:
    """
    Mean of a smooth 2π-periodic function by the trapezoid rule, doubling the
    node count until two successive means agree to ``epsrel``.
    """
    m = start
    previous = float(np.mean(fn(2.0 * np.pi * np.arange(m) / m)))
    while m < max_nodes:
        m *= 2
        # Only the new midpoints need evaluating.
        odd = float(np.mean(fn(2.0 * np.pi * (np.arange(m // 2) + 0.5) / (m // 2))))
        current = 0.5 * (previous + odd)
        if abs(current - previous) <= epsrel * abs(current):
            return current
        previous = current
    diagnostics.update({"where": "phi", "nodes": m})
    raise NumericError("periodic trapezoid refinement did not converge", diagnostics)


def adaptive_log_partition(
    form: PolarForm,
    radial_points: int = 512,
    epsrel: float = 1e-11,
    limit: int = 200,
) -> float:
    """
    log Z by adaptive quadrature over the angles and Gauss–Legendre in the
    radius, N <= 3. scipy ``quad`` handles the polar angle; for N = 3 the azimuth
    is a periodic trapezoid rule refined by doubling.

    With an isotropic quartic part the form is first diagonalized; without a
    field the integrand is then even in every eigen-coordinate and only one
    octant (quadrant, half-line) is integrated.

    Raises:
        NumericError: if the adaptive refinement reports non-convergence
    """
    n = form.n
    if n > 3:
        raise ValueError(f"adaptive quadrature supports N <= 3, got N={n}")

    reflect = False
    if form.isotropic_quartic:
        form, _ = form.rotated()
        reflect = not form.has_field
    r_max = truncation_radius(form)

    axes = np.vstack([np.eye(n), -np.eye(n)])
    shift = float(np.max(radial_profile(form, axes, radial_points, r_max=r_max).log_weight))

    def radial(u: np.ndarray) -> np.ndarray:
        lw = radial_profile(form, u, radial_points, r_max=r_max).log_weight
        return np.exp(lw - shift)

    diagnostics: Dict[str, float] = {"n": n, "r_max": r_max}

    def checked(result: tuple, where: str) -> float:
        value, abserr = result[0], result[1]
        if len(result) > 3 and abserr > 100 * epsrel * abs(value):
            diagnostics.update({"where": where, "value": value, "abserr": abserr})
            raise NumericError(f"adaptive quadrature did not converge ({where})", diagnostics)
        return value

    if n == 1:
        total = 0.0
        for sign in (1.0, -1.0) if not reflect else (1.0,):
            a, b, c = form.coefficients(np.array([[sign]]))

            def f1(r: float, a=a[0], b=b[0], c=c[0]) -> float:
                return math.exp(a * r * r + c * r - b * r ** 4 - shift)

            total += checked(integrate.quad(f1, 0.0, r_max, epsabs=0.0, epsrel=epsrel,
                                             limit=limit, full_output=1), "radius")
        mean = total / (1.0 if reflect else 2.0)
    elif n == 2:
        upper = 0.5 * np.pi if reflect else 2.0 * np.pi

        def f2(theta: float) -> float:
            return float(radial(np.array([[math.cos(theta), math.sin(theta)]]))[0])

        mean = checked(integrate.quad(f2, 0.0, upper, epsabs=0.0, epsrel=epsrel,
                                      limit=limit, full_output=1), "theta") / upper
    else:
        x_lo = 0.0 if reflect else -1.0
        phi_hi = 0.5 * np.pi if reflect else 2.0 * np.pi

        def inner(x: float) -> float:
            s = math.sqrt(max(0.0, 1.0 - x * x))

            def ring(phi: np.ndarray) -> np.ndarray:
                u = np.column_stack([s * np.cos(phi), s * np.sin(phi), np.full(phi.shape, x)])
                return radial(u)

            return _periodic_mean(ring, epsrel, diagnostics) * phi_hi

        outer = checked(integrate.quad(inner, x_lo, 1.0, epsabs=0.0, epsrel=epsrel,
                                       limit=limit, full_output=1), "cos_theta")
        mean = outer / ((1.0 - x_lo) * phi_hi)

    if not (mean > 0 and math.isfinite(mean)):
        raise NumericError("adaptive quadrature produced a non-positive mean", diagnostics)
    logger.debug(f"adaptive quadrature N={n}: r_max={r_max:.4g}, log mean={math.log(mean):.12g}")
    return log_sphere_constant(n) + shift + math.log(mean)
