"""
Shear-induced chaos: Lyapunov exponents of the stochastic cylinder model by
quadrature and by Monte Carlo, the threshold sigma_0 and the Hopf normal form.
"""
import dataclasses
import enum
import functools
import logging as log
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize

from .kernel import (
    DlimitError,
    FloatArray,
    InvalidParameter,
    NonFiniteState,
    Scheme,
    derive_seed,
    integrate_sde_ensemble,
)

PhaseFn = Callable[[FloatArray], FloatArray]

_TAIL_LOG = -40.0


class QuadratureNonConvergent(DlimitError):
    pass


class BracketingFailure(DlimitError):
    pass


@enum.unique
class Method(enum.Enum):
    Quadrature = "Quadrature"
    MonteCarlo = "MonteCarlo"


@dataclasses.dataclass(frozen=True)
class LyapPair:
    lambda1: float
    lambda2: float
    method: Method
    se: Optional[float] = None


@dataclasses.dataclass(frozen=True)
class NoiseField:
    f: PhaseFn
    fprime: PhaseFn


def _sine_fields() -> Tuple[NoiseField, ...]:
    two_pi = 2 * math.pi
    return (
        NoiseField(lambda th: np.sin(two_pi * th) / two_pi, lambda th: np.cos(two_pi * th)),
        NoiseField(lambda th: np.cos(two_pi * th) / two_pi, lambda th: -np.sin(two_pi * th)),
    )


@dataclasses.dataclass(frozen=True)
class ShearParams:
    alpha: float
    b: float
    sigma: float
    fields: Tuple[NoiseField, ...] = dataclasses.field(default_factory=_sine_fields)

    def __post_init__(self) -> None:
        if min(self.alpha, self.b, self.sigma) < 0:
            raise InvalidParameter("alpha, b and sigma must be non-negative")
        if len(self.fields) < 2:
            raise InvalidParameter("at least two noise fields are required")

    @property
    def m(self) -> int:
        return len(self.fields)


def check_sum_condition(params: ShearParams, n_grid: int = 1000) -> float:
    """Max deviation of sum_i f_i'(theta)^2 from 1 on a uniform grid."""
    theta = np.arange(n_grid) / n_grid
    total = sum(field.fprime(theta) ** 2 for field in params.fields)
    return float(np.max(np.abs(total - 1)))


def _moment_ratio(kappa: float, linear: float) -> float:
    """<v> under the density proportional to v^(-1/2) exp(-kappa v^3/6 + linear v).

    With v = w^2 the v^(-1/2) singularity disappears; exponents are shifted by
    their maximum so that nothing overflows.
    """
    v_peak = math.sqrt(2 * linear / kappa) if linear > 0 else 0.0
    log_peak = -kappa * v_peak**3 / 6 + linear * v_peak

    def log_weight(w: float) -> float:
        v = w * w
        return -kappa * v**3 / 6 + linear * v - log_peak

    upper = max(2 * math.sqrt(v_peak), (6 / kappa) ** (1 / 6))
    while log_weight(upper) > _TAIL_LOG:
        upper *= 2
    points = [math.sqrt(v_peak)] if 0 < v_peak < upper * upper else None

    def quad(fn: Callable[[float], float]) -> float:
        out = integrate.quad(fn, 0.0, upper, points=points, limit=400, epsabs=0.0, epsrel=1e-10, full_output=1)
        if len(out) == 4:
            raise QuadratureNonConvergent(out[3])
        return float(out[0])

    numerator = quad(lambda w: w * w * math.exp(log_weight(w)))
    denominator = quad(lambda w: math.exp(log_weight(w)))
    return numerator / denominator


def stationary_density(alpha: float, b: float, sigma: float) -> Callable[[float], float]:
    """Unnormalized density m(v) of the rescaled amplitude process."""
    s = b * sigma
    return lambda v: v**-0.5 * math.exp(-s * v**3 / 6 + alpha**2 * v / (2 * s))


def lyapunov_quadrature(alpha: float, b: float, sigma: float) -> LyapPair:
    """lambda1 = -alpha/2 + (b sigma / 2) <v>, lambda2 = -alpha - lambda1."""
    if alpha < 0 or b < 0 or sigma < 0:
        raise InvalidParameter("alpha, b and sigma must be non-negative")
    s = b * sigma
    if s == 0:
        # no shear or no noise: the deterministic cycle
        return LyapPair(0.0, -alpha, Method.Quadrature)
    mean_v = _moment_ratio(s, alpha * alpha / (2 * s))
    lambda1 = -alpha / 2 + s / 2 * mean_v
    return LyapPair(lambda1, -alpha - lambda1, Method.Quadrature)


def lyapunov_rescaled(alpha: float, b: float, sigma: float) -> LyapPair:
    """Same exponents via u = (b sigma / alpha) v: lambda1 = alpha/2 (<u>_K - 1), K = alpha^3/(b sigma)^2."""
    if alpha <= 0 or b <= 0 or sigma <= 0:
        raise InvalidParameter("the rescaled form needs alpha, b, sigma > 0")
    big_k = alpha**3 / (b * sigma) ** 2
    mean_u = _moment_ratio(big_k, big_k / 2)
    lambda1 = alpha / 2 * (mean_u - 1)
    return LyapPair(lambda1, -alpha - lambda1, Method.Quadrature)


@functools.lru_cache(maxsize=None)
def compute_c0() -> float:
    """1/sigma^2 at the sign change of lambda1 for alpha = b = 1."""

    def top(sigma: float) -> float:
        return lyapunov_quadrature(1.0, 1.0, sigma).lambda1

    lo, hi = 0.5, 5.0
    if not top(lo) < 0 < top(hi):
        raise BracketingFailure(f"lambda1 has no sign change on [{lo}, {hi}]")
    sigma0 = optimize.bisect(top, lo, hi, xtol=1e-13, rtol=1e-15, maxiter=200)
    c0 = 1 / sigma0**2
    log.info("computed c0=%.10f (sigma0(1,1)=%.10f)", c0, sigma0)
    return float(c0)


@functools.lru_cache(maxsize=None)
def compute_c0_rescaled() -> float:
    """The K at which <u>_K = 1; equals c0 since sigma_0(1, 1) = c0^(-1/2)."""

    def excess(big_k: float) -> float:
        return _moment_ratio(big_k, big_k / 2) - 1

    lo, hi = 0.01, 10.0
    if not excess(lo) > 0 > excess(hi):
        raise BracketingFailure(f"<u> - 1 has no sign change on [{lo}, {hi}]")
    return float(optimize.bisect(excess, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200))


def sigma_zero(alpha: float, b: float) -> float:
    if alpha <= 0 or b <= 0:
        raise InvalidParameter("alpha and b must be positive")
    return alpha**1.5 / (math.sqrt(compute_c0()) * b)


@dataclasses.dataclass(frozen=True)
class McConfig:
    step: float = 0.005
    renorm_interval: float = 0.5
    transient_fraction: float = 0.1

    @classmethod
    def default(cls) -> "McConfig":
        return cls()


class _GrowthMeter:
    """Renormalizes tangent columns in place and accumulates their log-growth."""

    def __init__(self, n_reps: int, tangent: slice, t_start: float):
        self.tangent = tangent
        self.t_start = t_start
        self.growth = np.zeros(n_reps)

    def __call__(self, t: float, states: FloatArray) -> FloatArray:
        norms = np.linalg.norm(states[:, self.tangent], axis=1)
        if t > self.t_start:
            self.growth += np.log(norms)
        states = states.copy()
        states[:, self.tangent] /= norms[:, None]
        return states


def _summarize(growth: FloatArray, duration: float, alpha: float, nonfinite: bool) -> LyapPair:
    if nonfinite or not np.all(np.isfinite(growth)):
        raise NonFiniteState("tangent dynamics became non-finite")
    rates = growth / duration
    lambda1 = float(np.mean(rates))
    se = float(np.std(rates, ddof=1) / math.sqrt(rates.size)) if rates.size > 1 else math.nan
    return LyapPair(lambda1, -alpha - lambda1, Method.MonteCarlo, se)


def _renorm_schedule(t_total: float, config: McConfig) -> Tuple[int, float, float]:
    hook_every = max(1, int(round(config.renorm_interval / config.step)))
    t_start = config.transient_fraction * t_total
    interval = hook_every * config.step
    n_counted = int(math.floor(t_total / interval)) - int(math.floor(t_start / interval))
    # hook fires at multiples of the interval strictly after t_start
    return hook_every, t_start, n_counted * interval


def mc_lyapunov_cylinder(
    params: ShearParams,
    t_total: float = 200.0,
    n_reps: int = 32,
    base_seed: int = 0,
    config: Optional[McConfig] = None,
) -> LyapPair:
    """Top exponent of dy = -alpha y dt + sigma sum f_i(theta) o dW_i, dtheta = (1 + b y) dt.

    State columns: y, theta, and the tangent (xi, eta).
    """
    config = config or McConfig.default()
    alpha, b, sigma = params.alpha, params.b, params.sigma
    fields = params.fields
    m = params.m

    def drift(_t: float, z: FloatArray) -> FloatArray:
        y, xi = z[:, 0], z[:, 2]
        return np.stack([-alpha * y, 1 + b * y, -alpha * xi, b * xi], axis=1)

    def diffusion(_t: float, z: FloatArray) -> FloatArray:
        theta, eta = z[:, 1], z[:, 3]
        g = np.zeros((z.shape[0], 4, m))
        for i, field in enumerate(fields):
            g[:, 0, i] = sigma * field.f(theta)
            g[:, 2, i] = sigma * field.fprime(theta) * eta
        return g

    states0 = np.tile([0.0, 0.0, 1.0, 0.0], (n_reps, 1))
    states0[:, 1] = np.arange(n_reps) / n_reps
    hook_every, t_start, duration = _renorm_schedule(t_total, config)
    meter = _GrowthMeter(n_reps, slice(2, 4), t_start)
    ensemble = integrate_sde_ensemble(
        drift,
        diffusion,
        states0,
        (0.0, t_total),
        config.step,
        Scheme.HEUN_STRATONOVICH,
        [derive_seed(base_seed, i) for i in range(n_reps)],
        noise_dim=m,
        record_every=hook_every * 100,
        hook=meter,
        hook_every=hook_every,
    )
    return _summarize(meter.growth, duration, alpha, bool(np.any(ensemble.nonfinite)))


def hopf_limit_cycle(alpha: float, beta: float, a: float, b: float) -> Tuple[float, float]:
    """Radius and angular speed of the deterministic cycle."""
    radius = math.sqrt(alpha / a)
    return radius, beta - b * radius * radius


def mc_lyapunov_hopf(
    alpha: float,
    beta: float,
    a: float,
    b: float,
    sigma: float,
    t_total: float = 200.0,
    n_reps: int = 16,
    base_seed: int = 0,
    config: Optional[McConfig] = None,
) -> LyapPair:
    """Top exponent of the Hopf normal form with two independent additive noises."""
    # pylint: disable=too-many-arguments,too-many-locals
    if a <= 0:
        raise InvalidParameter("a must be positive")
    config = config or McConfig.default()

    def field(x: FloatArray, y: FloatArray) -> Tuple[FloatArray, FloatArray]:
        r2 = x * x + y * y
        return (
            alpha * x - beta * y - (a * x - b * y) * r2,
            alpha * y + beta * x - (b * x + a * y) * r2,
        )

    def jacobian_action(
        x: FloatArray, y: FloatArray, u: FloatArray, v: FloatArray
    ) -> Tuple[FloatArray, FloatArray]:
        r2 = x * x + y * y
        j11 = alpha - a * r2 - 2 * x * (a * x - b * y)
        j12 = -beta + b * r2 - 2 * y * (a * x - b * y)
        j21 = beta - b * r2 - 2 * x * (b * x + a * y)
        j22 = alpha - a * r2 - 2 * y * (b * x + a * y)
        return j11 * u + j12 * v, j21 * u + j22 * v

    def drift(_t: float, z: FloatArray) -> FloatArray:
        x, y, u, v = z.T
        fx, fy = field(x, y)
        du, dv = jacobian_action(x, y, u, v)
        return np.stack([fx, fy, du, dv], axis=1)

    def diffusion(_t: float, z: FloatArray) -> FloatArray:
        g = np.zeros((z.shape[0], 4, 2))
        g[:, 0, 0] = sigma
        g[:, 1, 1] = sigma
        return g

    radius = math.sqrt(alpha / a) if alpha > 0 else 0.0
    phases = 2 * math.pi * np.arange(n_reps) / n_reps
    states0 = np.stack(
        [radius * np.cos(phases), radius * np.sin(phases), np.ones(n_reps), np.zeros(n_reps)],
        axis=1,
    )
    hook_every, t_start, duration = _renorm_schedule(t_total, config)
    meter = _GrowthMeter(n_reps, slice(2, 4), t_start)
    ensemble = integrate_sde_ensemble(
        drift,
        diffusion,
        states0,
        (0.0, t_total),
        config.step,
        Scheme.HEUN_STRATONOVICH,
        [derive_seed(base_seed, i) for i in range(n_reps)],
        noise_dim=2,
        record_every=hook_every * 100,
        hook=meter,
        hook_every=hook_every,
    )
    return _summarize(meter.growth, duration, alpha, bool(np.any(ensemble.nonfinite)))


def sigma_zero_curve(alphas: Sequence[float], b: float = 1.0) -> List[Tuple[float, float]]:
    return [(alpha, sigma_zero(alpha, b)) for alpha in alphas]
