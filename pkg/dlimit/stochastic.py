"""
Sample-path estimators for fast-slow SDEs: confidence strips, transition
probabilities through a transcritical point and FitzHugh-Nagumo spike statistics.
"""
import cmath
import dataclasses
import enum
import logging as log
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import signal, stats

from .kernel import (
    DlimitError,
    FloatArray,
    InvalidParameter,
    Scheme,
    derive_seed,
    integrate_sde_ensemble,
)

ScalarFn = Callable[[FloatArray], FloatArray]


class NoSpikes(DlimitError):
    def __init__(self, reason: str, observed: int = 0) -> None:
        super().__init__(reason)
        self.observed = observed


def default_step(eps: float) -> float:
    return min(1e-3, eps / 50)


@dataclasses.dataclass(frozen=True)
class ProbEstimate:
    p_hat: float
    n: int
    ci95: Tuple[float, float]
    seed: int

    @classmethod
    def from_counts(cls, hits: int, n: int, seed: int) -> "ProbEstimate":
        ci = stats.binomtest(hits, n).proportion_ci(confidence_level=0.95, method="wilson")
        p_hat = hits / n
        return cls(p_hat, n, (min(float(ci.low), p_hat), max(float(ci.high), p_hat)), seed)

    def straddles(self, level: float) -> bool:
        return self.ci95[0] <= level <= self.ci95[1]


@dataclasses.dataclass(frozen=True)
class StripSpec:
    """The strip |x - center(t)| < h / sqrt(2 |a(t)|)."""

    center: ScalarFn
    linearization: ScalarFn
    h: float

    def halfwidth(self, t: FloatArray) -> FloatArray:
        return self.h / np.sqrt(2 * np.abs(self.linearization(t)))  # type: ignore[no-any-return]


@dataclasses.dataclass(frozen=True)
class SlowBranch:
    """eps dx = f(x, t) dt + sigma sqrt(eps) dW near a uniformly stable branch."""

    drift: Callable[[FloatArray, FloatArray], FloatArray]
    slow_solution: Callable[[FloatArray, float], FloatArray]
    linearization: ScalarFn


def slow_solution_sfs(t: FloatArray, eps: float) -> FloatArray:
    """Exact periodic solution of eps x' = sin t - x."""
    return (np.sin(t) - eps * np.cos(t)) / (1 + eps * eps)  # type: ignore[no-any-return]


def sfs_stable_branch() -> SlowBranch:
    """f(x, t) = sin t - x, with a(t) = -1 and an exact slow solution."""
    return SlowBranch(
        drift=lambda x, t: np.sin(t) - x,
        slow_solution=slow_solution_sfs,
        linearization=lambda t: -np.ones_like(np.asarray(t, dtype=float)),
    )


def confidence_halfwidth(sigma: float, t: float, eps: float, p: float) -> float:
    """h for which the strip is left with probability about p up to time t."""
    return sigma * math.sqrt(2 * math.log(t / (eps * p)))


def _seeds(base_seed: int, n_paths: int) -> List[int]:
    return [derive_seed(base_seed, i) for i in range(n_paths)]


def escape_probability_strip(
    eps: float,
    sigma: float,
    h: float = 0.1,
    t_end: float = 1.0,
    n_paths: int = 1000,
    base_seed: int = 0,
    branch: Optional[SlowBranch] = None,
    step: Optional[float] = None,
) -> ProbEstimate:
    if n_paths < 100:
        raise InvalidParameter("at least 100 paths are needed")
    branch = branch or sfs_stable_branch()
    strip = StripSpec(
        center=lambda t: branch.slow_solution(t, eps),  # type: ignore[union-attr]
        linearization=branch.linearization,
        h=h,
    )
    step = step or default_step(eps)
    noise = sigma / math.sqrt(eps)
    x0 = np.full((n_paths, 1), float(branch.slow_solution(np.array(0.0), eps)))

    def drift(t: float, y: FloatArray) -> FloatArray:
        return branch.drift(y, np.array(t)) / eps  # type: ignore[union-attr]

    def diffusion(_t: float, y: FloatArray) -> FloatArray:
        return np.full((y.shape[0], 1, 1), noise)

    def outside(t: float, y: FloatArray) -> FloatArray:
        t_arr = np.array(t)
        return np.abs(y[:, 0] - strip.center(t_arr)) > strip.halfwidth(t_arr)  # type: ignore[no-any-return]

    ensemble = integrate_sde_ensemble(
        drift,
        diffusion,
        x0,
        (0.0, t_end),
        step,
        Scheme.EULER_MARUYAMA,
        _seeds(base_seed, n_paths),
        noise_dim=1,
        record_every=max(1, int(round(t_end / step))),
        stop=outside,
    )
    hits = int(np.count_nonzero(ensemble.hit))
    log.debug("strip escape eps=%s sigma=%s h=%s: %d/%d", eps, sigma, h, hits, n_paths)
    return ProbEstimate.from_counts(hits, n_paths, base_seed)


def transcritical_slow_start(t0: float, eps: float, delta: Optional[float] = None) -> float:
    """First-order slow solution on the attracting branch x* = sqrt(t^2 + delta) at t0 < 0."""
    d = 0.0 if delta is None else delta
    x_star = math.sqrt(t0 * t0 + d)
    slope = t0 / x_star
    return x_star - eps * slope / (2 * x_star)


def transition_probability_transcritical(
    eps: float,
    sigma: float,
    delta: Optional[float] = None,
    t0: float = -1.0,
    n_paths: int = 1000,
    base_seed: int = 0,
    t_end: float = 1.0,
    threshold: float = -1.0,
    step: Optional[float] = None,
) -> ProbEstimate:
    """Probability that eps dx = (t^2 - x^2 [+ delta]) dt + sigma sqrt(eps) dW reaches `threshold`."""
    step = step or default_step(eps)
    shift = 0.0 if delta is None else delta
    noise = sigma / math.sqrt(eps)
    x0 = np.full((n_paths, 1), transcritical_slow_start(t0, eps, delta))

    def drift(t: float, y: FloatArray) -> FloatArray:
        return (t * t - y * y + shift) / eps  # type: ignore[no-any-return]

    def diffusion(_t: float, y: FloatArray) -> FloatArray:
        return np.full((y.shape[0], 1, 1), noise)

    def crossed(_t: float, y: FloatArray) -> FloatArray:
        return y[:, 0] <= threshold  # type: ignore[no-any-return]

    ensemble = integrate_sde_ensemble(
        drift,
        diffusion,
        x0,
        (t0, t_end),
        step,
        Scheme.EULER_MARUYAMA,
        _seeds(base_seed, n_paths),
        noise_dim=1,
        record_every=max(1, int(round((t_end - t0) / step))),
        stop=crossed,
    )
    hits = int(np.count_nonzero(ensemble.hit))
    return ProbEstimate.from_counts(hits, n_paths, base_seed)


def transition_level(
    eps: float,
    level: float = 0.5,
    *,
    sigma_bounds: Optional[Tuple[float, float]] = None,
    n_paths: int = 2000,
    base_seed: int = 0,
    iterations: int = 8,
    delta: Optional[float] = None,
) -> float:
    """Noise intensity at which the transition probability crosses `level` (log-bisection)."""
    lo, hi = sigma_bounds or (0.05 * eps**0.75, 20 * eps**0.75)
    for i in range(iterations):
        mid = math.sqrt(lo * hi)
        estimate = transition_probability_transcritical(
            eps, mid, delta, n_paths=n_paths, base_seed=derive_seed(base_seed, i)
        )
        if estimate.p_hat < level:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


# FitzHugh-Nagumo


def fhn_a_from_delta(delta: float) -> float:
    return math.sqrt((2 * delta + 1) / 3)


def fhn_equilibrium(
    a: float, eps: float
) -> Tuple[Tuple[float, float], float, Tuple[complex, complex]]:
    delta = (3 * a * a - 1) / 2
    root = cmath.sqrt(delta * delta - eps)
    eigenvalues = (complex((-delta + root) / eps), complex((-delta - root) / eps))
    return (a, a**3 - a), delta, eigenvalues


def respike_probability(eps: float, delta: float, sigma: float) -> float:
    return float(stats.norm.cdf(-(eps**0.25) * (delta - sigma * sigma / eps) / sigma))


@enum.unique
class SpikeLabel(enum.Enum):
    RareIsolated = "RareIsolated"
    Clusters = "Clusters"
    Repeated = "Repeated"


@dataclasses.dataclass(frozen=True)
class SpikeConfig:
    spike_level: float = -0.8
    rearm_level: float = 0.0
    respike_window: float = 2.0
    osc_cap: float = 0.3
    min_small_osc: int = 10
    rare_median: float = 10.0
    rare_fraction: float = 0.2
    repeated_fraction: float = 0.8
    record_dt: float = 1e-3

    @classmethod
    def default(cls) -> "SpikeConfig":
        return cls()


@dataclasses.dataclass(frozen=True)
class SpikeStats:
    spike_times: Tuple[float, ...]
    interspike_small_osc_counts: Tuple[int, ...]
    label: SpikeLabel
    respike_fraction: float
    small_oscillations: int
    theoretical_respike: float
    censored: bool = False

    @property
    def median_count(self) -> float:
        if not self.interspike_small_osc_counts:
            return float(self.small_oscillations)
        return float(np.median(self.interspike_small_osc_counts))


def simulate_fhn(
    eps: float,
    delta: float,
    sigma: float,
    t_end: float,
    seeds: Sequence[int],
    step: Optional[float] = None,
    record_dt: float = 1e-3,
) -> Tuple[FloatArray, FloatArray, FloatArray]:
    """Paths of dx = (x - x^3 + y)/eps dt + sigma/sqrt(eps) dW1, dy = (a - x) dt + sigma dW2.

    Returns the record times and the x and y values, each of shape
    (n_seeds, n_records).
    """
    step = step or default_step(eps)
    a = fhn_a_from_delta(delta)
    (x_star, y_star), _, _ = fhn_equilibrium(a, eps)
    noise = np.array([sigma / math.sqrt(eps), sigma])
    states0 = np.tile([x_star, y_star], (len(seeds), 1))

    def drift(_t: float, z: FloatArray) -> FloatArray:
        x, y = z[:, 0], z[:, 1]
        return np.stack([(x - x**3 + y) / eps, a - x], axis=1)

    def diffusion(_t: float, z: FloatArray) -> FloatArray:
        g = np.zeros((z.shape[0], 2, 2))
        g[:, 0, 0] = noise[0]
        g[:, 1, 1] = noise[1]
        return g

    ensemble = integrate_sde_ensemble(
        drift,
        diffusion,
        states0,
        (0.0, t_end),
        step,
        Scheme.EULER_MARUYAMA,
        list(seeds),
        noise_dim=2,
        record_every=max(1, int(round(record_dt / step))),
    )
    return ensemble.times, ensemble.states[:, :, 0], ensemble.states[:, :, 1]


def spike_statistics(
    times: FloatArray,
    x: FloatArray,
    y: FloatArray,
    eps: float,
    delta: float,
    sigma: float,
    config: Optional[SpikeConfig] = None,
) -> SpikeStats:
    # pylint: disable=too-many-locals,too-many-arguments
    config = config or SpikeConfig.default()
    (x_star, y_star), _, _ = fhn_equilibrium(fhn_a_from_delta(delta), eps)
    spikes: List[float] = []
    returns: List[float] = []
    armed = True
    for t, value in zip(times, x):
        if armed and value < config.spike_level:
            spikes.append(float(t))
            armed = False
        elif not armed and value > config.rearm_level:
            returns.append(float(t))
            armed = True

    peak_times = _small_oscillation_times(times, x - x_star, y - y_star, eps, delta, sigma, config)
    theory = respike_probability(eps, delta, sigma)

    if len(spikes) < 2:
        if peak_times.size >= config.min_small_osc:
            return SpikeStats(
                tuple(spikes), (), SpikeLabel.RareIsolated, 0.0, int(peak_times.size), theory, True
            )
        raise NoSpikes(
            f"{len(spikes)} spikes and {peak_times.size} small oscillations up to t={times[-1]:.4g}",
            observed=len(spikes),
        )

    counts: List[int] = []
    immediate = 0
    for i in range(len(spikes) - 1):
        back = returns[i] if i < len(returns) else spikes[i]
        n = int(np.count_nonzero((peak_times > back) & (peak_times < spikes[i + 1])))
        counts.append(n)
        if spikes[i + 1] - back <= config.respike_window and n <= 1:
            immediate += 1
    fraction = immediate / len(counts)
    median = float(np.median(counts))
    if median >= config.rare_median and fraction < config.rare_fraction:
        label = SpikeLabel.RareIsolated
    elif fraction > config.repeated_fraction:
        label = SpikeLabel.Repeated
    else:
        label = SpikeLabel.Clusters
    return SpikeStats(tuple(spikes), tuple(counts), label, fraction, int(peak_times.size), theory)


def _small_oscillation_times(
    times: FloatArray,
    xi: FloatArray,
    eta: FloatArray,
    eps: float,
    delta: float,
    sigma: float,
    config: SpikeConfig,
) -> FloatArray:
    """Times of local maxima of the distance to the equilibrium with height in (2 sigma, osc_cap).

    `xi` and `eta` are the offsets from the equilibrium. The distance peaks
    twice per revolution, so peaks closer than three quarters of a period
    are merged into the higher one.
    """
    # pylint: disable=too-many-arguments
    dt = float(times[1] - times[0])
    omega = math.sqrt(max(eps - delta * delta, eps / 4)) / eps
    period = 2 * math.pi / omega
    width = max(1, int(period / (8 * dt)))
    distance = np.convolve(np.hypot(xi, eta), np.ones(width) / width, mode="same")
    peaks, _ = signal.find_peaks(
        distance,
        height=(2 * sigma, config.osc_cap),
        distance=max(1, int(0.75 * period / dt)),
    )
    return times[peaks]  # type: ignore[no-any-return]


def classify_fhn(
    eps: float,
    delta: float,
    sigma: float,
    t_end: float = 200.0,
    base_seed: int = 0,
    config: Optional[SpikeConfig] = None,
) -> SpikeStats:
    config = config or SpikeConfig.default()
    times, x, y = simulate_fhn(eps, delta, sigma, t_end, [base_seed], record_dt=config.record_dt)
    return spike_statistics(times, x[0], y[0], eps, delta, sigma, config)


def classify_fhn_seeds(
    eps: float,
    delta: float,
    sigma: float,
    t_end: float,
    seeds: Sequence[int],
    config: Optional[SpikeConfig] = None,
) -> List[SpikeStats]:
    """One classification per seed, simulated as one ensemble; NoSpikes propagates."""
    config = config or SpikeConfig.default()
    times, x, y = simulate_fhn(eps, delta, sigma, t_end, seeds, record_dt=config.record_dt)
    return [spike_statistics(times, xs, ys, eps, delta, sigma, config) for xs, ys in zip(x, y)]
