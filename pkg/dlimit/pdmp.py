"""
Piecewise-deterministic switching systems: the defective linear pair with its
stability threshold G(eps), and logistic switching with closed-form densities.
"""
import dataclasses
import enum
import functools
import logging as log
import math
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, sparse
from scipy.sparse import linalg as sparse_linalg

from .kernel import (
    Axis,
    AxisPoint,
    DlimitError,
    FloatArray,
    InvalidParameter,
    Jump,
    SwitchingPath,
    derive_seed,
    integrate_pdmp,
    make_rng,
)


class SingularLinearSystem(DlimitError):
    pass


class NormalizationFailure(DlimitError):
    pass


# Linear switching


@dataclasses.dataclass(frozen=True)
class LinearSwitching:
    delta: float
    eps: float

    def __post_init__(self) -> None:
        if self.delta < 0 or self.eps <= 0:
            raise InvalidParameter("need delta >= 0 and eps > 0")

    @property
    def matrices(self) -> Tuple[FloatArray, FloatArray]:
        d = self.delta
        return (
            np.array([[-d, 1.0], [0.0, -d]]),
            np.array([[-d, 0.0], [-1.0, -d]]),
        )

    @property
    def rate(self) -> float:
        return 1 / self.eps

    def flow(self, mode: int, state: FloatArray, t: float) -> FloatArray:
        """exp(U_mode t) state; both matrices are -delta I plus a nilpotent part."""
        decay = math.exp(-self.delta * t)
        x, y = state[..., 0], state[..., 1]
        if mode == 0:
            return np.stack([decay * (x + t * y), decay * y], axis=-1)
        return np.stack([decay * x, decay * (y - t * x)], axis=-1)


def is_defective(matrix: FloatArray) -> bool:
    """Single eigenvalue with a one-dimensional eigenspace (2x2)."""
    trace = float(np.trace(matrix))
    det = float(np.linalg.det(matrix))
    if not math.isclose(trace * trace, 4 * det, abs_tol=1e-14):
        return False
    shifted = matrix - trace / 2 * np.eye(2)
    return bool(np.linalg.matrix_rank(shifted) == 1)


def angular_fields(matrices: Sequence[FloatArray]) -> List[Callable[[FloatArray], FloatArray]]:
    """theta' for x' = U x in polar form: cos(theta) (Uv)_y - sin(theta) (Uv)_x with v the unit vector."""

    def make(matrix: FloatArray) -> Callable[[FloatArray], FloatArray]:
        def field(theta: FloatArray) -> FloatArray:
            c, s = np.cos(theta), np.sin(theta)
            ux = matrix[0, 0] * c + matrix[0, 1] * s
            uy = matrix[1, 0] * c + matrix[1, 1] * s
            return c * uy - s * ux  # type: ignore[no-any-return]

        return field

    return [make(m) for m in matrices]


def radial_rates(matrices: Sequence[FloatArray]) -> List[Callable[[FloatArray], FloatArray]]:
    """(log r)' = v . U v for the unit vector v at angle theta."""

    def make(matrix: FloatArray) -> Callable[[FloatArray], FloatArray]:
        def rate(theta: FloatArray) -> FloatArray:
            c, s = np.cos(theta), np.sin(theta)
            ux = matrix[0, 0] * c + matrix[0, 1] * s
            uy = matrix[1, 0] * c + matrix[1, 1] * s
            return c * ux + s * uy  # type: ignore[no-any-return]

        return rate

    return [make(m) for m in matrices]


@dataclasses.dataclass(frozen=True)
class AngularDensity:
    grid: FloatArray
    rho0: FloatArray
    rho1: FloatArray

    @property
    def cell(self) -> float:
        return 2 * math.pi / self.grid.size

    def total_mass(self) -> float:
        return float(np.sum(self.rho0 + self.rho1) * self.cell)


def angular_density(eps: float, n_cells: int = 1024) -> AngularDensity:
    """Stationary density of (theta, mode) by upwind finite volumes.

    Cell i of mode m loses mass to its downwind neighbour at rate |v(face)|/h
    and to the other mode at rate 1/eps; the generator is solved with one
    equation replaced by the normalization.
    """
    if eps <= 0:
        raise InvalidParameter("eps must be positive")
    # at delta = 0; the angular motion does not depend on delta
    matrices = LinearSwitching(0.0, eps).matrices
    fields = angular_fields(matrices)
    h = 2 * math.pi / n_cells
    centers = (np.arange(n_cells) + 0.5) * h
    faces = np.arange(n_cells) * h
    n = 2 * n_cells
    rows: List[FloatArray] = []
    cols: List[FloatArray] = []
    vals: List[FloatArray] = []
    idx = np.arange(n_cells)
    rate = 1 / eps

    for mode, field in enumerate(fields):
        offset = mode * n_cells
        left = field(faces)
        right = np.roll(left, -1)
        # flux leaving cell i through its left face (velocity < 0) or right face (> 0)
        out_left = np.maximum(-left, 0.0) / h
        out_right = np.maximum(right, 0.0) / h
        rows += [offset + (idx - 1) % n_cells, offset + (idx + 1) % n_cells, offset + idx]
        cols += [offset + idx, offset + idx, offset + idx]
        vals += [out_left, out_right, -(out_left + out_right) - rate]
        other = (1 - mode) * n_cells
        rows.append(other + idx)
        cols.append(offset + idx)
        vals.append(np.full(n_cells, rate))

    generator = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tolil()
    generator[0, :] = h
    rhs = np.zeros(n)
    rhs[0] = 1.0
    solution = sparse_linalg.spsolve(generator.tocsc(), rhs)
    if not np.all(np.isfinite(solution)):
        raise SingularLinearSystem(f"stationary equation singular for eps={eps}")
    solution = np.maximum(solution, 0.0)
    return AngularDensity(centers, solution[:n_cells], solution[n_cells:])


@functools.lru_cache(maxsize=256)
def threshold_G(eps: float, n_cells: int = 1024) -> float:
    """Mean radial growth rate at delta = 0 under the stationary angular density."""
    density = angular_density(eps, n_cells)
    r0, r1 = radial_rates(LinearSwitching(0.0, eps).matrices)
    integrand = density.rho0 * r0(density.grid) + density.rho1 * r1(density.grid)
    value = float(np.sum(integrand) * density.cell)
    log.debug("G(%s) with %d cells = %.12g", eps, n_cells, value)
    return value


@enum.unique
class Stability(enum.Enum):
    Stable = "Stable"
    Unstable = "Unstable"
    Boundary = "Boundary"


def classify_pdl(eps: float, delta: float, n_cells: int = 1024) -> Stability:
    if eps <= 0 or delta < 0:
        raise InvalidParameter("need eps > 0 and delta >= 0")
    g = threshold_G(eps, n_cells)
    if abs(delta - g) < 1e-12:
        return Stability.Boundary
    return Stability.Unstable if delta < g else Stability.Stable


@dataclasses.dataclass(frozen=True)
class LyapEstimate:
    value: float
    se: float

    @property
    def stable(self) -> bool:
        return self.value < 0


def radial_lyapunov(
    system: LinearSwitching, t_total: float = 1000.0, n_reps: int = 32, base_seed: int = 0
) -> LyapEstimate:
    """Growth rate of log|X_t| with exact mode flows, vectorized over replicas.

    Every replica makes the same number of jumps; modes alternate from 0.
    """
    n_jumps = max(2, int(t_total / system.eps))
    holds = np.stack(
        [make_rng(derive_seed(base_seed, i)).standard_exponential(n_jumps) for i in range(n_reps)]
    ) * system.eps
    state = np.tile([1.0, 1.0], (n_reps, 1)) / math.sqrt(2)
    growth = np.zeros(n_reps)
    for j in range(n_jumps):
        tau = holds[:, j]
        x, y = state[:, 0], state[:, 1]
        if j % 2 == 0:
            x, y = x + tau * y, y
        else:
            x, y = x, y - tau * x
        norms = np.hypot(x, y)
        growth += np.log(norms)
        state = np.stack([x / norms, y / norms], axis=1)
    rates = growth / holds.sum(axis=1) - system.delta
    return LyapEstimate(float(np.mean(rates)), float(np.std(rates, ddof=1) / math.sqrt(n_reps)))


def simulate_linear(
    system: LinearSwitching, state0: Sequence[float], t_end: float, seed: int
) -> SwitchingPath:
    fields = [lambda _t, z, u=u: u @ z for u in system.matrices]
    rates = [[0.0, system.rate], [system.rate, 0.0]]
    return integrate_pdmp(
        fields,
        rates,
        state0,
        0,
        t_end,
        seed,
        flow_maps=[
            lambda z, t: system.flow(0, z, t),
            lambda z, t: system.flow(1, z, t),
        ],
    )


def replay_linear(
    system: LinearSwitching,
    state0: Sequence[float],
    mode0: int,
    jumps: Sequence[Jump],
    t_end: float,
) -> FloatArray:
    state = np.array(state0, dtype=float)
    t, mode = 0.0, mode0
    for jump in jumps:
        state = system.flow(mode, state, jump.time - t)
        t, mode = jump.time, jump.target
    return system.flow(mode, state, t_end - t)


# Logistic switching


@dataclasses.dataclass(frozen=True)
class LogisticDensities:
    """rho0 = c1 x^(-k-2) (x-1)^(k-1) (2-x), rho1 = c2 x^(-k-2) (x-1)^k with k = eps/delta."""

    eps: float
    delta: float
    c1: float
    c2: float

    @property
    def k(self) -> float:
        return self.eps / self.delta

    def rho0(self, x: Union[float, FloatArray]) -> Union[float, FloatArray]:
        k = self.k
        return self.c1 * x ** (-k - 2) * (x - 1) ** (k - 1) * (2 - x)  # type: ignore[no-any-return]

    def rho1(self, x: Union[float, FloatArray]) -> Union[float, FloatArray]:
        k = self.k
        return self.c2 * x ** (-k - 2) * (x - 1) ** k  # type: ignore[no-any-return]

    def mass0(self) -> float:
        return self.c1 * _alg_integral(self.k - 1, 1.0, lambda x: x ** (-self.k - 2))

    def mass1(self) -> float:
        return self.c2 * _alg_integral(self.k, 0.0, lambda x: x ** (-self.k - 2))

    def bin_average(self, mode: int, lo: float, hi: float) -> float:
        """Mean of rho_mode / mass_mode over [lo, hi]."""
        k = self.k
        if mode == 0:
            value = _weighted(lo, hi, k - 1, lambda x: x ** (-k - 2) * (2 - x)) * self.c1 / self.mass0()
        else:
            value = _weighted(lo, hi, k, lambda x: x ** (-k - 2)) * self.c2 / self.mass1()
        return value / (hi - lo)


def _weighted(lo: float, hi: float, power: float, smooth: Callable[[float], float]) -> float:
    """Integral of (x - 1)^power * smooth(x) over [lo, hi] within [1, 2]."""
    if lo <= 1.0:
        out = integrate.quad(smooth, 1.0, hi, weight="alg", wvar=(power, 0.0), full_output=1)
    else:
        out = integrate.quad(lambda x: (x - 1) ** power * smooth(x), lo, hi, full_output=1)
    if len(out) == 4:
        raise NormalizationFailure(out[3])
    return float(out[0])


def _alg_integral(power: float, tail_power: float, smooth: Callable[[float], float]) -> float:
    """Integral over (1, 2) of (x - 1)^power (2 - x)^tail_power smooth(x)."""
    out = integrate.quad(smooth, 1.0, 2.0, weight="alg", wvar=(power, tail_power), full_output=1)
    if len(out) == 4:
        raise NormalizationFailure(out[3])
    return float(out[0])


def logistic_densities(eps: float, delta: float) -> LogisticDensities:
    """Normalized stationary densities of logistic switching on (1, 2).

    Zero net probability flux, u0 rho0 + u1 rho1 = 0, fixes c2 = 2 delta c1;
    total mass one fixes c1.
    """
    if eps <= 0 or delta <= 0:
        raise InvalidParameter("eps and delta must be positive")
    k = eps / delta
    base0 = _alg_integral(k - 1, 1.0, lambda x: x ** (-k - 2))
    base1 = _alg_integral(k, 0.0, lambda x: x ** (-k - 2))
    total = base0 + 2 * delta * base1
    if not (math.isfinite(total) and total > 0):
        raise NormalizationFailure(f"mass integral {total} for eps={eps}, delta={delta}")
    c1 = 1 / total
    densities = LogisticDensities(eps, delta, c1, 2 * delta * c1)
    check = densities.mass0() + densities.mass1()
    if abs(check - 1) > 1e-10:
        raise NormalizationFailure(f"normalization off by {check - 1:.3g}")
    return densities


def classify_bdd(eps: float, delta: float) -> int:
    if eps <= 0 or delta <= 0:
        raise InvalidParameter("eps and delta must be positive")
    return 1 if delta <= eps else 0


@dataclasses.dataclass(frozen=True)
class DiracDescriptor:
    """Stationary law concentrated on atoms: (x, probability of mode 0, of mode 1)."""

    atoms: Tuple[Tuple[float, float, float], ...]
    description: str


def logistic_axis_distribution(point: AxisPoint) -> DiracDescriptor:
    if point.axis is Axis.SECOND_ZERO:
        # delta = 0: mode 0 is frozen and mode 1 drives x to 2
        return DiracDescriptor(((2.0, 1 / (1 + point.eps), point.eps / (1 + point.eps)),), "delta=0")
    if point.axis is Axis.EPS_ZERO:
        # eps = 0: mode 0 is never left, x settles at 1
        return DiracDescriptor(((1.0, 1.0, 0.0),), "eps=0")
    return DiracDescriptor(((1.0, 1.0, 0.0),), "origin")


def logistic_flow(delta: float, mode: int, x: FloatArray, t: float) -> FloatArray:
    """Exact flows of x' = delta x (1 - x) and x' = x (1 - x/2) on [1, 2]."""
    x = np.asarray(x, dtype=float)
    x0 = float(x[0])
    with np.errstate(over="ignore", divide="ignore"):
        if mode == 0:
            if x0 <= 1.0:
                return np.array([1.0])
            e = x0 / (x0 - 1) * math.exp(min(delta * t, 700.0))
            return np.array([1 + 1 / (e - 1)])
        if x0 >= 2.0:
            return np.array([2.0])
        f = x0 / (2 - x0) * math.exp(min(t, 700.0))
        return np.array([2 - 2 / (1 + f)])


def simulate_logistic(
    eps: float, delta: float, t_end: float, seed: int, x0: float = 1.5
) -> SwitchingPath:
    fields = [
        lambda _t, z: delta * z * (1 - z),
        lambda _t, z: z * (1 - z / 2),
    ]
    rates = [[0.0, eps], [1.0, 0.0]]
    return integrate_pdmp(
        fields,
        rates,
        [x0],
        0,
        t_end,
        seed,
        flow_maps=[
            lambda z, t: logistic_flow(delta, 0, z, t),
            lambda z, t: logistic_flow(delta, 1, z, t),
        ],
    )


def logistic_time_coordinates(delta: float) -> Tuple[Callable[[FloatArray], FloatArray], ...]:
    """tau_m with d tau_m / dx = 1 / |u_m(x)| on (1, 2)."""
    return (
        lambda x: (np.log(x) - np.log(x - 1)) / delta,
        lambda x: np.log(x) - np.log(2 - x),
    )


@dataclasses.dataclass(frozen=True)
class Histogram:
    edges: FloatArray
    occupation: FloatArray
    total_time: float

    @property
    def widths(self) -> FloatArray:
        return np.diff(self.edges)  # type: ignore[no-any-return]

    @property
    def density(self) -> FloatArray:
        """Time fraction per unit x; integrates to the fraction of time spent in the mode."""
        return self.occupation / (self.total_time * self.widths)  # type: ignore[no-any-return]

    @property
    def conditional(self) -> FloatArray:
        return self.occupation / (self.occupation.sum() * self.widths)  # type: ignore[no-any-return]


def occupation_histogram(
    path: SwitchingPath,
    mode: int,
    bins: Union[int, FloatArray],
    *,
    transient: float = 0.0,
    time_coordinate: Optional[Callable[[FloatArray], FloatArray]] = None,
) -> Histogram:
    """Time spent in each x-bin while in `mode`.

    Segments are taken between consecutive samples. With `time_coordinate`
    (a monotone tau with d tau/dx = 1/|x'|) the time inside each bin is exact,
    otherwise x is interpolated linearly in time.
    """
    edges = np.linspace(1.0, 2.0, bins + 1) if isinstance(bins, int) else np.asarray(bins)
    times = path.times
    x = path.states[:, 0]
    seg_modes = path.modes[:-1]
    t_a, t_b = times[:-1], times[1:]
    keep = t_a >= transient
    total_time = float(np.sum(t_b[keep] - t_a[keep]))
    sel = keep & (seg_modes == mode)
    x_a, x_b = x[:-1][sel], x[1:][sel]
    lo, hi = np.minimum(x_a, x_b), np.maximum(x_a, x_b)
    durations = (t_b - t_a)[sel]
    occupation = np.zeros(edges.size - 1)
    for i in range(edges.size - 1):
        c_lo = np.clip(lo, edges[i], edges[i + 1])
        c_hi = np.clip(hi, edges[i], edges[i + 1])
        inside = c_hi > c_lo
        if time_coordinate is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                spent = np.abs(time_coordinate(c_hi[inside]) - time_coordinate(c_lo[inside]))
            occupation[i] = float(np.sum(np.where(np.isfinite(spent), spent, 0.0)))
        else:
            width = hi[inside] - lo[inside]
            occupation[i] = float(np.sum(durations[inside] * (c_hi[inside] - c_lo[inside]) / width))
        # segments that never moved (x pinned at a boundary) sit in one bin
        still = (hi == lo) & (lo >= edges[i]) & ((lo < edges[i + 1]) | (i == edges.size - 2))
        occupation[i] += float(np.sum(durations[still]))
    return Histogram(edges, occupation, total_time)


def l1_distance(hist: Histogram, densities: LogisticDensities, mode: int) -> float:
    expected = np.array(
        [densities.bin_average(mode, lo, hi) for lo, hi in zip(hist.edges[:-1], hist.edges[1:])]
    )
    return float(np.sum(np.abs(hist.conditional - expected) * hist.widths))
