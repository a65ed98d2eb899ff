"""
Shared domain types, the seeding contract and the three integration backends
(adaptive Runge-Kutta, fixed-step SDE ensembles, event-driven switching).
"""
import csv
import dataclasses
import enum
import logging as log
import math
from typing import (
    IO,
    Callable,
    Dict,
    List,
    Optional,
    Sequence,
    Tuple,
    TypeVar,
    Union,
)

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]
BoolArray = npt.NDArray[np.bool_]

VectorField = Callable[[float, FloatArray], FloatArray]
Halt = Callable[[float, FloatArray], bool]

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15


class DlimitError(Exception):
    @property
    def reason(self) -> str:
        args = self.args
        if not args:
            return "Unknown reason!"
        return str(args[0])


class DlimitInputError(DlimitError):
    """Invalid user input; the CLI reports it with exit code 1."""


class InvalidParameter(DlimitInputError, ValueError):
    pass


class StepUnderflow(DlimitError):
    pass


class NonFiniteState(DlimitError):
    def __init__(self, reason: str, time: float = math.nan) -> None:
        super().__init__(reason)
        self.time = time


@enum.unique
class Axis(enum.Enum):
    EPS_ZERO = "eps=0"
    SECOND_ZERO = "second=0"
    ORIGIN = "origin"


@dataclasses.dataclass(frozen=True)
class ParamPoint:
    eps: float
    second: float
    third: Optional[float] = None

    def __post_init__(self) -> None:
        for name, value in (("eps", self.eps), ("second", self.second)):
            _check_positive(name, value)
        if self.third is not None:
            _check_positive("third", self.third)

    @property
    def delta(self) -> float:
        return self.second

    @property
    def sigma(self) -> float:
        return self.second


@dataclasses.dataclass(frozen=True)
class AxisPoint:
    """A point on one of the singular axes, or the origin.

    `coordinate` is the one non-zero component (None at the origin).
    """

    axis: Axis
    coordinate: Optional[float] = None
    third: Optional[float] = None

    def __post_init__(self) -> None:
        if self.axis is Axis.ORIGIN:
            if self.coordinate is not None:
                raise InvalidParameter("the origin carries no coordinate")
        else:
            if self.coordinate is None:
                raise InvalidParameter(f"{self.axis.value} needs a coordinate")
            _check_positive("coordinate", self.coordinate)

    @property
    def eps(self) -> float:
        return self.coordinate if self.axis is Axis.SECOND_ZERO else 0.0  # type: ignore[return-value]

    @property
    def second(self) -> float:
        return self.coordinate if self.axis is Axis.EPS_ZERO else 0.0  # type: ignore[return-value]


Point = Union[ParamPoint, AxisPoint]


def _check_positive(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0):
        raise InvalidParameter(f"{name} must be positive and finite, got {value!r}")


def make_point(eps: float, second: float, third: Optional[float] = None) -> Point:
    """Build the right point variant from raw, non-negative user input."""
    for name, value in (("eps", eps), ("second", second)):
        if not math.isfinite(value) or value < 0:
            raise InvalidParameter(f"{name} must be non-negative, got {value!r}")
    if eps == 0 and second == 0:
        return AxisPoint(Axis.ORIGIN, third=third)
    if eps == 0:
        return AxisPoint(Axis.EPS_ZERO, second, third=third)
    if second == 0:
        return AxisPoint(Axis.SECOND_ZERO, eps, third=third)
    return ParamPoint(eps, second, third)


@dataclasses.dataclass(frozen=True)
class Trajectory:
    times: FloatArray
    states: FloatArray
    integrator: str = "unknown"
    rel_tol: Optional[float] = None
    abs_tol: Optional[float] = None
    derivatives: Optional[FloatArray] = dataclasses.field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if states.ndim == 1:
            states = states.reshape(-1, 1)
        if times.ndim != 1 or states.shape[0] != times.shape[0]:
            raise ValueError("times and states must have the same length")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return int(self.states.shape[1])

    @property
    def final_state(self) -> FloatArray:
        return self.states[-1]

    @property
    def span(self) -> Tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    def __len__(self) -> int:
        return int(self.times.size)

    def interpolate(self, t: float) -> FloatArray:
        """Cubic Hermite when derivatives were recorded, linear otherwise."""
        times = self.times
        if not times[0] <= t <= times[-1]:
            raise ValueError(f"{t} outside trajectory span {self.span}")
        i = int(np.searchsorted(times, t, side="right")) - 1
        i = min(max(i, 0), times.size - 2)
        if times.size == 1:
            return self.states[0].copy()
        return _hermite(
            times[i],
            times[i + 1],
            self.states[i],
            self.states[i + 1],
            None if self.derivatives is None else self.derivatives[i],
            None if self.derivatives is None else self.derivatives[i + 1],
            t,
        )

    def to_csv(self, stream: IO[str]) -> None:
        write_csv(stream, self.times, self.states)


def write_csv(stream: IO[str], times: FloatArray, states: FloatArray) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["t"] + [f"x{i}" for i in range(states.shape[1])])
    for t, row in zip(times, states):
        writer.writerow([fmt_float(t)] + [fmt_float(x) for x in row])


def fmt_float(value: float) -> str:
    return f"{value:.17g}"


def _hermite(
    t0: float,
    t1: float,
    y0: FloatArray,
    y1: FloatArray,
    f0: Optional[FloatArray],
    f1: Optional[FloatArray],
    t: float,
) -> FloatArray:
    h = t1 - t0
    s = (t - t0) / h
    if f0 is None or f1 is None:
        return (1 - s) * y0 + s * y1
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1  # type: ignore[no-any-return]


@dataclasses.dataclass(frozen=True)
class EventSection:
    """The section {x[index] = level} restricted to a window in the other coordinates.

    `window` holds one (lo, hi) pair per remaining coordinate, in index order.
    """

    index: int
    level: float
    window: Tuple[Tuple[float, float], ...]
    name: str = ""

    def __post_init__(self) -> None:
        for lo, hi in self.window:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ValueError(f"bad window bound ({lo}, {hi})")

    def contains(self, state: FloatArray) -> bool:
        others = [x for i, x in enumerate(state) if i != self.index]
        if len(others) != len(self.window):
            raise ValueError("window does not match state dimension")
        return all(lo <= x <= hi for x, (lo, hi) in zip(others, self.window))

    def brackets(self, y_a: FloatArray, y_b: FloatArray) -> bool:
        g_a = y_a[self.index] - self.level
        g_b = y_b[self.index] - self.level
        return bool(g_a * g_b <= 0 and g_a != g_b)


@dataclasses.dataclass(frozen=True)
class Crossing:
    section: EventSection
    time: float
    state: FloatArray


def locate_crossing(
    section: EventSection,
    t_a: float,
    t_b: float,
    point_at: Callable[[float], FloatArray],
    tolerance: float,
) -> Tuple[float, FloatArray]:
    g_a = point_at(t_a)[section.index] - section.level
    lo, hi = t_a, t_b
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        g_mid = point_at(mid)[section.index] - section.level
        if g_mid == 0:
            lo = hi = mid
            break
        if (g_mid > 0) == (g_a > 0):
            lo, g_a = mid, g_mid
        else:
            hi = mid
    t_cross = 0.5 * (lo + hi)
    return t_cross, point_at(t_cross)


@dataclasses.dataclass(frozen=True)
class OdeResult:
    trajectory: Trajectory
    crossings: Tuple[Crossing, ...]
    halted: bool


# Dormand-Prince 5(4)
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_E = np.array(
    [
        71 / 57600,
        0.0,
        -71 / 16695,
        71 / 1920,
        -17253 / 339200,
        22 / 525,
        -1 / 40,
    ]
)


@dataclasses.dataclass(frozen=True)
class StepControl:
    safety: float = 0.9
    min_factor: float = 0.2
    max_factor: float = 10.0
    alpha: float = 0.7 / 5
    beta: float = 0.4 / 5
    underflow: float = 1e-14
    blowup: float = 1e150

    @classmethod
    def default(cls) -> "StepControl":
        return cls()


def integrate_ode(
    vector_field: VectorField,
    state0: Sequence[float],
    t_span: Tuple[float, float],
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-10,
    *,
    events: Sequence[EventSection] = (),
    halt: Optional[Halt] = None,
    max_step: Optional[float] = None,
    control: Optional[StepControl] = None,
) -> OdeResult:
    """Adaptive Dormand-Prince integration with PI step-size control.

    Integration stops at the first transversal crossing of any of `events`
    (located by bisection on the Hermite dense output) or after the first
    accepted step at which `halt` returns True.
    """
    # pylint: disable=too-many-locals,too-many-branches,too-many-statements
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise InvalidParameter(f"t_span must be ordered, got {t_span}")
    if rel_tol <= 0 or abs_tol <= 0:
        raise InvalidParameter("tolerances must be positive")
    control = control or StepControl.default()
    span = t1 - t0
    max_step = span if max_step is None else max_step

    y = np.array(state0, dtype=float)
    f = np.asarray(vector_field(t0, y), dtype=float)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(f))):
        raise NonFiniteState("non-finite initial state", t0)

    times: List[float] = [t0]
    states: List[FloatArray] = [y.copy()]
    derivs: List[FloatArray] = [f.copy()]
    crossings: List[Crossing] = []

    h = _initial_step(vector_field, t0, y, f, rel_tol, abs_tol, max_step)
    err_prev = 1.0
    rejected = False
    t = t0
    halted = False
    stages = np.empty((7, y.size))

    while t < t1:
        h = min(h, max_step, t1 - t)
        if h < control.underflow * span:
            if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > control.blowup:
                raise NonFiniteState("state diverged", t)
            raise StepUnderflow(f"step {h:.3g} underflowed at t={t:.17g}")
        stages[0] = f
        for i in range(1, 7):
            dy = h * np.dot(_DP_A[i], stages[:i])
            stages[i] = vector_field(t + _DP_C[i] * h, y + dy)
        y_new = y + h * np.dot(_DP_B, stages)
        f_new = stages[6]
        err_vec = h * np.dot(_DP_E, stages)
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))

        if not math.isfinite(err) or not np.all(np.isfinite(y_new)):
            h *= 0.25
            rejected = True
            continue
        if err > 1.0:
            factor = max(control.min_factor, control.safety * err ** (-1 / 5))
            h *= factor
            rejected = True
            log.debug("rejected step at t=%s, err=%s", t, err)
            continue

        t_new = t + h
        if abs(t1 - t_new) < 1e-15 * span:
            t_new = t1
        if np.max(np.abs(y_new)) > control.blowup:
            raise NonFiniteState("state exceeded blow-up threshold", t_new)

        hit = _first_crossing(events, t, t_new, y, y_new, f, f_new, span)
        if hit is not None:
            crossings.append(hit)
            if hit.time > t:
                times.append(hit.time)
                states.append(hit.state)
                derivs.append(np.asarray(vector_field(hit.time, hit.state)))
            break

        t, y, f = t_new, y_new, f_new
        times.append(t)
        states.append(y.copy())
        derivs.append(f.copy())

        if halt is not None and halt(t, y):
            halted = True
            break

        err = max(err, 1e-10)
        factor = control.safety * err ** (-control.alpha) * err_prev**control.beta
        factor = min(control.max_factor, max(control.min_factor, factor))
        if rejected:
            factor = min(factor, 1.0)
        h *= factor
        err_prev = err
        rejected = False

    trajectory = Trajectory(
        np.array(times),
        np.array(states),
        integrator="dopri5",
        rel_tol=rel_tol,
        abs_tol=abs_tol,
        derivatives=np.array(derivs),
    )
    return OdeResult(trajectory, tuple(crossings), halted)


def _initial_step(
    vector_field: VectorField,
    t0: float,
    y0: FloatArray,
    f0: FloatArray,
    rel_tol: float,
    abs_tol: float,
    max_step: float,
) -> float:
    scale = abs_tol + np.abs(y0) * rel_tol
    d0 = float(np.sqrt(np.mean((y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    f1 = np.asarray(vector_field(t0 + h0, y0 + h0 * f0), dtype=float)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if not math.isfinite(d2):
        return h0 * 1e-3
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, max_step)


def _first_crossing(
    events: Sequence[EventSection],
    t_a: float,
    t_b: float,
    y_a: FloatArray,
    y_b: FloatArray,
    f_a: FloatArray,
    f_b: FloatArray,
    span: float,
) -> Optional[Crossing]:
    best: Optional[Crossing] = None

    def point_at(t: float) -> FloatArray:
        return _hermite(t_a, t_b, y_a, y_b, f_a, f_b, t)

    for section in events:
        if not section.brackets(y_a, y_b):
            continue
        if y_a[section.index] == section.level:
            continue
        t_cross, state = locate_crossing(
            section, t_a, t_b, point_at, tolerance=1e-10 * span
        )
        if not section.contains(state):
            continue
        if best is None or t_cross < best.time:
            best = Crossing(section, t_cross, state)
    return best


# Stochastic integration


@enum.unique
class Scheme(enum.Enum):
    EULER_MARUYAMA = "EulerMaruyama"
    HEUN_STRATONOVICH = "HeunStratonovich"


EnsembleField = Callable[[float, FloatArray], FloatArray]
StopRule = Callable[[float, FloatArray], BoolArray]
StepHook = Callable[[float, FloatArray], Optional[FloatArray]]


def derive_seed(base_seed: int, index: int) -> int:
    """Splitmix64 of the index-th element of the Weyl sequence started at base_seed."""
    z = (base_seed + (index + 1) * _GOLDEN_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclasses.dataclass(frozen=True)
class SdeEnsemble:
    """Paths of one SDE run, simulated side by side.

    `states` has shape (n_paths, n_records, dim). Paths stopped by the stop rule
    or by a non-finite state are frozen afterwards; `hit_times` holds the stop
    time per path (NaN when never stopped).
    """

    times: FloatArray
    states: FloatArray
    seeds: Tuple[int, ...]
    step: float
    scheme: Scheme
    hit_times: FloatArray
    nonfinite: BoolArray

    @property
    def n_paths(self) -> int:
        return len(self.seeds)

    @property
    def hit(self) -> BoolArray:
        return ~np.isnan(self.hit_times)  # type: ignore[no-any-return]

    def path(self, i: int) -> "SdePath":
        return SdePath(
            Trajectory(self.times, self.states[i], integrator=self.scheme.value),
            seed=self.seeds[i],
            step=self.step,
            scheme=self.scheme,
        )


@dataclasses.dataclass(frozen=True)
class SdePath:
    trajectory: Trajectory
    seed: int
    step: float
    scheme: Scheme

    @property
    def times(self) -> FloatArray:
        return self.trajectory.times

    @property
    def states(self) -> FloatArray:
        return self.trajectory.states


class _NoiseStream:
    """Block-buffered Wiener increments of one path; block size never changes the stream."""

    def __init__(self, seed: int, noise_dim: int, step: float, block: int = 4096):
        self._rng = make_rng(seed)
        self._noise_dim = noise_dim
        self._sqrt_step = math.sqrt(step)
        self._block = block
        self._buffer = np.empty((0, noise_dim))
        self._pos = 0

    def next(self) -> FloatArray:
        if self._pos == self._buffer.shape[0]:
            self._buffer = (
                self._rng.standard_normal((self._block, self._noise_dim))
                * self._sqrt_step
            )
            self._pos = 0
        row = self._buffer[self._pos]
        self._pos += 1
        return row


def integrate_sde_ensemble(
    drift: EnsembleField,
    diffusion: EnsembleField,
    states0: FloatArray,
    t_span: Tuple[float, float],
    step: float,
    scheme: Scheme,
    seeds: Sequence[int],
    *,
    noise_dim: Optional[int] = None,
    record_every: int = 1,
    stop: Optional[StopRule] = None,
    hook: Optional[StepHook] = None,
    hook_every: int = 1,
) -> SdeEnsemble:
    """Fixed-step integration of n paths at once.

    `drift(t, Y)` maps (n, d) to (n, d); `diffusion(t, Y)` maps (n, d) to
    (n, d, m). Path i draws its increments from `seeds[i]` only, so a path's
    values do not depend on which other paths it was simulated with.
    """
    # pylint: disable=too-many-locals,too-many-arguments
    t0, t1 = float(t_span[0]), float(t_span[1])
    span = t1 - t0
    if not step > 0 or step > span / 10:
        raise InvalidParameter(f"step must be in (0, span/10], got {step}")
    y = np.array(states0, dtype=float)
    if y.ndim == 1:
        y = y.reshape(1, -1)
    n_paths, _dim = y.shape
    if len(seeds) != n_paths:
        raise InvalidParameter("one seed per path is required")
    if noise_dim is None:
        noise_dim = int(np.asarray(diffusion(t0, y)).shape[2])
    streams = [_NoiseStream(seed, noise_dim, step) for seed in seeds]

    n_steps = int(round(span / step))
    active = np.ones(n_paths, dtype=bool)
    hit_times = np.full(n_paths, np.nan)
    nonfinite = np.zeros(n_paths, dtype=bool)
    times = [t0]
    records = [y.copy()]

    if stop is not None:
        stopped = np.asarray(stop(t0, y), dtype=bool)
        hit_times[stopped] = t0
        active &= ~stopped

    for k in range(1, n_steps + 1):
        t = t0 + (k - 1) * step
        dw = np.stack([stream.next() for stream in streams])
        if scheme is Scheme.EULER_MARUYAMA:
            y_new = y + drift(t, y) * step + np.einsum("ndm,nm->nd", diffusion(t, y), dw)
        else:
            f_0 = drift(t, y)
            g_0 = diffusion(t, y)
            pred = y + f_0 * step + np.einsum("ndm,nm->nd", g_0, dw)
            t_next = t + step
            y_new = (
                y
                + 0.5 * (f_0 + drift(t_next, pred)) * step
                + 0.5 * np.einsum("ndm,nm->nd", g_0 + diffusion(t_next, pred), dw)
            )
        t_now = t0 + k * step
        y = np.where(active[:, None], y_new, y)

        bad = active & ~np.all(np.isfinite(y), axis=1)
        if np.any(bad):
            nonfinite |= bad
            hit_times[bad] = t_now
            active &= ~bad
        if stop is not None:
            stopped = active & np.asarray(stop(t_now, y), dtype=bool)
            hit_times[stopped] = t_now
            active &= ~stopped
        if hook is not None and k % hook_every == 0:
            replaced = hook(t_now, y)
            if replaced is not None:
                y = replaced
        finished = not np.any(active)
        if k % record_every == 0 or k == n_steps or finished:
            times.append(t_now)
            records.append(y.copy())
        if finished:
            log.debug("all %d paths stopped at t=%s", n_paths, t_now)
            break

    return SdeEnsemble(
        times=np.array(times),
        states=np.stack(records, axis=1),
        seeds=tuple(int(s) for s in seeds),
        step=step,
        scheme=scheme,
        hit_times=hit_times,
        nonfinite=nonfinite,
    )


def integrate_sde(
    drift: VectorField,
    diffusion: Callable[[float, FloatArray], FloatArray],
    state0: Sequence[float],
    t_span: Tuple[float, float],
    step: float,
    scheme: Scheme,
    seed: int,
    *,
    record_every: int = 1,
) -> SdePath:
    """Single path; `diffusion(t, y)` returns a (d, m) matrix."""

    def ens_drift(t: float, ys: FloatArray) -> FloatArray:
        return np.asarray(drift(t, ys[0]), dtype=float)[None, :]

    def ens_diffusion(t: float, ys: FloatArray) -> FloatArray:
        return np.atleast_2d(np.asarray(diffusion(t, ys[0]), dtype=float))[None, :, :]

    ensemble = integrate_sde_ensemble(
        ens_drift,
        ens_diffusion,
        np.array([state0], dtype=float),
        t_span,
        step,
        scheme,
        [seed],
        record_every=record_every,
    )
    if ensemble.nonfinite[0]:
        raise NonFiniteState("SDE path became non-finite", float(ensemble.hit_times[0]))
    return ensemble.path(0)


# Piecewise-deterministic switching

FlowMap = Callable[[FloatArray, float], FloatArray]


@dataclasses.dataclass(frozen=True)
class Jump:
    time: float
    source: int
    target: int


@dataclasses.dataclass(frozen=True)
class SwitchingPath:
    """Switching trajectory; `modes[i]` is the mode in force from times[i] on."""

    trajectory: Trajectory
    modes: IntArray
    jumps: Tuple[Jump, ...]
    seed: int

    def __post_init__(self) -> None:
        jump_times = [j.time for j in self.jumps]
        if any(b <= a for a, b in zip(jump_times, jump_times[1:])):
            raise ValueError("jump times must be strictly increasing")

    @property
    def times(self) -> FloatArray:
        return self.trajectory.times

    @property
    def states(self) -> FloatArray:
        return self.trajectory.states

    def mode_at(self, t: float) -> int:
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return int(self.modes[max(i, 0)])


class _ExpStream:
    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self._rng = rng
        self._block = block
        self._exp = np.empty(0)
        self._uni = np.empty(0)
        self._i = 0
        self._j = 0

    def exponential(self) -> float:
        if self._i == self._exp.size:
            self._exp = self._rng.standard_exponential(self._block)
            self._i = 0
        value = float(self._exp[self._i])
        self._i += 1
        return value

    def uniform(self) -> float:
        if self._j == self._uni.size:
            self._uni = self._rng.random(self._block)
            self._j = 0
        value = float(self._uni[self._j])
        self._j += 1
        return value


def integrate_pdmp(
    mode_fields: Sequence[VectorField],
    rate_matrix: Sequence[Sequence[float]],
    state0: Sequence[float],
    mode0: int,
    t_end: float,
    seed: int,
    *,
    flow_maps: Optional[Sequence[FlowMap]] = None,
    rel_tol: float = 1e-9,
    abs_tol: float = 1e-11,
    record_flow: bool = True,
) -> SwitchingPath:
    """Simulate a PDMP with state-independent switching rates.

    `rate_matrix[i][j]` is the rate of jumping from mode i to mode j. With
    `flow_maps` the mode flows are applied exactly and only segment endpoints
    are recorded.
    """
    # pylint: disable=too-many-locals
    rates = np.array(rate_matrix, dtype=float)
    n_modes = len(mode_fields)
    if rates.shape != (n_modes, n_modes):
        raise InvalidParameter("rate matrix must be square with one row per mode")
    off = rates.copy()
    np.fill_diagonal(off, 0.0)
    if np.any(off < 0):
        raise InvalidParameter("switching rates must be non-negative")
    totals = off.sum(axis=1)
    stream = _ExpStream(make_rng(seed))

    t = 0.0
    mode = int(mode0)
    y = np.array(state0, dtype=float)
    times: List[float] = [t]
    states: List[FloatArray] = [y.copy()]
    modes: List[int] = [mode]
    jumps: List[Jump] = []

    while t < t_end:
        hold = stream.exponential() / totals[mode] if totals[mode] > 0 else math.inf
        seg_end = min(t + hold, t_end)
        if flow_maps is not None:
            y = np.asarray(flow_maps[mode](y, seg_end - t), dtype=float)
            if not np.all(np.isfinite(y)):
                raise NonFiniteState("switching flow diverged", seg_end)
            times.append(seg_end)
            states.append(y.copy())
            modes.append(mode)
        else:
            result = integrate_ode(
                mode_fields[mode], y, (t, seg_end), rel_tol, abs_tol
            )
            seg = result.trajectory
            y = seg.final_state.copy()
            if record_flow:
                times.extend(seg.times[1:].tolist())
                states.extend(seg.states[1:])
                modes.extend([mode] * (len(seg) - 1))
            else:
                times.append(seg_end)
                states.append(y.copy())
                modes.append(mode)
        t = seg_end
        if t >= t_end:
            break
        target = _pick_target(off[mode], totals[mode], stream.uniform())
        jumps.append(Jump(t, mode, target))
        mode = target
        modes[-1] = mode

    trajectory = Trajectory(
        np.array(times),
        np.array(states),
        integrator="exact-flow" if flow_maps is not None else "dopri5",
        rel_tol=None if flow_maps is not None else rel_tol,
        abs_tol=None if flow_maps is not None else abs_tol,
    )
    return SwitchingPath(trajectory, np.array(modes, dtype=np.int64), tuple(jumps), seed)


def _pick_target(row: FloatArray, total: float, u: float) -> int:
    cumulative = np.cumsum(row) / total
    return int(min(np.searchsorted(cumulative, u, side="right"), row.size - 1))


T = TypeVar("T")


def labelled(mapping: Dict[str, T], key: str) -> T:
    """Lookup with an input error naming the valid keys."""
    try:
        return mapping[key]
    except KeyError:
        raise DlimitInputError(
            f"unknown name {key!r}, expected one of {', '.join(sorted(mapping))}"
        ) from None
