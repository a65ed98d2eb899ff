"""
Deterministic fast-slow problems: the transcritical normal form and the Olsen
peroxidase-oxidase model.
"""
import dataclasses
import enum
import logging as log
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import signal, stats

from .kernel import (
    DlimitError,
    DlimitInputError,
    EventSection,
    FloatArray,
    StepUnderflow,
    Trajectory,
    VectorField,
    integrate_ode,
)

JacobianField = Callable[[float, FloatArray], FloatArray]

TC_EPS_FLOOR = 0.02
TC_EPS_MAX = 0.3
TC_START = (-3.0, -3.0)


class Ambiguous(DlimitError):
    pass


class JacobianMismatch(DlimitError):
    pass


class Indeterminate(DlimitError):
    pass


@enum.unique
class TcLabel(enum.Enum):
    ExchangeOfStability = "ExchangeOfStability"
    CriticalTransition = "CriticalTransition"
    Canard = "Canard"


@dataclasses.dataclass(frozen=True)
class TcConfig:
    box: Tuple[Tuple[float, float], Tuple[float, float]] = ((-5.0, 5.0), (-4.0, 4.0))
    tube_factor: float = 3.0
    rel_tol: float = 1e-11
    abs_tol: float = 1e-12

    @classmethod
    def default(cls) -> "TcConfig":
        return cls()


SIGMA_MINUS = EventSection(index=0, level=-2.0, window=((1.0, 3.0),), name="sigma-")
SIGMA_PLUS = EventSection(index=0, level=2.0, window=((-1.0, 1.0),), name="sigma+")


def check_tc_eps(eps: float) -> None:
    if eps < TC_EPS_FLOOR:
        raise DlimitInputError(
            f"eps={eps} is below {TC_EPS_FLOOR}: the canard wedge is thinner than "
            "double precision there and cannot be resolved"
        )
    if eps > TC_EPS_MAX:
        raise DlimitInputError(f"eps={eps} is above {TC_EPS_MAX}")


def tc_vector_field(eps: float, delta: float) -> VectorField:
    shift = eps * eps / delta

    def field(_t: float, state: FloatArray) -> FloatArray:
        x, y = state
        # (x - y)(x + y) keeps the invariant line x = y exact when shift == eps
        return np.array([(x - y) * (x + y) + shift, eps])

    return field


def integrate_transcritical(
    eps: float, delta: float, config: Optional[TcConfig] = None
) -> Tuple[Trajectory, Optional[TcLabel]]:
    config = config or TcConfig.default()
    (x_lo, x_hi), (y_lo, y_hi) = config.box
    tube = config.tube_factor * eps

    def halt(_t: float, state: FloatArray) -> bool:
        x, y = state
        if not (x_lo <= x <= x_hi and y_lo <= y <= y_hi):
            return True
        return bool(y > 1 and x > 0 and abs(x - y) < tube)

    t_end = (y_hi - TC_START[1]) / eps
    result = integrate_ode(
        tc_vector_field(eps, delta),
        TC_START,
        (0.0, t_end),
        config.rel_tol,
        config.abs_tol,
        events=(SIGMA_MINUS, SIGMA_PLUS),
        halt=halt,
    )
    label: Optional[TcLabel] = None
    if result.crossings:
        section = result.crossings[0].section
        label = (
            TcLabel.ExchangeOfStability
            if section is SIGMA_MINUS
            else TcLabel.CriticalTransition
        )
    else:
        x, y = result.trajectory.final_state
        if x > 0 and y > 0 and abs(x - y) < tube:
            label = TcLabel.Canard
    return result.trajectory, label


def classify_transcritical(
    eps: float, delta: float, config: Optional[TcConfig] = None
) -> TcLabel:
    if not 0 < eps <= TC_EPS_MAX:
        raise DlimitInputError(f"eps must lie in (0, {TC_EPS_MAX}], got {eps}")
    trajectory, label = integrate_transcritical(eps, delta, config)
    if label is None:
        x, y = trajectory.final_state
        raise Ambiguous(f"trajectory ended at ({x:.6g}, {y:.6g}) without meeting a criterion")
    log.debug("transcritical eps=%s delta=%s -> %s", eps, delta, label.value)
    return label


def fenichel_distance(eps: float, delta: float, y_stop: float = -1.0) -> float:
    """Distance of the trajectory from (-3, -3) to the branch x = y < 0 when y reaches y_stop."""
    result = integrate_ode(
        tc_vector_field(eps, delta),
        TC_START,
        (0.0, (y_stop - TC_START[1]) / eps),
        1e-10,
        1e-12,
    )
    x, y = result.trajectory.final_state
    return abs(x - y)


@dataclasses.dataclass(frozen=True)
class FlipInterval:
    eps: float
    delta_lo: float
    delta_hi: float

    @property
    def width(self) -> float:
        return self.delta_hi - self.delta_lo


def flip_interval(
    eps: float,
    *,
    resolution: float = 1.1,
    config: Optional[TcConfig] = None,
) -> FlipInterval:
    """Delta interval between the last CriticalTransition and first ExchangeOfStability.

    With delta = eps*(1 + eta) both edges are bisected in log|eta| down to a
    factor `resolution`.
    """

    def label(eta: float) -> TcLabel:
        try:
            return classify_transcritical(eps, eps * (1 + eta), config)
        except (Ambiguous, StepUnderflow):
            return TcLabel.Canard

    def edge(target: TcLabel, sign: float) -> float:
        outer = math.log(math.sqrt(eps))
        inner = math.log(1e-15)
        if label(sign * math.exp(outer)) is not target:
            raise Ambiguous(f"no {target.value} at eta={sign * math.exp(outer):.3g}")
        if label(sign * math.exp(inner)) is target:
            return sign * math.exp(inner)
        while outer - inner > math.log(resolution):
            mid = 0.5 * (outer + inner)
            if label(sign * math.exp(mid)) is target:
                outer = mid
            else:
                inner = mid
        return sign * math.exp(outer)

    eta_lo = edge(TcLabel.CriticalTransition, -1.0)
    eta_hi = edge(TcLabel.ExchangeOfStability, 1.0)
    return FlipInterval(eps, eps * (1 + eta_lo), eps * (1 + eta_hi))


# Olsen model


@dataclasses.dataclass(frozen=True)
class OlsenParams:
    p1: float = 0.97
    p2: float = 0.98
    p3: float = 3.93
    p4: float = 1.2e-5
    alpha: float = 1.0

    @classmethod
    def default(cls) -> "OlsenParams":
        return cls()


def olsen_rhs(
    state: Sequence[float], eps: float, delta: float, params: OlsenParams
) -> FloatArray:
    a, b, x, y = state
    aby = a * b * y
    return np.array(
        [
            delta**2 * (params.p1 - params.alpha * a) - aby,
            eps * (delta * eps - delta * b * x) - delta * aby,
            (-x * x + eps * (b - params.p2) * x + 3 * aby + eps**2 * params.p4) / eps,
            params.p3 * (x * x - y - aby),
        ]
    )


def olsen_jacobian(
    state: Sequence[float], eps: float, delta: float, params: OlsenParams
) -> FloatArray:
    a, b, x, y = state
    return np.array(
        [
            [-(delta**2) * params.alpha - b * y, -a * y, 0.0, -a * b],
            [-delta * b * y, -eps * delta * x - delta * a * y, -eps * delta * b, -delta * a * b],
            [
                3 * b * y / eps,
                x + 3 * a * y / eps,
                (-2 * x + eps * (b - params.p2)) / eps,
                3 * a * b / eps,
            ],
            [-params.p3 * b * y, -params.p3 * a * y, 2 * params.p3 * x, -params.p3 * (1 + a * b)],
        ]
    )


def olsen_field(eps: float, delta: float, params: OlsenParams) -> VectorField:
    return lambda _t, state: olsen_rhs(state, eps, delta, params)


def count_maxima(
    traj: Trajectory,
    var_index: int,
    window: Tuple[float, float],
    prominence: float = 1e-6,
) -> int:
    t_lo, t_hi = window
    t_start, t_end = traj.span
    if not t_start <= t_lo < t_hi <= t_end:
        raise ValueError(f"window {window} outside trajectory span {traj.span}")
    values = traj.states[:, var_index]
    peaks, _ = signal.find_peaks(values, prominence=prominence)
    times = traj.times[peaks]
    return int(np.count_nonzero((times > t_lo) & (times < t_hi)))


@dataclasses.dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    stderr: float

    @property
    def sign(self) -> int:
        if abs(self.value) <= 2 * self.stderr:
            return 0
        return 1 if self.value > 0 else -1


def check_jacobian(
    vector_field: VectorField,
    jacobian: JacobianField,
    state0: FloatArray,
    rel: float = 1e-5,
) -> None:
    y0 = np.asarray(state0, dtype=float)
    exact = np.asarray(jacobian(0.0, y0))
    approx = np.empty_like(exact)
    for j in range(y0.size):
        h = 1e-6 * max(1.0, abs(y0[j]))
        e = np.zeros_like(y0)
        e[j] = h
        approx[:, j] = (vector_field(0.0, y0 + e) - vector_field(0.0, y0 - e)) / (2 * h)
    scale = max(float(np.max(np.abs(exact))), 1e-12)
    mismatch = float(np.max(np.abs(exact - approx))) / scale
    if mismatch > rel:
        raise JacobianMismatch(f"jacobian differs from finite differences by {mismatch:.3g}")


def top_lyapunov_benettin(
    vector_field: VectorField,
    jacobian: JacobianField,
    state0: Sequence[float],
    t_total: float,
    renorm_interval: float,
    *,
    transient: float = 0.0,
    transverse: bool = False,
    rel_tol: float = 1e-9,
    abs_tol: float = 1e-11,
) -> LyapunovEstimate:
    """Leading Lyapunov exponent from a renormalized tangent vector.

    The slope and its standard error come from a linear fit of the accumulated
    log-growth against time. With `transverse` the component along the flow is
    removed at every renormalization, which gives the leading exponent of an
    autonomous flow with the neutral flow direction excluded.
    """
    # pylint: disable=too-many-locals
    y = np.array(state0, dtype=float)
    check_jacobian(vector_field, jacobian, y)
    dim = y.size

    def augmented(t: float, z: FloatArray) -> FloatArray:
        state, tangent = z[:dim], z[dim:]
        return np.concatenate([vector_field(t, state), jacobian(t, state) @ tangent])

    if transient > 0:
        y = integrate_ode(vector_field, y, (0.0, transient), rel_tol, abs_tol).trajectory.final_state
    v = np.ones(dim) / math.sqrt(dim)
    if transverse:
        v = _remove_flow(v, vector_field(0.0, y))

    t = 0.0
    growth = 0.0
    times = [0.0]
    logs = [0.0]
    n_intervals = max(2, int(round(t_total / renorm_interval)))
    for _ in range(n_intervals):
        z = integrate_ode(
            augmented, np.concatenate([y, v]), (t, t + renorm_interval), rel_tol, abs_tol
        ).trajectory.final_state
        y, v = z[:dim], z[dim:]
        if transverse:
            v = _remove_flow(v, vector_field(t, y))
        norm = float(np.linalg.norm(v))
        if not norm > 0 or not math.isfinite(norm):
            raise Indeterminate("tangent vector degenerated")
        growth += math.log(norm)
        v = v / norm
        t += renorm_interval
        times.append(t)
        logs.append(growth)
    fit = stats.linregress(times, logs)
    return LyapunovEstimate(float(fit.slope), float(fit.stderr))


def _remove_flow(v: FloatArray, flow: FloatArray) -> FloatArray:
    norm = float(np.linalg.norm(flow))
    if norm == 0:
        return v
    unit = flow / norm
    return v - float(v @ unit) * unit  # type: ignore[no-any-return]


@enum.unique
class OscKind(enum.Enum):
    Relaxation = "Relaxation"
    MMO = "MMO"
    Chaotic = "Chaotic"


@dataclasses.dataclass(frozen=True)
class OscLabel:
    kind: OscKind
    maxima_count: int
    lyap_sign: int
    lyapunov: LyapunovEstimate
    conjectural: bool = True
    window_counts: Tuple[int, ...] = ()


@dataclasses.dataclass(frozen=True)
class OlsenConfig:
    window_factor: float = 20.0
    renorm_interval: float = 1.0
    prominence: float = 1e-3
    rel_tol: float = 1e-8
    abs_tol: float = 1e-11
    state0: Tuple[float, float, float, float] = (1.0, 0.5, 0.01, 0.01)

    @classmethod
    def default(cls) -> "OlsenConfig":
        return cls()


def olsen_maxima(
    eps: float,
    delta: float,
    t_transient: float,
    t_window: float,
    state0: Sequence[float],
    config: OlsenConfig,
    params: OlsenParams,
) -> Tuple[int, FloatArray]:
    """Maxima of x over [t_transient, t_transient + t_window] and the final state."""
    traj = integrate_ode(
        olsen_field(eps, delta, params),
        state0,
        (0.0, t_transient + t_window),
        config.rel_tol,
        config.abs_tol,
    ).trajectory
    window = (t_transient, t_transient + t_window)
    return count_maxima(traj, 2, window, config.prominence), traj.final_state


def calibrate_k0(
    eps: float,
    t_transient: float,
    config: Optional[OlsenConfig] = None,
    params: Optional[OlsenParams] = None,
) -> int:
    config = config or OlsenConfig.default()
    params = params or OlsenParams.default()
    window = config.window_factor / eps
    count, _ = olsen_maxima(eps, 10 * eps**2, t_transient, window, config.state0, config, params)
    log.info("Olsen K0 at eps=%s: %d maxima per window %.4g", eps, count, window)
    return count


def classify_olsen(
    eps: float,
    delta: float,
    t_transient: float,
    t_window: Optional[float] = None,
    seed_state: Optional[Sequence[float]] = None,
    *,
    k0: Optional[int] = None,
    config: Optional[OlsenConfig] = None,
    params: Optional[OlsenParams] = None,
) -> OscLabel:
    config = config or OlsenConfig.default()
    params = params or OlsenParams.default()
    state0 = tuple(seed_state) if seed_state is not None else config.state0
    window = t_window if t_window is not None else config.window_factor / eps
    if k0 is None:
        k0 = calibrate_k0(eps, t_transient, config, params)

    count, state = olsen_maxima(eps, delta, t_transient, window, state0, config, params)
    # the next window continues from where the first one ended
    repeat, state = olsen_maxima(eps, delta, 0.0, window, state, config, params)
    field = olsen_field(eps, delta, params)
    estimate = top_lyapunov_benettin(
        field,
        lambda _t, z: olsen_jacobian(z, eps, delta, params),
        state,
        window,
        config.renorm_interval,
        transverse=True,
        rel_tol=config.rel_tol,
        abs_tol=config.abs_tol,
    )
    sign = estimate.sign
    if sign == 0:
        raise Indeterminate(
            f"lyapunov estimate {estimate.value:.3g} +- {estimate.stderr:.3g} straddles 0"
        )
    if sign > 0:
        kind = OscKind.Chaotic
    elif repeat != count:
        raise Indeterminate(f"consecutive windows counted {count} and {repeat} maxima")
    elif count > k0:
        kind = OscKind.MMO
    elif count == k0:
        kind = OscKind.Relaxation
    else:
        raise Indeterminate(f"{count} maxima is below the calibrated K0={k0}")
    return OscLabel(kind, count, sign, estimate, window_counts=(count, repeat))
