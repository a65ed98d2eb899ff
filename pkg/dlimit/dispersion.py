"""
Fast-reaction SKT competition system: homogeneous coexistence states and the
count of bifurcation points on the homogeneous branch as r1 varies.

The domain is (0, 1) with Neumann modes k_n = n*pi.
"""
import dataclasses
import logging as log
import math
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import optimize

from .kernel import DlimitError, FloatArray, InvalidParameter


class DegenerateCompetition(DlimitError):
    pass


class NonpositiveState(DlimitError):
    pass


class StateLeavesPositivity(DlimitError):
    pass


@dataclasses.dataclass(frozen=True)
class SktParams:
    r1: float = 4.0
    r2: float = 5.0
    a1: float = 2.0
    a2: float = 3.0
    b1: float = 5.0
    b2: float = 4.0
    d1: float = 0.03
    d2: float = 0.03
    d12: float = 3.0
    d21: float = 3.0
    M1: float = 5.0  # pylint: disable=invalid-name
    M2: float = 2.0  # pylint: disable=invalid-name

    @classmethod
    def default(cls) -> "SktParams":
        return cls()

    def with_r1(self, r1: float) -> "SktParams":
        return dataclasses.replace(self, r1=r1)

    @property
    def competition(self) -> float:
        return self.a1 * self.a2 - self.b1 * self.b2

    @property
    def diffusion_4comp(self) -> FloatArray:
        # d-hat-2 pairs d21 with M1 so that the fast-reaction limit gives (d2 + d21 u) v
        return np.diag(
            [self.d1, self.d1 + self.d12 * self.M2, self.d2, self.d2 + self.d21 * self.M1]
        )


@dataclasses.dataclass(frozen=True)
class CoexistenceState:
    u: float
    v: float
    u1: float
    u2: float
    v1: float
    v2: float


@dataclasses.dataclass(frozen=True)
class BifCount:
    count: int
    crossing_r1_values: Tuple[float, ...]
    modes_involved: Tuple[int, ...]
    mode0_crossings: Tuple[float, ...] = ()
    max_relative_det: float = 0.0


def coexistence_state(params: SktParams) -> CoexistenceState:
    denominator = params.competition
    if denominator == 0:
        raise DegenerateCompetition("a1*a2 == b1*b2")
    u = (params.r1 * params.a2 - params.r2 * params.b1) / denominator
    v = (params.r2 * params.a1 - params.r1 * params.b2) / denominator
    if u <= 0 or v <= 0:
        raise NonpositiveState(f"coexistence state ({u:.6g}, {v:.6g}) is not positive")
    return CoexistenceState(
        u=u,
        v=v,
        u1=u * (1 - v / params.M2),
        u2=u * v / params.M2,
        v1=v * (1 - u / params.M1),
        v2=v * u / params.M1,
    )


def positivity_window(params: SktParams) -> Tuple[float, float]:
    """Open r1 interval on which u* > 0 and v* > 0."""
    if params.competition == 0:
        raise DegenerateCompetition("a1*a2 == b1*b2")
    t_u = params.r2 * params.b1 / params.a2
    t_v = params.r2 * params.a1 / params.b2
    lo, hi = sorted((t_u, t_v))
    try:
        coexistence_state(params.with_r1(0.5 * (lo + hi)))
    except NonpositiveState:
        raise StateLeavesPositivity("no r1 gives a positive coexistence state") from None
    return lo, hi


def reaction_4comp(state: FloatArray, params: SktParams, eps: float, delta: float) -> FloatArray:
    u1, u2, v1, v2 = state
    u, v = u1 + u2, v1 + v2
    f = params.r1 - params.a1 * u - params.b1 * v
    g = params.r2 - params.b2 * u - params.a2 * v
    h = (1 - v / params.M2) * u2 - u1 * v / params.M2
    k = (1 - u / params.M1) * v2 - v1 * u / params.M1
    return np.array([f * u1 + h / eps, f * u2 - h / eps, g * v1 + k / delta, g * v2 - k / delta])


def jacobian_4comp(state: FloatArray, params: SktParams, eps: float, delta: float) -> FloatArray:
    # pylint: disable=too-many-locals
    u1, u2, v1, v2 = state
    u, v = u1 + u2, v1 + v2
    a1, a2, b1, b2 = params.a1, params.a2, params.b1, params.b2
    m1, m2 = params.M1, params.M2
    f = params.r1 - a1 * u - b1 * v
    g = params.r2 - b2 * u - a2 * v
    h_u1, h_u2, h_v = -v / m2, 1 - v / m2, -u / m2
    k_u, k_v1, k_v2 = -v / m1, -u / m1, 1 - u / m1
    return np.array(
        [
            [f - a1 * u1 + h_u1 / eps, -a1 * u1 + h_u2 / eps, -b1 * u1 + h_v / eps, -b1 * u1 + h_v / eps],
            [-a1 * u2 - h_u1 / eps, f - a1 * u2 - h_u2 / eps, -b1 * u2 - h_v / eps, -b1 * u2 - h_v / eps],
            [-b2 * v1 + k_u / delta, -b2 * v1 + k_u / delta, g - a2 * v1 + k_v1 / delta, -a2 * v1 + k_v2 / delta],
            [-b2 * v2 - k_u / delta, -b2 * v2 - k_u / delta, -a2 * v2 - k_v1 / delta, g - a2 * v2 - k_v2 / delta],
        ]
    )


def _default_window(params: SktParams, r1_window: Optional[Tuple[float, float]]) -> Tuple[float, float]:
    lo, hi = positivity_window(params)
    if r1_window is None:
        shrink = 0.01 * (hi - lo)
        return lo + shrink, hi - shrink
    w_lo, w_hi = r1_window
    c_lo, c_hi = max(w_lo, lo), min(w_hi, hi)
    if (c_lo, c_hi) != (w_lo, w_hi):
        if not c_lo < c_hi:
            raise StateLeavesPositivity(f"r1 window {r1_window} misses the positivity interval ({lo}, {hi})")
        log.warning("r1 window %s clipped to the positivity interval (%.6g, %.6g)", r1_window, c_lo, c_hi)
        # open interval: step inside by a hair
        c_lo = max(c_lo, lo + 1e-9 * (hi - lo))
        c_hi = min(c_hi, hi - 1e-9 * (hi - lo))
    return c_lo, c_hi


def _matrix_4comp(params: SktParams, r1: float, eps: float, delta: float, k2: float) -> FloatArray:
    p = params.with_r1(r1)
    s = coexistence_state(p)
    state = np.array([s.u1, s.u2, s.v1, s.v2])
    return jacobian_4comp(state, p, eps, delta) - k2 * p.diffusion_4comp  # type: ignore[no-any-return]


def _matrix_limit(params: SktParams, r1: float, k2: float) -> FloatArray:
    p = params.with_r1(r1)
    s = coexistence_state(p)
    u, v = s.u, s.v
    reaction = np.array([[-p.a1 * u, -p.b1 * u], [-p.b2 * v, -p.a2 * v]])
    cross = np.array([[p.d1 + p.d12 * v, p.d12 * u], [p.d21 * v, p.d2 + p.d21 * u]])
    return reaction - k2 * cross  # type: ignore[no-any-return]


def dispersion_det_limit(params: SktParams, r1: float, n: int) -> float:
    return float(np.linalg.det(_matrix_limit(params, r1, (n * math.pi) ** 2)))


def _relative_det(matrix: FloatArray) -> float:
    """det scaled by the Hadamard bound, so that |value| <= 1."""
    bound = float(np.prod(np.linalg.norm(matrix, axis=1)))
    return float(np.linalg.det(matrix)) / bound if bound > 0 else 0.0


def _scan(
    det_of: Callable[[float, int], float],
    window: Tuple[float, float],
    n_modes: int,
    n_scan: int,
    relative: Callable[[float, int], float],
) -> BifCount:
    grid = np.linspace(window[0], window[1], n_scan)
    crossings: List[Tuple[float, int]] = []
    mode0: List[float] = []
    worst = 0.0
    for n in range(n_modes + 1):
        values = np.array([det_of(r1, n) for r1 in grid])
        for i in np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)[0]:
            root = optimize.brentq(lambda r, n=n: det_of(r, n), grid[i], grid[i + 1], xtol=1e-13, rtol=1e-15)
            worst = max(worst, abs(relative(root, n)))
            if n == 0:
                mode0.append(float(root))
            else:
                crossings.append((float(root), n))
    crossings.sort()
    return BifCount(
        count=len(crossings),
        crossing_r1_values=tuple(r for r, _ in crossings),
        modes_involved=tuple(sorted({n for _, n in crossings})),
        mode0_crossings=tuple(mode0),
        max_relative_det=worst,
    )


def count_bifurcations_4comp(
    params: SktParams,
    eps: float,
    delta: float,
    r1_window: Optional[Tuple[float, float]] = None,
    n_modes: int = 20,
    n_scan: int = 1000,
) -> BifCount:
    if eps <= 0 or delta <= 0:
        raise InvalidParameter("eps and delta must be positive")
    window = _default_window(params, r1_window)

    def det_of(r1: float, n: int) -> float:
        return float(np.linalg.det(_matrix_4comp(params, r1, eps, delta, (n * math.pi) ** 2)))

    def relative(r1: float, n: int) -> float:
        return _relative_det(_matrix_4comp(params, r1, eps, delta, (n * math.pi) ** 2))

    result = _scan(det_of, window, n_modes, n_scan, relative)
    log.info("SKT eps=%s delta=%s: %d bifurcation points", eps, delta, result.count)
    return result


def count_bifurcations_limit(
    params: SktParams,
    r1_window: Optional[Tuple[float, float]] = None,
    n_modes: int = 20,
    n_scan: int = 1000,
) -> BifCount:
    window = _default_window(params, r1_window)

    def det_of(r1: float, n: int) -> float:
        return dispersion_det_limit(params, r1, n)

    def relative(r1: float, n: int) -> float:
        return _relative_det(_matrix_limit(params, r1, (n * math.pi) ** 2))

    return _scan(det_of, window, n_modes, n_scan, relative)
