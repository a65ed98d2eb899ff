"""
MEMS boundary value problem u'' = lam/(1+u)^2 (1 - eps^2/(1+u)^2), u(-1) = u(1) = 0.

Even solutions are computed on the half interval: shoot from X = 0 with
u(0) = u0, u'(0) = 0 and match u = 0 at the boundary.
"""
import dataclasses
import enum
import logging as log
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy import integrate, optimize

from .kernel import (
    Axis,
    AxisPoint,
    DlimitError,
    FloatArray,
    InvalidParameter,
    ParamPoint,
    Point,
    Trajectory,
    integrate_ode,
    make_point,
)


class NewtonDiverged(DlimitError):
    pass


class SingularityHit(DlimitError):
    pass


class ContinuationStalled(DlimitError):
    pass


@enum.unique
class BranchTag(enum.Enum):
    Lower = "Lower"
    Middle = "Middle"
    Upper = "Upper"


@enum.unique
class SsRegime(enum.Enum):
    I = "I"  # noqa: E741
    II = "II"
    III = "III"
    IV = "IV"


@dataclasses.dataclass(frozen=True)
class BvpConfig:
    rel_tol: float = 1e-11
    abs_tol: float = 1e-13
    newton_tol: float = 1e-10
    max_newton: int = 40
    n_profile: int = 201
    eps0: float = 0.25

    @classmethod
    def default(cls) -> "BvpConfig":
        return cls()


@dataclasses.dataclass(frozen=True)
class MemsSolution:
    lam: float
    eps: float
    grid: FloatArray
    profile: FloatArray
    norm_sq: float
    branch_tag: BranchTag = BranchTag.Lower
    fold: bool = False

    @property
    def u0(self) -> float:
        return float(self.profile[self.grid.size // 2])


def forcing(u: float, eps: float) -> float:
    g = 1 + u
    return 1 / (g * g) * (1 - eps * eps / (g * g))


def forcing_prime(u: float, eps: float) -> float:
    g = 1 + u
    return -2 / g**3 + 4 * eps * eps / g**5


def first_integral(u: float, eps: float) -> float:
    """Phi with Phi' = forcing."""
    g = 1 + u
    return -1 / g + eps * eps / (3 * g**3)


def _guard(eps: float) -> float:
    return eps / 2 if eps > 0 else 1e-6


def _shoot(lam: float, eps: float, u0: float, config: BvpConfig) -> Trajectory:
    """Integrate (u, u', du/du0, du'/du0, du/dlam, du'/dlam) from 0 to 1."""
    floor = _guard(eps)
    if 1 + u0 <= floor:
        raise SingularityHit(f"u0={u0} is below the guard for eps={eps}")

    def field(_x: float, z: FloatArray) -> FloatArray:
        u, du, w, dw, p, dp = z
        f = forcing(u, eps)
        fp = forcing_prime(u, eps)
        return np.array([du, lam * f, dw, lam * fp * w, dp, f + lam * fp * p])

    result = integrate_ode(
        field,
        [u0, 0.0, 1.0, 0.0, 0.0, 0.0],
        (0.0, 1.0),
        config.rel_tol,
        config.abs_tol,
        halt=lambda _x, z: bool(1 + z[0] <= floor),
    )
    if result.halted:
        raise SingularityHit(f"1+u fell below {floor} (lam={lam}, u0={u0})")
    return result.trajectory


def shooting_residual(lam: float, eps: float, u0: float, config: Optional[BvpConfig] = None) -> Tuple[float, float, float]:
    """u(1) and its derivatives with respect to u0 and lam."""
    z = _shoot(lam, eps, u0, config or BvpConfig.default()).final_state
    return float(z[0]), float(z[2]), float(z[4])


def _solution(lam: float, eps: float, u0: float, config: BvpConfig, tag: BranchTag = BranchTag.Lower, fold: bool = False) -> MemsSolution:
    traj = _shoot(lam, eps, u0, config)
    half = np.linspace(0.0, 1.0, config.n_profile // 2 + 1)
    values = np.array([traj.interpolate(x)[0] for x in half])
    values[-1] = 0.0 if abs(values[-1]) < 1e-8 else values[-1]
    grid = np.concatenate([-half[::-1], half[1:]])
    profile = np.concatenate([values[::-1], values[1:]])
    norm_sq = 2 * float(integrate.simpson(values * values, x=half))
    return MemsSolution(lam, eps, grid, profile, norm_sq, tag, fold)


def mems_shoot(
    lam: float, eps: float, u0_guess: float, config: Optional[BvpConfig] = None
) -> MemsSolution:
    """Newton on u0 for the boundary residual u(1) = 0."""
    config = config or BvpConfig.default()
    if lam <= 0 or eps < 0:
        raise InvalidParameter("need lam > 0 and eps >= 0")
    u0 = u0_guess
    floor = -1 + _guard(eps)
    for iteration in range(config.max_newton):
        residual, d_u0, _ = shooting_residual(lam, eps, u0, config)
        if abs(residual) < config.newton_tol:
            log.debug("mems lam=%s eps=%s converged in %d steps, u0=%s", lam, eps, iteration, u0)
            return _solution(lam, eps, u0, config)
        if d_u0 == 0 or not math.isfinite(d_u0):
            raise NewtonDiverged(f"zero derivative at u0={u0}")
        step = -residual / d_u0
        candidate = u0 + step
        # damp steps that leave (floor, 0]
        while not floor < candidate <= 0.5:
            step /= 2
            candidate = u0 + step
            if abs(step) < 1e-15:
                raise NewtonDiverged(f"Newton left the admissible range from u0={u0}")
        u0 = candidate
    raise NewtonDiverged(f"no convergence after {config.max_newton} Newton steps")


def mems_solutions(
    lam: float, eps: float, n_scan: int = 400, config: Optional[BvpConfig] = None
) -> List[MemsSolution]:
    """All even solutions found by scanning u0 and refining sign changes of u(1)."""
    config = config or BvpConfig.default()
    gap = _guard(eps) if eps == 0 else eps
    # dense near the lower bound -1 + gap, where u(1) varies fastest
    offsets = gap * np.logspace(-8, math.log10((1 - gap) / gap), n_scan) if gap < 1 else np.linspace(0.01, 1, n_scan)
    u0_grid = -1 + gap + offsets
    values: List[Tuple[float, float]] = []
    for u0 in u0_grid:
        try:
            values.append((float(u0), shooting_residual(lam, eps, float(u0), config)[0]))
        except SingularityHit:
            continue
    found: List[MemsSolution] = []
    for (u_a, r_a), (u_b, r_b) in zip(values, values[1:]):
        if r_a == 0:
            found.append(_solution(lam, eps, u_a, config))
        elif r_a * r_b < 0:
            root = optimize.brentq(
                lambda u: shooting_residual(lam, eps, u, config)[0], u_a, u_b, xtol=1e-14, rtol=1e-14
            )
            found.append(_solution(lam, eps, root, config))
    return found


def energy_residual(solution: MemsSolution) -> float:
    """Max deviation of (u')^2/2 - lam Phi(u) from its value at X = 0.

    Evaluated on the integrator samples of a fresh solve, independently of the
    shooting residual.
    """
    z = _shoot(solution.lam, solution.eps, solution.u0, BvpConfig.default()).states
    eps, lam = solution.eps, solution.lam
    reference = lam * first_integral(solution.u0, eps)
    energy = 0.5 * z[:, 1] ** 2 - lam * np.array([first_integral(u, eps) for u in z[:, 0]])
    return float(np.max(np.abs(energy + reference)))


def mems_lambda_of_u0(u0: float, eps: float) -> float:
    """lam on the solution branch through u(0) = u0, from the first integral.

    With v'' = F(v), v(0) = u0, the time T to reach 0 gives lam = T^2.
    """
    phi0 = first_integral(u0, eps)
    f0 = forcing(u0, eps)
    if f0 <= 0:
        raise ValueError(f"u0={u0} does not bend upwards for eps={eps}")

    def smooth(v: float) -> float:
        dv = v - u0
        gain = first_integral(v, eps) - phi0
        if dv < 1e-12:
            gain = f0 * dv
        return math.sqrt(dv / (2 * gain)) if dv > 0 else 1 / math.sqrt(2 * f0)

    out = integrate.quad(smooth, u0, 0.0, weight="alg", wvar=(-0.5, 0.0), full_output=1)
    if len(out) == 4:
        raise NewtonDiverged(out[3])
    return float(out[0]) ** 2


@dataclasses.dataclass(frozen=True)
class ContinuationConfig:
    ds: float = 0.02
    ds_min: float = 1e-7
    ds_max: float = 0.1
    lam_max: float = 3.0

    @classmethod
    def default(cls) -> "ContinuationConfig":
        return cls()


def mems_branch(
    eps: float,
    lambda_start: float = 1e-3,
    direction: float = 1.0,
    n_steps: int = 400,
    config: Optional[BvpConfig] = None,
    continuation: Optional[ContinuationConfig] = None,
) -> List[MemsSolution]:
    """Pseudo-arclength continuation in (lam, u0) from the lower branch at lambda_start."""
    # pylint: disable=too-many-locals,too-many-statements
    config = config or BvpConfig.default()
    cont = continuation or ContinuationConfig.default()
    start = mems_shoot(lambda_start, eps, -lambda_start / 2, config)
    z = np.array([start.lam, start.u0])
    _, r_u, r_l = shooting_residual(z[0], eps, z[1], config)
    tangent = _tangent(r_l, r_u, np.array([direction, 0.0]))
    points = [z.copy()]
    tangents = [tangent]
    ds = cont.ds

    for _ in range(n_steps):
        if z[0] > cont.lam_max or z[0] <= 0:
            break
        try:
            z_new = _correct(z + ds * tangent, tangent, eps, config)
        except (NewtonDiverged, SingularityHit) as err:
            ds /= 2
            log.debug("continuation step halved to %s (%s)", ds, err.reason)
            if ds < cont.ds_min:
                if isinstance(err, SingularityHit):
                    log.info("branch ends toward the singular limit at lam=%s", z[0])
                    break
                raise ContinuationStalled(f"step fell below {cont.ds_min} at lam={z[0]}") from err
            continue
        _, r_u, r_l = shooting_residual(z_new[0], eps, z_new[1], config)
        tangent = _tangent(r_l, r_u, tangent)
        z = z_new
        points.append(z.copy())
        tangents.append(tangent)
        ds = min(cont.ds_max, ds * 1.3)

    return _tag_branch(points, tangents, eps, config)


def _tangent(r_l: float, r_u: float, previous: FloatArray) -> FloatArray:
    t = np.array([r_u, -r_l])
    t /= np.linalg.norm(t)
    return t if float(t @ previous) >= 0 else -t  # type: ignore[no-any-return]


def _correct(guess: FloatArray, tangent: FloatArray, eps: float, config: BvpConfig) -> FloatArray:
    z = guess.copy()
    for _ in range(12):
        if z[0] <= 0:
            raise NewtonDiverged("lam became non-positive")
        residual, r_u, r_l = shooting_residual(z[0], eps, z[1], config)
        arc = float(tangent @ (z - guess))
        if abs(residual) < config.newton_tol and abs(arc) < 1e-12:
            return z
        jac = np.array([[r_l, r_u], tangent])
        try:
            z = z - np.linalg.solve(jac, [residual, arc])
        except np.linalg.LinAlgError as err:
            raise NewtonDiverged("singular corrector system") from err
    raise NewtonDiverged("corrector did not converge")


def _tag_branch(points: List[FloatArray], tangents: List[FloatArray], eps: float, config: BvpConfig) -> List[MemsSolution]:
    tags = list(BranchTag)
    level = 0
    solutions: List[MemsSolution] = []
    for i, (z, t) in enumerate(zip(points, tangents)):
        fold = i > 0 and math.copysign(1, t[0]) != math.copysign(1, tangents[i - 1][0])
        if fold:
            level = min(level + 1, len(tags) - 1)
        solutions.append(_solution(float(z[0]), eps, float(z[1]), config, tags[level], fold))
    return solutions


def fold_points(branch: List[MemsSolution]) -> List[MemsSolution]:
    return [s for s in branch if s.fold]


def saddle_node(branch: List[MemsSolution]) -> MemsSolution:
    """The fold joining the middle and upper branches, lam*(eps)."""
    folds = [s for s in branch if s.fold and s.branch_tag is BranchTag.Upper]
    if len(folds) != 1:
        raise ContinuationStalled(f"expected one middle/upper fold, found {len(folds)}")
    return folds[0]


def regime_delta(eps: float, lam: float) -> float:
    return math.sqrt(eps / lam)


def classify_ss(eps: float, delta: float, eps0: float = 0.25) -> Optional[SsRegime]:
    """Regime of singular solutions; None where the asymptotic picture makes no claim.

    That is eps >= eps0 inside the band, and eps = 0 with delta exactly 2/sqrt(3).
    """
    upper = 2 / math.sqrt(3)
    point: Point = make_point(eps, delta)
    if isinstance(point, AxisPoint):
        if point.axis is Axis.ORIGIN:
            return SsRegime.III
        if point.axis is Axis.SECOND_ZERO:
            return SsRegime.IV
        if delta < upper:
            return SsRegime.II
        return SsRegime.IV if delta > upper else None
    assert isinstance(point, ParamPoint)
    if delta > upper or delta < math.sqrt(eps):
        return SsRegime.IV
    if eps < eps0:
        return SsRegime.I
    return None
