"""
Named property evaluators: the problems `dlimit sweep --problem <name>` knows about.

Every factory takes `quick`, which trades path counts and integration horizons
for runtime.
"""
import functools
from typing import Callable, Dict

from . import bvp, classical, dispersion, fastslow, pdmp, shear, stochastic
from .kernel import Axis, DlimitInputError, ParamPoint, labelled
from .sweep import AMBIGUOUS, NOT_DEFINED, GridSpec, PropertyEvaluator

Factory = Callable[[bool], PropertyEvaluator]

FHN_EPS = 0.01
SHEAR_B = 1.0
HOPF_A = 1.0
HOPF_BETA = 0.0


def _third(point: ParamPoint, default: float) -> float:
    return point.third if point.third is not None else default


def _roots(quick: bool) -> PropertyEvaluator:
    del quick
    return PropertyEvaluator(
        name="roots",
        label_set=(classical.ClassicalLabel.RootsTwo.value, classical.ClassicalLabel.RootsZero.value),
        evaluate=lambda p, _seed: classical.root_count_label(p).value,
        axis_rules={
            # delta = 0 leaves the double root x = 0; eps = 0 leaves -delta = 0, no root
            Axis.SECOND_ZERO: classical.ClassicalLabel.RootsTwo.value,
            Axis.EPS_ZERO: classical.ClassicalLabel.RootsZero.value,
        },
    )


def _convexity(quick: bool) -> PropertyEvaluator:
    del quick
    convex = classical.ClassicalLabel.ConvexAlways.value
    return PropertyEvaluator(
        name="convexity",
        label_set=(convex,),
        evaluate=lambda p, _seed: convex if classical.convexity_property(p) == 1 else NOT_DEFINED,
        axis_rules={axis: convex for axis in Axis},
    )


def _partials(quick: bool) -> PropertyEvaluator:
    del quick
    return PropertyEvaluator(
        name="partials",
        label_set=(classical.ClassicalLabel.PartialMinus.value, classical.ClassicalLabel.PartialPlus.value),
        evaluate=lambda p, _seed: classical.partials_label(p).value,
    )


def _synthetic_square(quick: bool) -> PropertyEvaluator:
    del quick
    return PropertyEvaluator(
        name="synthetic-square",
        label_set=("Below", "Above"),
        evaluate=lambda p, _seed: "Above" if p.delta > p.eps**2 else "Below",
    )


def _tc(quick: bool) -> PropertyEvaluator:
    del quick

    def evaluate(p: ParamPoint, _seed: int) -> str:
        fastslow.check_tc_eps(p.eps)
        try:
            return fastslow.classify_transcritical(p.eps, p.delta).value
        except fastslow.Ambiguous:
            return AMBIGUOUS

    return PropertyEvaluator(
        name="tc",
        label_set=tuple(label.value for label in fastslow.TcLabel),
        evaluate=evaluate,
    )


@functools.lru_cache(maxsize=None)
def _olsen_k0(eps: float, t_transient: float, window_factor: float) -> int:
    config = fastslow.OlsenConfig(window_factor=window_factor)
    return fastslow.calibrate_k0(eps, t_transient, config)


def _olsen(quick: bool) -> PropertyEvaluator:
    window_factor = 5.0 if quick else fastslow.OlsenConfig.default().window_factor

    def evaluate(p: ParamPoint, _seed: int) -> str:
        config = fastslow.OlsenConfig(window_factor=window_factor)
        t_transient = window_factor / p.eps
        k0 = _olsen_k0(p.eps, t_transient, window_factor)
        try:
            return fastslow.classify_olsen(p.eps, p.delta, t_transient, k0=k0, config=config).kind.value
        except fastslow.Indeterminate:
            return AMBIGUOUS

    return PropertyEvaluator(
        name="olsen",
        label_set=tuple(kind.value for kind in fastslow.OscKind),
        evaluate=evaluate,
    )


def _probability_label(estimate: stochastic.ProbEstimate, low: str, high: str) -> str:
    if estimate.straddles(0.5):
        return AMBIGUOUS
    return high if estimate.p_hat > 0.5 else low


def _sfs(quick: bool) -> PropertyEvaluator:
    n_paths = 100 if quick else 1000

    def evaluate(p: ParamPoint, seed: int) -> str:
        estimate = stochastic.escape_probability_strip(
            p.eps, p.sigma, h=_third(p, 0.1), n_paths=n_paths, base_seed=seed
        )
        return _probability_label(estimate, "Concentrated", "Escaping")

    return PropertyEvaluator(
        name="sfs",
        label_set=("Concentrated", "Escaping"),
        evaluate=evaluate,
        stochastic=True,
        second_name="sigma",
        # no noise: the path sits on the slow solution
        axis_rules={Axis.SECOND_ZERO: "Concentrated"},
    )


def _sde_tc(quick: bool) -> PropertyEvaluator:
    n_paths = 200 if quick else 2000

    def evaluate(p: ParamPoint, seed: int) -> str:
        estimate = stochastic.transition_probability_transcritical(
            p.eps, p.sigma, delta=p.third, n_paths=n_paths, base_seed=seed
        )
        return _probability_label(estimate, "NoTransition", "Transition")

    return PropertyEvaluator(
        name="sde-tc",
        label_set=("NoTransition", "Transition"),
        evaluate=evaluate,
        stochastic=True,
        second_name="sigma",
    )


def _fhn(quick: bool) -> PropertyEvaluator:
    t_end = 50.0 if quick else 200.0

    def evaluate(p: ParamPoint, seed: int) -> str:
        # x axis carries delta, the slice parameter is eps
        return stochastic.classify_fhn(_third(p, FHN_EPS), p.eps, p.second, t_end, seed).label.value

    return PropertyEvaluator(
        name="fhn",
        label_set=tuple(label.value for label in stochastic.SpikeLabel),
        evaluate=evaluate,
        stochastic=True,
        first_name="delta",
        second_name="sigma",
    )


def _shear(quick: bool) -> PropertyEvaluator:
    del quick

    def evaluate(p: ParamPoint, _seed: int) -> str:
        pair = shear.lyapunov_quadrature(p.eps, _third(p, SHEAR_B), p.sigma)
        return "Negative" if pair.lambda1 < 0 else "Positive"

    return PropertyEvaluator(
        name="shear",
        label_set=("Negative", "Positive", "Zero"),
        evaluate=evaluate,
        first_name="alpha",
        second_name="sigma",
        axis_rules={Axis.EPS_ZERO: "Positive", Axis.SECOND_ZERO: "Zero", Axis.ORIGIN: "Zero"},
    )


def _hopf(quick: bool) -> PropertyEvaluator:
    t_total, n_reps = (50.0, 4) if quick else (200.0, 16)

    def evaluate(p: ParamPoint, seed: int) -> str:
        pair = shear.mc_lyapunov_hopf(
            p.eps, HOPF_BETA, HOPF_A, _third(p, SHEAR_B), p.sigma, t_total, n_reps, seed
        )
        se = pair.se if pair.se is not None else 0.0
        if abs(pair.lambda1) <= 2 * se:
            return AMBIGUOUS
        return "Negative" if pair.lambda1 < 0 else "Positive"

    return PropertyEvaluator(
        name="hopf",
        label_set=("Negative", "Positive", "Zero"),
        evaluate=evaluate,
        stochastic=True,
        first_name="alpha",
        second_name="sigma",
        axis_rules={Axis.SECOND_ZERO: "Zero"},
    )


def _pdmp_linear(quick: bool) -> PropertyEvaluator:
    n_cells = 256 if quick else 1024
    return PropertyEvaluator(
        name="pdmp-linear",
        label_set=tuple(label.value for label in pdmp.Stability),
        evaluate=lambda p, _seed: pdmp.classify_pdl(p.eps, p.delta, n_cells).value,
        # G(eps) > 0, so no contraction loses
        axis_rules={Axis.SECOND_ZERO: pdmp.Stability.Unstable.value},
    )


def _pdmp_bdd(quick: bool) -> PropertyEvaluator:
    del quick
    return PropertyEvaluator(
        name="pdmp-bdd",
        label_set=("Bounded", "Unbounded"),
        evaluate=lambda p, _seed: "Bounded" if pdmp.classify_bdd(p.eps, p.delta) == 1 else "Unbounded",
    )


def _mems_ss(quick: bool) -> PropertyEvaluator:
    del quick

    def evaluate(p: ParamPoint, _seed: int) -> str:
        regime = bvp.classify_ss(p.eps, p.delta, bvp.BvpConfig.default().eps0)
        return regime.value if regime is not None else NOT_DEFINED

    return PropertyEvaluator(
        name="mems-ss",
        label_set=tuple(regime.value for regime in bvp.SsRegime),
        evaluate=evaluate,
        axis_rules={
            Axis.ORIGIN: bvp.SsRegime.III.value,
            Axis.SECOND_ZERO: bvp.SsRegime.IV.value,
            # II below delta = 2/sqrt(3) and IV above, so no single label
            Axis.EPS_ZERO: NOT_DEFINED,
        },
    )


def _skt(quick: bool) -> PropertyEvaluator:
    n_modes, n_scan = (10, 200) if quick else (20, 1000)
    params = dispersion.SktParams.default()

    def evaluate(p: ParamPoint, _seed: int) -> str:
        return str(dispersion.count_bifurcations_4comp(params, p.eps, p.delta, None, n_modes, n_scan).count)

    return PropertyEvaluator(
        name="skt",
        label_set=tuple(str(n) for n in range(2 * n_modes + 1)),
        evaluate=evaluate,
    )


PROBLEMS: Dict[str, Factory] = {
    "roots": _roots,
    "convexity": _convexity,
    "partials": _partials,
    "synthetic-square": _synthetic_square,
    "tc": _tc,
    "olsen": _olsen,
    "sfs": _sfs,
    "sde-tc": _sde_tc,
    "fhn": _fhn,
    "shear": _shear,
    "hopf": _hopf,
    "pdmp-linear": _pdmp_linear,
    "pdmp-bdd": _pdmp_bdd,
    "mems-ss": _mems_ss,
    "skt": _skt,
}


def get_problem(name: str, quick: bool = False) -> PropertyEvaluator:
    return labelled(PROBLEMS, name)(quick)


def check_grid(name: str, grid: GridSpec) -> None:
    """Rejects grids a problem cannot resolve."""
    if name == "tc":
        fastslow.check_tc_eps(grid.eps_range[0])
        if grid.eps_range[1] > fastslow.TC_EPS_MAX:
            raise DlimitInputError(f"tc sweeps need eps <= {fastslow.TC_EPS_MAX}")