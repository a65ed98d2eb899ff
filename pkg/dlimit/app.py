"""
Classifies doubly-singular perturbation problems over the (eps, delta) quadrant.

Every command writes CSV (and where it applies, SVG) artifacts plus a run.cfg
into --out; `dlimit --config <out>/run.cfg` repeats the run.
"""

import argparse
import csv
import dataclasses
import logging
import math
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, cast

import configargparse  # type: ignore[import]
import numpy as np
import yaml

from . import bvp, dispersion, fastslow, figures, pdmp, problems, shear, stochastic
from .kernel import DlimitError, DlimitInputError, fmt_float, integrate_ode
from .render import render_curve
from .sweep import GridSpec

COMMANDS = (
    "tc",
    "olsen",
    "sfs",
    "sde-tc",
    "fhn",
    "shear",
    "shear-diagram",
    "pdmp-linear",
    "pdmp-logistic",
    "mems",
    "mems-regimes",
    "skt",
    "skt-plane",
    "sweep",
    "figures",
)

# options that describe how to run, not what to compute
_NOT_RECORDED = frozenset({"config", "debug", "command", "command_name", "names"})


class RecipeFailure(DlimitError):
    pass


def positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise configargparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0 or not math.isfinite(value):
        raise configargparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def non_negative_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise configargparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value >= 0 or not math.isfinite(value):
        raise configargparse.ArgumentTypeError(f"must not be negative: {text!r}")
    return value


def grid_spec(text: str) -> GridSpec:
    try:
        return GridSpec.parse(text)
    except DlimitInputError as err:
        raise configargparse.ArgumentTypeError(err.reason) from None


def _parse_config(args: List[str]) -> argparse.Namespace:
    parser = configargparse.ArgParser(
        auto_env_var_prefix="DLIMIT_",
        ignore_unknown_config_file_keys=True,
        config_file_parser_class=configargparse.YAMLConfigFileParser,
        formatter_class=configargparse.ArgumentDefaultsRawHelpFormatter,
        description=__doc__,
    )
    parser.add_argument(
        "--config",
        env_var="DLIMIT_CONFIG",
        type=str,
        is_config_file=True,
        help="config file path (YAML key: value), e.g. a previous run.cfg\n",
    )
    parser.add_argument(
        "command",
        nargs="?",
        choices=COMMANDS,
        help="what to compute\n",
    )
    parser.add_argument(
        "names",
        nargs="*",
        default=[],
        help="recipe names for `figures` (default: all)\n",
    )
    parser.add_argument(
        "--command-name",
        choices=COMMANDS,
        default=None,
        help="the command, for config files and environment\n",
    )
    parser.add_argument(
        "--recipes",
        nargs="*",
        default=[],
        help="recipe names for `figures`, for config files\n",
    )
    parser.add_argument("--eps", type=non_negative_float, default=None, help="first small parameter\n")
    parser.add_argument("--delta", type=non_negative_float, default=None, help="second small parameter\n")
    parser.add_argument("--sigma", type=non_negative_float, default=None, help="noise intensity\n")
    parser.add_argument("--alpha", type=non_negative_float, default=None, help="dissipation (shear)\n")
    parser.add_argument("--b", type=non_negative_float, default=1.0, help="shear strength\n")
    parser.add_argument("--lam", type=positive_float, default=None, help="MEMS load lambda\n")
    parser.add_argument("--h", type=positive_float, default=0.1, help="confidence strip width (sfs)\n")
    parser.add_argument("--paths", type=int, default=1000, help="Monte-Carlo path count\n")
    parser.add_argument("--tend", type=positive_float, default=200.0, help="time horizon (fhn)\n")
    parser.add_argument("--window", type=positive_float, default=None, help="observation window (olsen)\n")
    parser.add_argument("--simulate", type=positive_float, default=None, metavar="T", help="simulate a logistic path of length T\n")
    parser.add_argument("--mc", action="store_true", help="add a Monte-Carlo estimate\n")
    parser.add_argument("--branch", action="store_true", help="continue the MEMS branch instead of a single lambda\n")
    parser.add_argument("--r1-min", type=positive_float, default=None, help="lower end of the r1 window (skt)\n")
    parser.add_argument("--r1-max", type=positive_float, default=None, help="upper end of the r1 window (skt)\n")
    parser.add_argument("--problem", choices=sorted(problems.PROBLEMS), default=None, help="problem to sweep\n")
    parser.add_argument("--grid", type=grid_spec, default=None, help="sweep grid, e.g. 0.01:1:20x20\n")
    parser.add_argument("--third", type=positive_float, default=None, help="slice value of a third parameter\n")
    parser.add_argument("--boundary", type=str, default=None, metavar="A,B", help="labels to fit a boundary between\n")
    parser.add_argument("--fit", choices=("powerlaw", "explaw"), default="powerlaw", help="boundary model\n")
    parser.add_argument("--rel-tol", type=positive_float, default=None, help="override the ODE relative tolerance\n")
    parser.add_argument("--abs-tol", type=positive_float, default=None, help="override the ODE absolute tolerance\n")
    parser.add_argument("--seed", type=int, default=0, help="base seed of every random stream\n")
    parser.add_argument("--threads", type=int, default=1, help="sweep parallelism\n")
    parser.add_argument("--out", type=str, default="dlimit-out", metavar="DIR", help="output directory\n")
    parser.add_argument("--quick", action="store_true", help="fewer paths and smaller grids\n")
    parser.add_argument("--dump", action="store_true", help="also write trajectory CSVs\n")
    parser.add_argument("--debug", action="store_true", help="debug logging\n")

    config = cast(argparse.Namespace, parser.parse_args(args))
    config.command = config.command or config.command_name
    config.recipes = config.names or config.recipes
    if config.command is None:
        raise DlimitInputError("no command given; expected one of " + ", ".join(COMMANDS))
    if config.threads < 1 or config.paths < 1:
        raise DlimitInputError("--threads and --paths must be at least 1")
    if config.command != "figures" and config.names:
        raise DlimitInputError(f"{config.command} takes no positional names")
    return config


@dataclasses.dataclass(frozen=True)
class RunConfig:
    command: str
    options: Dict[str, Any]

    @classmethod
    def from_options(cls, options: argparse.Namespace) -> "RunConfig":
        recorded: Dict[str, Any] = {}
        for key, value in sorted(vars(options).items()):
            if key in _NOT_RECORDED or value is None or value == []:
                continue
            if isinstance(value, GridSpec):
                value = (
                    f"{fmt_float(value.eps_range[0])}:{fmt_float(value.eps_range[1])},"
                    f"{fmt_float(value.second_range[0])}:{fmt_float(value.second_range[1])}:"
                    f"{value.nx}x{value.ny}"
                )
            recorded[key.replace("_", "-")] = value
        return cls(options.command, recorded)

    def to_yaml(self) -> str:
        document = {"command-name": self.command, **self.options}
        return cast(str, yaml.safe_dump(document, sort_keys=True))

    def write(self, out_dir: str) -> str:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, "run.cfg")
        with open(path, "w", encoding="utf-8") as stream:
            stream.write(self.to_yaml())
        return path


def _require(options: argparse.Namespace, *names: str) -> None:
    missing = [f"--{name.replace('_', '-')}" for name in names if getattr(options, name) is None]
    if missing:
        raise DlimitInputError(f"{options.command} needs {', '.join(missing)}")


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return fmt_float(float(value))
    return str(value)


def write_rows(path: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(value) for value in row])
    logging.info("wrote %s", path)
    return path


def _out(options: argparse.Namespace, name: str) -> str:
    return os.path.join(options.out, name)


def _paths(options: argparse.Namespace) -> int:
    return max(100, options.paths // 10) if options.quick else options.paths


def _tc_config(options: argparse.Namespace) -> fastslow.TcConfig:
    config = fastslow.TcConfig.default()
    if options.rel_tol is not None:
        config = dataclasses.replace(config, rel_tol=options.rel_tol)
    if options.abs_tol is not None:
        config = dataclasses.replace(config, abs_tol=options.abs_tol)
    return config


def _run_tc(options: argparse.Namespace) -> List[str]:
    _require(options, "eps")
    fastslow.check_tc_eps(options.eps)
    _require(options, "delta")
    config = _tc_config(options)
    trajectory, label = fastslow.integrate_transcritical(options.eps, options.delta, config)
    files = []
    if options.dump:
        path = _out(options, "tc-trajectory.csv")
        with open(path, "w", encoding="utf-8") as stream:
            trajectory.to_csv(stream)
        files.append(path)
    if label is None:
        x, y = trajectory.final_state
        raise fastslow.Ambiguous(f"trajectory ended at ({x:.6g}, {y:.6g}) without meeting a criterion")
    print(label.value)
    files.append(write_rows(_out(options, "tc.csv"), ["eps", "delta", "label"], [[options.eps, options.delta, label.value]]))
    return files


def _run_olsen(options: argparse.Namespace) -> List[str]:
    _require(options, "eps", "delta")
    config = fastslow.OlsenConfig.default()
    if options.quick:
        config = dataclasses.replace(config, window_factor=5.0)
    if options.rel_tol is not None:
        config = dataclasses.replace(config, rel_tol=options.rel_tol)
    if options.abs_tol is not None:
        config = dataclasses.replace(config, abs_tol=options.abs_tol)
    window = options.window or config.window_factor / options.eps
    label = fastslow.classify_olsen(options.eps, options.delta, window, window, config=config)
    print(label.kind.value)
    files = [
        write_rows(
            _out(options, "olsen.csv"),
            ["eps", "delta", "label", "maxima", "lyapunov", "stderr", "conjectural"],
            [[options.eps, options.delta, label.kind.value, label.maxima_count, label.lyapunov.value, label.lyapunov.stderr, label.conjectural]],
        )
    ]
    if options.dump:
        params = fastslow.OlsenParams.default()
        trajectory = integrate_ode(
            fastslow.olsen_field(options.eps, options.delta, params),
            config.state0,
            (0.0, 2 * window),
            config.rel_tol,
            config.abs_tol,
        ).trajectory
        path = _out(options, "olsen-trajectory.csv")
        with open(path, "w", encoding="utf-8") as stream:
            trajectory.to_csv(stream)
        files.append(path)
    return files


_PROB_HEADER = ["eps", "sigma", "delta", "p_hat", "ci_lo", "ci_hi", "n", "seed"]


def _prob_row(options: argparse.Namespace, estimate: stochastic.ProbEstimate) -> List[Any]:
    delta = options.delta if options.delta is not None else ""
    return [options.eps, options.sigma, delta, estimate.p_hat, estimate.ci95[0], estimate.ci95[1], estimate.n, estimate.seed]


def _run_sfs(options: argparse.Namespace) -> List[str]:
    _require(options, "eps", "sigma")
    estimate = stochastic.escape_probability_strip(
        options.eps, options.sigma, h=options.h, n_paths=_paths(options), base_seed=options.seed
    )
    print(f"{estimate.p_hat:.4f} [{estimate.ci95[0]:.4f}, {estimate.ci95[1]:.4f}]")
    return [write_rows(_out(options, "sfs.csv"), _PROB_HEADER, [_prob_row(options, estimate)])]


def _run_sde_tc(options: argparse.Namespace) -> List[str]:
    _require(options, "eps", "sigma")
    estimate = stochastic.transition_probability_transcritical(
        options.eps, options.sigma, delta=options.delta, n_paths=_paths(options), base_seed=options.seed
    )
    print(f"{estimate.p_hat:.4f} [{estimate.ci95[0]:.4f}, {estimate.ci95[1]:.4f}]")
    return [write_rows(_out(options, "sde-tc.csv"), _PROB_HEADER, [_prob_row(options, estimate)])]


def _run_fhn(options: argparse.Namespace) -> List[str]:
    _require(options, "eps", "delta", "sigma")
    t_end = options.tend / 4 if options.quick else options.tend
    stats = stochastic.classify_fhn(options.eps, options.delta, options.sigma, t_end, options.seed)
    print(stats.label.value)
    files = [
        write_rows(
            _out(options, "fhn.csv"),
            ["eps", "delta", "sigma", "label", "spikes", "median_small_osc", "respike_fraction", "respike_theory", "censored"],
            [[options.eps, options.delta, options.sigma, stats.label.value, len(stats.spike_times), stats.median_count, stats.respike_fraction, stats.theoretical_respike, stats.censored]],
        )
    ]
    if options.dump:
        times, x, y = stochastic.simulate_fhn(options.eps, options.delta, options.sigma, t_end, [options.seed])
        files.append(write_rows(_out(options, "fhn-trajectory.csv"), ["t", "x", "y"], list(zip(times, x[0], y[0]))))
    return files


def _run_shear(options: argparse.Namespace) -> List[str]:
    _require(options, "alpha", "sigma")
    pairs = [shear.lyapunov_quadrature(options.alpha, options.b, options.sigma)]
    if options.mc:
        params = shear.ShearParams(options.alpha, options.b, options.sigma)
        t_total, n_reps = (50.0, 8) if options.quick else (200.0, 32)
        pairs.append(shear.mc_lyapunov_cylinder(params, t_total, n_reps, options.seed))
    for pair in pairs:
        print(f"{pair.method.value}: lambda1={pair.lambda1:.6g} lambda2={pair.lambda2:.6g}")
    return [
        write_rows(
            _out(options, "shear.csv"),
            ["alpha", "b", "sigma", "method", "lambda1", "lambda2", "se"],
            [[options.alpha, options.b, options.sigma, p.method.value, p.lambda1, p.lambda2, "" if p.se is None else p.se] for p in pairs],
        )
    ]


def _run_recipe(name: str) -> Callable[[argparse.Namespace], List[str]]:
    def runner(options: argparse.Namespace) -> List[str]:
        ctx = figures.RunContext(options.out, options.quick, options.seed, options.threads)
        return figures.RECIPES[name].run(ctx)

    return runner


def _run_pdmp_linear(options: argparse.Namespace) -> List[str]:
    _require(options, "eps", "delta")
    n_cells = 256 if options.quick else 1024
    g = pdmp.threshold_G(options.eps, n_cells)
    label = pdmp.classify_pdl(options.eps, options.delta, n_cells)
    row: List[Any] = [options.eps, options.delta, g, label.value, "", ""]
    if options.mc:
        t_total = 200.0 if options.quick else 1000.0
        estimate = pdmp.radial_lyapunov(pdmp.LinearSwitching(options.delta, options.eps), t_total, 32, options.seed)
        row[4:] = [estimate.value, estimate.se]
    print(label.value)
    return [write_rows(_out(options, "pdmp-linear.csv"), ["eps", "delta", "G", "label", "lyapunov", "se"], [row])]


def _run_pdmp_logistic(options: argparse.Namespace) -> List[str]:
    _require(options, "eps", "delta")
    eps, delta = options.eps, options.delta
    bounded = pdmp.classify_bdd(eps, delta)
    print("Bounded" if bounded else "Unbounded")
    densities = pdmp.logistic_densities(eps, delta)
    x = np.linspace(1.0, 2.0, 202)[1:-1]
    files = [
        write_rows(
            _out(options, "pdmp-logistic-density.csv"),
            ["x", "rho0", "rho1"],
            [[xi, densities.rho0(xi), densities.rho1(xi)] for xi in x],
        )
    ]
    if options.simulate is not None:
        path = pdmp.simulate_logistic(eps, delta, options.simulate, options.seed)
        coordinates = pdmp.logistic_time_coordinates(delta)
        rows = []
        for mode in (0, 1):
            hist = pdmp.occupation_histogram(
                path, mode, 50, transient=min(10.0, options.simulate / 10), time_coordinate=coordinates[mode]
            )
            rows.append([eps, delta, mode, pdmp.l1_distance(hist, densities, mode)])
        files.append(write_rows(_out(options, "pdmp-logistic-l1.csv"), ["eps", "delta", "mode", "l1"], rows))
    return files


def _run_mems(options: argparse.Namespace) -> List[str]:
    _require(options, "eps")
    if options.branch:
        branch = bvp.mems_branch(options.eps, n_steps=120 if options.quick else 400)
        rows = [[s.lam, s.norm_sq, s.u0, s.branch_tag.value, int(s.fold)] for s in branch]
        curves: Dict[str, List[Any]] = {}
        for s in branch:
            curves.setdefault(s.branch_tag.value, []).append((s.lam, s.norm_sq))
        lam_star = bvp.saddle_node(branch).lam
        print(f"lambda*={lam_star:.8g}")
        return [
            write_rows(_out(options, "mems-branch.csv"), ["lambda", "norm_sq", "u0", "branch", "fold"], rows),
            *render_curve("mems-branch-diagram", curves, options.out, "lambda", "norm_sq"),
        ]
    _require(options, "lam")
    solutions = bvp.mems_solutions(options.lam, options.eps)
    print(f"{len(solutions)} solution(s)")
    return [
        write_rows(
            _out(options, "mems.csv"),
            ["lambda", "eps", "u0", "norm_sq", "energy_residual"],
            [[s.lam, s.eps, s.u0, s.norm_sq, bvp.energy_residual(s)] for s in solutions],
        )
    ]


def _run_skt(options: argparse.Namespace) -> List[str]:
    _require(options, "eps", "delta")
    params = dispersion.SktParams.default()
    window = None
    if options.r1_min is not None or options.r1_max is not None:
        lo, hi = dispersion.positivity_window(params)
        window = (options.r1_min or lo, options.r1_max or hi)
    n_modes, n_scan = (10, 200) if options.quick else (20, 1000)
    counts = {
        "4comp": dispersion.count_bifurcations_4comp(params, options.eps, options.delta, window, n_modes, n_scan),
        "limit": dispersion.count_bifurcations_limit(params, window, n_modes, n_scan),
    }
    rows = []
    for system, count in counts.items():
        print(f"{system}: {count.count}")
        for r1, mode in _crossings_with_modes(count):
            rows.append([system, options.eps, options.delta, count.count, r1, mode])
    return [write_rows(_out(options, "skt.csv"), ["system", "eps", "delta", "count", "r1", "mode"], rows)]


def _crossings_with_modes(count: dispersion.BifCount) -> List[Any]:
    if not count.crossing_r1_values:
        return [("", "")]
    modes = ",".join(str(n) for n in count.modes_involved)
    return [(r1, modes) for r1 in count.crossing_r1_values]


def _run_sweep(options: argparse.Namespace) -> List[str]:
    _require(options, "problem", "grid")
    grid = options.grid.scaled(figures.QUICK_GRID_FACTOR) if options.quick else options.grid
    boundary = None
    if options.boundary:
        parts = options.boundary.split(",")
        if len(parts) != 2:
            raise DlimitInputError(f"--boundary takes two labels A,B, got {options.boundary!r}")
        boundary = (parts[0], parts[1])
    else:
        labels = problems.get_problem(options.problem).label_set
        if len(labels) == 2:
            boundary = (labels[0], labels[1])
    recipe = figures.SweepRecipe(options.problem, grid, boundary, options.fit, options.third)
    ctx = figures.RunContext(options.out, options.quick, options.seed, options.threads)
    return figures.run_sweep(options.problem, recipe, ctx)


def _run_figures(options: argparse.Namespace) -> List[str]:
    code = figures.figures(options.recipes, options.out, options.quick, options.seed, options.threads)
    if code:
        raise RecipeFailure("some recipes failed, see manifest.yaml")
    return [os.path.join(options.out, "manifest.yaml")]


HANDLERS: Dict[str, Callable[[argparse.Namespace], List[str]]] = {
    "tc": _run_tc,
    "olsen": _run_olsen,
    "sfs": _run_sfs,
    "sde-tc": _run_sde_tc,
    "fhn": _run_fhn,
    "shear": _run_shear,
    "shear-diagram": _run_recipe("fig13"),
    "pdmp-linear": _run_pdmp_linear,
    "pdmp-logistic": _run_pdmp_logistic,
    "mems": _run_mems,
    "mems-regimes": _run_recipe("fig20"),
    "skt": _run_skt,
    "skt-plane": _run_recipe("skt-plane"),
    "sweep": _run_sweep,
    "figures": _run_figures,
}


def main(args: Optional[List[str]] = None) -> int:
    if args is None:
        args = sys.argv[1:]

    try:
        options = _parse_config(args)
    except SystemExit as exit_:
        # argparse exits 0 for --help and 2 for usage errors
        return 0 if not exit_.code else 1
    except DlimitInputError as err:
        print(f"dlimit: error: {err.reason}", file=sys.stderr)
        return 1

    if options.debug:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        os.makedirs(options.out, exist_ok=True)
        RunConfig.from_options(options).write(options.out)
        files = HANDLERS[options.command](options)
    except DlimitInputError as err:
        print(f"dlimit {options.command}: error: {err.reason}", file=sys.stderr)
        return 1
    except DlimitError as err:
        print(f"{type(err).__name__}: {err.reason}", file=sys.stderr)
        return 2
    logging.info("%s: %d file(s) in %s", options.command, len(files), options.out)
    return 0
