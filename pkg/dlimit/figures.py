"""
Reproduction recipes: one classification diagram (or curve) per target figure,
plus a manifest.yaml mapping every written file to its recipe.
"""
import dataclasses
import logging as log
import os
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from . import bvp, pdmp, problems, shear
from .kernel import DlimitError, DlimitInputError
from .render import render, render_curve
from .sweep import (
    Degenerate,
    Fit,
    GridSpec,
    NoBoundary,
    extract_boundary,
    fit_exp_law,
    fit_power_law,
    sweep,
)

# a quick grid has about a tenth of the points
QUICK_GRID_FACTOR = 0.32


@dataclasses.dataclass(frozen=True)
class RunContext:
    out_dir: str
    quick: bool = False
    seed: int = 0
    threads: int = 1


@dataclasses.dataclass(frozen=True)
class SweepRecipe:
    problem: str
    grid: GridSpec
    boundary: Optional[Tuple[str, str]] = None
    fit: str = "powerlaw"
    third: Optional[float] = None


Runner = Callable[[RunContext], List[str]]


@dataclasses.dataclass(frozen=True)
class Recipe:
    name: str
    target: str
    run: Runner


def _grid(text: str, ctx: RunContext) -> GridSpec:
    grid = GridSpec.parse(text)
    if ctx.quick:
        grid = grid.scaled(QUICK_GRID_FACTOR)
    return grid


def fit_boundary(
    diagram_boundary: Sequence[Tuple[float, float]], model: str
) -> Fit:
    if model == "explaw":
        return fit_exp_law(diagram_boundary)
    if model == "powerlaw":
        return fit_power_law(diagram_boundary)
    raise DlimitInputError(f"unknown fit model {model!r}, expected powerlaw or explaw")


def run_sweep(
    name: str, recipe: SweepRecipe, ctx: RunContext
) -> List[str]:
    """Sweep, fit the requested boundary when it exists and render under `name`."""
    evaluator = problems.get_problem(recipe.problem, ctx.quick)
    evaluator = dataclasses.replace(evaluator, name=name)
    problems.check_grid(recipe.problem, recipe.grid)
    diagram = sweep(evaluator, recipe.grid, ctx.seed, ctx.threads, recipe.third)
    fits: List[Fit] = []
    points: List[Tuple[float, float]] = []
    if recipe.boundary is not None:
        try:
            points = extract_boundary(diagram, *recipe.boundary)
            fits.append(fit_boundary(points, recipe.fit))
        except (NoBoundary, Degenerate) as err:
            log.warning("%s: no fit: %s", name, err.reason)
    csv_path, svg_path = render(diagram, fits, ctx.out_dir, points or None)
    return [csv_path, os.path.join(ctx.out_dir, f"{name}.yaml"), svg_path]


def _sweep_recipe(
    problem: str,
    grid: str,
    boundary: Optional[Tuple[str, str]] = None,
    fit: str = "powerlaw",
    third: Optional[float] = None,
) -> Callable[[str], Runner]:
    def bind(name: str) -> Runner:
        def runner(ctx: RunContext) -> List[str]:
            recipe = SweepRecipe(problem, _grid(grid, ctx), boundary, fit, third)
            return run_sweep(name, recipe, ctx)

        return runner

    return bind


def _shear_curve(ctx: RunContext) -> List[str]:
    files = _sweep_recipe("shear", "0.1:10,0.05:50:20x20", ("Negative", "Positive"))("fig13")(ctx)
    alphas = np.geomspace(0.1, 10, 12 if ctx.quick else 40)
    curve = shear.sigma_zero_curve([float(a) for a in alphas], problems.SHEAR_B)
    files.extend(
        render_curve(
            "fig13-sigma0",
            {"sigma0": curve},
            ctx.out_dir,
            "alpha",
            "sigma",
            # below the curve lambda1 < 0, above it lambda1 > 0, on sigma = 0 it vanishes
            annotations={"I": (5.0, 1.0), "II": (1.0, 20.0), "III": (5.0, 0.0)},
        )
    )
    return files


def _pdmp_threshold(ctx: RunContext) -> List[str]:
    files = _sweep_recipe("pdmp-linear", "0.05:2,0.001:2:20x20", ("Unstable", "Stable"))("fig16")(ctx)
    n_cells = 256 if ctx.quick else 1024
    eps = np.geomspace(0.05, 2, 6 if ctx.quick else 20)
    curve = [(float(e), pdmp.threshold_G(float(e), n_cells)) for e in eps]
    files.extend(render_curve("fig16-G", {"G": curve}, ctx.out_dir, "eps", "delta"))
    return files


def _mems_diagram(ctx: RunContext) -> List[str]:
    eps = 0.05
    branch = bvp.mems_branch(eps, n_steps=120 if ctx.quick else 400)
    curves: Dict[str, List[Tuple[float, float]]] = {}
    for solution in branch:
        curves.setdefault(solution.branch_tag.value, []).append((solution.lam, solution.norm_sq))
    folds = bvp.fold_points(branch)
    curves["fold"] = [(f.lam, f.norm_sq) for f in folds]
    return list(render_curve("mems-branch", curves, ctx.out_dir, "lambda", "norm_sq"))


RECIPES: Dict[str, Recipe] = {
    recipe.name: recipe
    for recipe in [
        Recipe("fig2", "root count in [-1, 1]", _sweep_recipe("roots", "0.01:1:20x20", ("RootsTwo", "RootsZero"))("fig2")),
        Recipe("fig3", "convexity", _sweep_recipe("convexity", "0.01:1:20x20")("fig3")),
        Recipe("fig4", "mixed partials", _sweep_recipe("partials", "0.01:1:20x20", ("PartialMinus", "PartialPlus"))("fig4")),
        Recipe(
            "fig6",
            "deterministic transcritical wedge",
            _sweep_recipe("tc", "0.02:0.3,0.005:0.6:20x20", ("CriticalTransition", "ExchangeOfStability"))("fig6"),
        ),
        Recipe("fig7", "Olsen oscillation types", _sweep_recipe("olsen", "0.02:0.1,1e-5:0.1:8x8")("fig7")),
        Recipe(
            "fig8",
            "escape from a confidence strip",
            _sweep_recipe("sfs", "0.001:0.3,0.005:1:10x10", ("Concentrated", "Escaping"), "explaw")("fig8"),
        ),
        Recipe(
            "fig9",
            "stochastic transcritical transition",
            _sweep_recipe("sde-tc", "0.001:0.1,0.001:1:10x10", ("NoTransition", "Transition"))("fig9"),
        ),
        Recipe(
            "fig10",
            "FitzHugh-Nagumo spiking regimes",
            _sweep_recipe("fhn", "0.005:0.1,0.0005:0.05:8x8", third=problems.FHN_EPS)("fig10"),
        ),
        Recipe("fig13", "shear-induced chaos threshold", _shear_curve),
        Recipe("fig14", "Hopf normal form with noise", _sweep_recipe("hopf", "0.05:2,0.01:2:6x6")("fig14")),
        Recipe("fig16", "linear switching stability", _pdmp_threshold),
        Recipe("fig18", "logistic switching boundedness", _sweep_recipe("pdmp-bdd", "0.01:1:20x20", ("Bounded", "Unbounded"))("fig18")),
        Recipe("fig20", "MEMS singular-solution regimes", _sweep_recipe("mems-ss", "0.001:0.5,0.01:2:20x20", ("IV", "I"))("fig20")),
        Recipe("mems-branch", "MEMS bifurcation diagram", _mems_diagram),
        Recipe("skt-plane", "SKT bifurcation counts", _sweep_recipe("skt", "1e-4:0.1:10x10")("skt-plane")),
    ]
}


def figures(
    subset: Sequence[str], out_dir: str, quick: bool = False, seed: int = 0, threads: int = 1
) -> int:
    """Runs the named recipes (or all of them); 2 if any recipe failed."""
    names = list(RECIPES) if not subset or "all" in subset else list(subset)
    unknown = [name for name in names if name not in RECIPES]
    if unknown:
        raise DlimitInputError(f"unknown recipe(s) {', '.join(unknown)}, expected one of {', '.join(RECIPES)}")
    ctx = RunContext(out_dir, quick, seed, threads)
    os.makedirs(out_dir, exist_ok=True)
    manifest: Dict[str, Dict[str, object]] = {}
    failed = 0
    for name in names:
        recipe = RECIPES[name]
        log.info("recipe %s (%s)", name, recipe.target)
        try:
            files = recipe.run(ctx)
        except (DlimitError, ValueError, ArithmeticError) as err:
            failed += 1
            reason = err.reason if isinstance(err, DlimitError) else str(err)
            log.error("recipe %s failed: %s: %s", name, type(err).__name__, reason)
            manifest[name] = {"target": recipe.target, "status": f"failed: {type(err).__name__}", "files": []}
            continue
        manifest[name] = {
            "target": recipe.target,
            "status": "ok",
            "files": [os.path.relpath(f, out_dir) for f in files],
        }
    with open(os.path.join(out_dir, "manifest.yaml"), "w", encoding="utf-8") as stream:
        yaml.safe_dump({"quick": quick, "seed": seed, "recipes": manifest}, stream, sort_keys=False)
    if failed:
        log.error("%d of %d recipes failed", failed, len(names))
        return 2
    return 0
