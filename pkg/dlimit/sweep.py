"""
Parameter-plane sweeps: evaluate a property on a grid over the positive
quadrant, extract region boundaries and fit scaling laws to them.
"""
import concurrent.futures
import dataclasses
import hashlib
import logging as log
import math
import os
import re
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml
from scipy import stats

from .kernel import (
    Axis,
    DlimitError,
    DlimitInputError,
    FloatArray,
    ParamPoint,
    derive_seed,
    fmt_float,
)

NOT_DEFINED = "NotDefined"
AMBIGUOUS = "Ambiguous"

Evaluate = Callable[[ParamPoint, int], str]


class NoBoundary(DlimitError):
    pass


class Degenerate(DlimitError):
    pass


@dataclasses.dataclass(frozen=True)
class PropertyEvaluator:
    name: str
    label_set: Tuple[str, ...]
    evaluate: Evaluate
    axis_rules: Dict[Axis, str] = dataclasses.field(default_factory=dict)
    stochastic: bool = False
    second_name: str = "delta"
    first_name: str = "eps"

    def axis_label(self, axis: Axis) -> str:
        return self.axis_rules.get(axis, NOT_DEFINED)

    def check(self, label: str) -> str:
        if label not in self.label_set and label not in (NOT_DEFINED, AMBIGUOUS):
            raise ValueError(f"{self.name} returned {label!r}, not in {self.label_set}")
        return label


@dataclasses.dataclass(frozen=True)
class GridSpec:
    eps_range: Tuple[float, float]
    second_range: Tuple[float, float]
    nx: int
    ny: int
    log_spacing: bool = True

    def __post_init__(self) -> None:
        for lo, hi in (self.eps_range, self.second_range):
            if not 0 < lo < hi:
                raise DlimitInputError(f"grid range ({lo}, {hi}) must be positive and ordered")
        if self.nx < 2 or self.ny < 2:
            raise DlimitInputError("grids need at least 2 points per axis")

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """`lo:hi:NXxNY` (same range on both axes) or `elo:ehi,slo:shi:NXxNY`."""
        match = re.fullmatch(
            r"([\d.eE+-]+):([\d.eE+-]+)(?:,([\d.eE+-]+):([\d.eE+-]+))?:(\d+)x(\d+)", text.strip()
        )
        if not match:
            raise DlimitInputError(f"invalid grid {text!r}, expected e.g. 0.01:1:20x20")
        e_lo, e_hi, s_lo, s_hi, nx, ny = match.groups()
        eps_range = (float(e_lo), float(e_hi))
        second = (float(s_lo), float(s_hi)) if s_lo is not None else eps_range
        return cls(eps_range, second, int(nx), int(ny))

    def axis(self, lo_hi: Tuple[float, float], n: int) -> FloatArray:
        lo, hi = lo_hi
        if self.log_spacing:
            return np.geomspace(lo, hi, n)  # type: ignore[no-any-return]
        return np.linspace(lo, hi, n)  # type: ignore[no-any-return]

    @property
    def eps(self) -> FloatArray:
        return self.axis(self.eps_range, self.nx)

    @property
    def second(self) -> FloatArray:
        return self.axis(self.second_range, self.ny)

    def scaled(self, factor: float) -> "GridSpec":
        return dataclasses.replace(
            self, nx=max(2, int(round(self.nx * factor))), ny=max(2, int(round(self.ny * factor)))
        )


@dataclasses.dataclass(frozen=True)
class PowerLawFit:
    kappa: float
    p: float
    residual: float
    support: int
    p_stderr: float = math.nan
    model: str = "powerlaw"

    @property
    def low_support(self) -> bool:
        return self.support < 5

    def __call__(self, eps: FloatArray) -> FloatArray:
        return self.kappa * np.asarray(eps, dtype=float) ** self.p  # type: ignore[no-any-return]

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class ExpLawFit:
    """log eps = c - H / (2 sigma^2)."""

    c: float
    big_h: float
    residual: float
    support: int
    model: str = "explaw"

    @property
    def low_support(self) -> bool:
        return self.support < 5

    def eps_of(self, sigma: FloatArray) -> FloatArray:
        return np.exp(self.c - self.big_h / (2 * np.asarray(sigma) ** 2))  # type: ignore[no-any-return]

    def __call__(self, eps: FloatArray) -> FloatArray:
        """sigma on the curve as a function of eps."""
        return np.sqrt(self.big_h / (2 * (self.c - np.log(np.asarray(eps, dtype=float)))))  # type: ignore[no-any-return]

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


Fit = Any  # PowerLawFit or ExpLawFit


@dataclasses.dataclass(frozen=True)
class ClassificationDiagram:
    """labels[j][i] belongs to (eps[i], second[j])."""

    name: str
    eps: Tuple[float, ...]
    second: Tuple[float, ...]
    labels: Tuple[Tuple[str, ...], ...]
    axis_labels: Dict[str, str] = dataclasses.field(default_factory=dict)
    fits: Tuple[Fit, ...] = ()
    meta: Dict[str, Any] = dataclasses.field(default_factory=dict)
    second_name: str = "delta"
    first_name: str = "eps"

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.second) or any(len(row) != len(self.eps) for row in self.labels):
            raise ValueError("labels do not match the grid")

    @property
    def label_matrix(self) -> np.ndarray:  # type: ignore[type-arg]
        return np.array(self.labels, dtype=object)

    def distinct_labels(self) -> List[str]:
        return sorted({label for row in self.labels for label in row})

    def with_fits(self, fits: Sequence[Fit]) -> "ClassificationDiagram":
        return dataclasses.replace(self, fits=tuple(fits))

    def rows(self) -> List[Tuple[float, float, str]]:
        return [
            (e, s, self.labels[j][i])
            for j, s in enumerate(self.second)
            for i, e in enumerate(self.eps)
        ]

    def save(self, directory: str) -> Tuple[str, str]:
        os.makedirs(directory, exist_ok=True)
        csv_path = os.path.join(directory, f"{self.name}.csv")
        with open(csv_path, "w", encoding="utf-8") as stream:
            stream.write(f"{self.first_name},{self.second_name},label\n")
            for e, s, label in self.rows():
                stream.write(f"{fmt_float(e)},{fmt_float(s)},{label}\n")
        meta_path = os.path.join(directory, f"{self.name}.yaml")
        document = {
            "name": self.name,
            "second_name": self.second_name,
            "first_name": self.first_name,
            "eps": [fmt_float(e) for e in self.eps],
            "second": [fmt_float(s) for s in self.second],
            "axis_labels": dict(self.axis_labels),
            "fits": [fit.to_dict() for fit in self.fits],
            "meta": dict(self.meta),
        }
        with open(meta_path, "w", encoding="utf-8") as stream:
            yaml.safe_dump(document, stream, sort_keys=True)
        return csv_path, meta_path

    @classmethod
    def load(cls, directory: str, name: str) -> "ClassificationDiagram":
        with open(os.path.join(directory, f"{name}.yaml"), encoding="utf-8") as stream:
            document = yaml.safe_load(stream)
        eps = tuple(float(e) for e in document["eps"])
        second = tuple(float(s) for s in document["second"])
        table: Dict[Tuple[str, str], str] = {}
        with open(os.path.join(directory, f"{name}.csv"), encoding="utf-8") as stream:
            next(stream)
            for line in stream:
                e, s, label = line.rstrip("\n").split(",")
                table[(e, s)] = label
        labels = tuple(
            tuple(table[(fmt_float(e), fmt_float(s))] for e in eps) for s in second
        )
        fits = tuple(_fit_from_dict(d) for d in document.get("fits", []))
        return cls(
            name=document["name"],
            eps=eps,
            second=second,
            labels=labels,
            axis_labels=document.get("axis_labels", {}),
            fits=fits,
            meta=document.get("meta", {}),
            second_name=document.get("second_name", "delta"),
            first_name=document.get("first_name", "eps"),
        )


def _fit_from_dict(data: Dict[str, Any]) -> Fit:
    if data.get("model") == "explaw":
        return ExpLawFit(**data)
    return PowerLawFit(**data)


def config_hash(payload: Dict[str, Any]) -> str:
    text = yaml.safe_dump(payload, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _evaluate_point(evaluator: PropertyEvaluator, point: ParamPoint, seed: int) -> str:
    try:
        return evaluator.check(evaluator.evaluate(point, seed))
    except (DlimitError, ValueError, ArithmeticError) as err:
        reason = err.reason if isinstance(err, DlimitError) else str(err)
        log.warning(
            "%s at (%.6g, %.6g) is Ambiguous: %s: %s",
            evaluator.name,
            point.eps,
            point.second,
            type(err).__name__,
            reason,
        )
        return AMBIGUOUS


def sweep(
    evaluator: PropertyEvaluator,
    grid: GridSpec,
    base_seed: int = 0,
    parallelism: int = 1,
    third: Optional[float] = None,
) -> ClassificationDiagram:
    eps_axis = grid.eps
    second_axis = grid.second
    jobs = [
        (ParamPoint(float(e), float(s), third), derive_seed(base_seed, j * grid.nx + i))
        for j, s in enumerate(second_axis)
        for i, e in enumerate(eps_axis)
    ]
    if parallelism > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=parallelism) as pool:
            flat = list(pool.map(lambda job: _evaluate_point(evaluator, *job), jobs))
    else:
        flat = [_evaluate_point(evaluator, point, seed) for point, seed in jobs]
    labels = tuple(
        tuple(flat[j * grid.nx : (j + 1) * grid.nx]) for j in range(grid.ny)
    )
    log.info("swept %s over %dx%d points", evaluator.name, grid.nx, grid.ny)
    payload = {
        "problem": evaluator.name,
        "eps_range": list(grid.eps_range),
        "second_range": list(grid.second_range),
        "nx": grid.nx,
        "ny": grid.ny,
        "log_spacing": grid.log_spacing,
        "base_seed": base_seed,
        "third": third,
    }
    return ClassificationDiagram(
        name=evaluator.name,
        eps=tuple(float(e) for e in eps_axis),
        second=tuple(float(s) for s in second_axis),
        labels=labels,
        axis_labels={axis.value: evaluator.check(evaluator.axis_label(axis)) for axis in Axis},
        meta={**payload, "config_hash": config_hash(payload), "stochastic": evaluator.stochastic},
        second_name=evaluator.second_name,
        first_name=evaluator.first_name,
    )


def extract_boundary(
    diagram: ClassificationDiagram, label_a: str, label_b: str
) -> List[Tuple[float, float]]:
    """Per eps column, the geometric mean of the last `label_a` cell and the next `label_b` cell."""
    present = diagram.distinct_labels()
    for label in (label_a, label_b):
        if label not in present:
            raise NoBoundary(f"label {label!r} does not occur in {diagram.name}")
    points: List[Tuple[float, float]] = []
    for i, eps in enumerate(diagram.eps):
        column = [(diagram.second[j], diagram.labels[j][i]) for j in range(len(diagram.second))]
        column = [(s, label) for s, label in column if label != AMBIGUOUS]
        for (s_a, l_a), (s_b, l_b) in zip(column, column[1:]):
            if l_a == label_a and l_b == label_b:
                points.append((eps, math.sqrt(s_a * s_b)))
                break
    if not points:
        raise NoBoundary(f"no {label_a}/{label_b} transition in {diagram.name}")
    return points


def _log_points(points: Sequence[Tuple[float, float]]) -> Tuple[FloatArray, FloatArray]:
    if len(points) < 3:
        raise Degenerate(f"need at least 3 points, got {len(points)}")
    xs = np.array([p[0] for p in points], dtype=float)
    ys = np.array([p[1] for p in points], dtype=float)
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise Degenerate("points must be positive")
    if np.ptp(xs) == 0:
        raise Degenerate("all points share one eps value")
    return xs, ys


def fit_power_law(points: Sequence[Tuple[float, float]]) -> PowerLawFit:
    """Least squares for log second = log kappa + p log eps."""
    xs, ys = _log_points(points)
    fit = stats.linregress(np.log(xs), np.log(ys))
    predicted = fit.intercept + fit.slope * np.log(xs)
    residual = float(np.sqrt(np.mean((np.log(ys) - predicted) ** 2)))
    result = PowerLawFit(
        kappa=float(math.exp(fit.intercept)),
        p=float(fit.slope),
        residual=residual,
        support=len(points),
        p_stderr=float(fit.stderr),
    )
    if result.low_support:
        log.warning("power-law fit on %d points is LowSupport", result.support)
    return result


def fit_exp_law(points: Sequence[Tuple[float, float]]) -> ExpLawFit:
    """Least squares for log eps = c - H / (2 sigma^2) on (eps, sigma) points."""
    xs, ys = _log_points(points)
    inv = 1 / (2 * ys**2)
    if np.ptp(inv) == 0:
        raise Degenerate("all points share one sigma value")
    fit = stats.linregress(inv, np.log(xs))
    predicted = fit.intercept + fit.slope * inv
    residual = float(np.sqrt(np.mean((np.log(xs) - predicted) ** 2)))
    return ExpLawFit(c=float(fit.intercept), big_h=float(-fit.slope), residual=residual, support=len(points))
