"""
Writes classification diagrams as long-form CSV plus a YAML sidecar and as SVG.

The SVG carries one `<g id="region-<label>">` group per label; axes on which the
property is not defined are drawn dashed.
"""
import logging as log
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import matplotlib
import numpy as np
from matplotlib import colors as mcolors
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.collections import PatchCollection
from matplotlib.figure import Figure
from matplotlib.patches import Patch, Rectangle

from .kernel import Axis, FloatArray, fmt_float
from .sweep import AMBIGUOUS, NOT_DEFINED, ClassificationDiagram, Fit

_SVG_RC = {"svg.hashsalt": "dlimit", "svg.fonttype": "none", "path.simplify": False}

_FIXED_COLORS = {AMBIGUOUS: "#bdbdbd", NOT_DEFINED: "#ffffff"}


def _cell_edges(centers: Sequence[float]) -> FloatArray:
    """Edges halfway (geometrically) between neighbouring centers."""
    c = np.asarray(centers, dtype=float)
    mids = np.sqrt(c[:-1] * c[1:])
    first = c[0] ** 2 / mids[0]
    last = c[-1] ** 2 / mids[-1]
    return np.concatenate([[first], mids, [last]])  # type: ignore[no-any-return]


def label_colors(labels: Sequence[str]) -> Dict[str, str]:
    cmap = matplotlib.colormaps["tab10"]
    ordinary = [label for label in labels if label not in _FIXED_COLORS]
    colors = {label: mcolors.to_hex(cmap(i % 10)) for i, label in enumerate(ordinary)}
    colors.update({label: _FIXED_COLORS[label] for label in labels if label in _FIXED_COLORS})
    return colors


def _region_collections(diagram: ClassificationDiagram) -> List[PatchCollection]:
    x_edges = _cell_edges(diagram.eps)
    y_edges = _cell_edges(diagram.second)
    colors = label_colors(diagram.distinct_labels())
    cells: Dict[str, List[Rectangle]] = {label: [] for label in colors}
    for j, row in enumerate(diagram.labels):
        for i, label in enumerate(row):
            cells[label].append(
                Rectangle(
                    (x_edges[i], y_edges[j]),
                    x_edges[i + 1] - x_edges[i],
                    y_edges[j + 1] - y_edges[j],
                )
            )
    collections = []
    for label, patches in cells.items():
        collection = PatchCollection(
            patches, facecolor=colors[label], edgecolor="none", label=label
        )
        collection.set_gid(f"region-{label}")
        collections.append(collection)
    return collections


def _curve_label(fit: Fit) -> str:
    if fit.model == "explaw":
        return f"log eps = {fit.c:.3g} - {fit.big_h:.3g}/(2 s^2)"
    return f"{fit.kappa:.3g} eps^{fit.p:.3f}"


def render_svg(
    diagram: ClassificationDiagram,
    fits: Sequence[Fit],
    svg_path: str,
    boundary: Optional[Sequence[Tuple[float, float]]] = None,
) -> str:
    with matplotlib.rc_context(_SVG_RC):
        figure = Figure(figsize=(6, 5))
        FigureCanvasSVG(figure)
        axes = figure.add_subplot(1, 1, 1)
        axes.set_xscale("log")
        axes.set_yscale("log")
        handles: List[Any] = []
        for collection in _region_collections(diagram):
            axes.add_collection(collection)
            handles.append(
                Patch(facecolor=collection.get_facecolor()[0], edgecolor="grey", label=collection.get_label())
            )
        eps = np.geomspace(diagram.eps[0], diagram.eps[-1], 200)
        for index, fit in enumerate(fits):
            with np.errstate(invalid="ignore", divide="ignore"):
                curve = fit(eps)
            handles.extend(
                axes.plot(eps, curve, color="black", linewidth=1.5, label=_curve_label(fit), gid=f"fit-{index}")
            )
        if boundary:
            bx, by = zip(*boundary)
            axes.plot(bx, by, "k.", markersize=3, gid="boundary")
        x_edges = _cell_edges(diagram.eps)
        y_edges = _cell_edges(diagram.second)
        axes.set_xlim(x_edges[0], x_edges[-1])
        axes.set_ylim(y_edges[0], y_edges[-1])
        axes.set_xlabel(diagram.first_name)
        axes.set_ylabel(diagram.second_name)
        axes.set_title(diagram.name)
        # the bottom spine stands for second = 0, the left one for eps = 0
        for spine, axis in (("bottom", Axis.SECOND_ZERO), ("left", Axis.EPS_ZERO)):
            label = diagram.axis_labels.get(axis.value, NOT_DEFINED)
            if label == NOT_DEFINED:
                axes.spines[spine].set_linestyle("--")
                axes.spines[spine].set_gid(f"axis-{axis.value}-not-defined")
        origin = diagram.axis_labels.get(Axis.ORIGIN.value, NOT_DEFINED)
        axes.annotate(f"origin: {origin}", xy=(0.01, 0.01), xycoords="axes fraction", fontsize=7)
        axes.legend(handles=handles, loc="upper left", fontsize=7, frameon=True)
        figure.savefig(svg_path, format="svg", metadata={"Date": None})
    return svg_path


def render(
    diagram: ClassificationDiagram,
    fits: Sequence[Fit],
    path: str,
    boundary: Optional[Sequence[Tuple[float, float]]] = None,
) -> Tuple[str, str]:
    """Writes `<name>.csv`, `<name>.yaml` and `<name>.svg` into directory `path`."""
    os.makedirs(path, exist_ok=True)
    stored = diagram.with_fits(fits) if fits else diagram
    csv_path, _ = stored.save(path)
    svg_path = render_svg(stored, stored.fits, os.path.join(path, f"{diagram.name}.svg"), boundary)
    log.info("wrote %s and %s", csv_path, svg_path)
    return csv_path, svg_path


def render_curve(
    name: str,
    curves: Dict[str, Sequence[Tuple[float, float]]],
    path: str,
    x_label: str,
    y_label: str,
    annotations: Optional[Dict[str, Tuple[float, float]]] = None,
) -> Tuple[str, str]:
    """Line plot of named point sets, with optional text labels placed at (x, y)."""
    os.makedirs(path, exist_ok=True)
    csv_path = os.path.join(path, f"{name}.csv")
    with open(csv_path, "w", encoding="utf-8") as stream:
        stream.write(f"curve,{x_label},{y_label}\n")
        for curve, points in curves.items():
            for x, y in points:
                stream.write(f"{curve},{fmt_float(x)},{fmt_float(y)}\n")
    svg_path = os.path.join(path, f"{name}.svg")
    with matplotlib.rc_context(_SVG_RC):
        figure = Figure(figsize=(6, 5))
        FigureCanvasSVG(figure)
        axes = figure.add_subplot(1, 1, 1)
        for label, (x, y) in (annotations or {}).items():
            axes.text(x, y, label, ha="center", gid=f"region-{label}")
        for curve, points in curves.items():
            if points:
                xs, ys = zip(*points)
                axes.plot(xs, ys, marker=".", label=curve, gid=f"curve-{curve}")
        axes.set_xlabel(x_label)
        axes.set_ylabel(y_label)
        axes.set_title(name)
        axes.legend(fontsize=7)
        figure.savefig(svg_path, format="svg", metadata={"Date": None})
    return csv_path, svg_path
