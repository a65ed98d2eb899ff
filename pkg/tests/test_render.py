import os
import xml.etree.ElementTree as ET

from dlimit import problems, render
from dlimit.sweep import AMBIGUOUS, NOT_DEFINED, GridSpec, PowerLawFit, sweep

SVG_NS = "{http://www.w3.org/2000/svg}"


def group_ids(svg_path):
    tree = ET.parse(svg_path)
    return [g.get("id") for g in tree.iter(f"{SVG_NS}g") if g.get("id")]


def roots_diagram():
    return sweep(problems.get_problem("roots"), GridSpec.parse("0.01:1:6x5"))


class TestRender:
    def test_writes_csv_and_svg(self, tmp_path):
        csv_path, svg_path = render.render(roots_diagram(), [], str(tmp_path))
        with open(csv_path, encoding="utf-8") as stream:
            assert len(stream.read().splitlines()) == 6 * 5 + 1
        assert os.path.exists(svg_path)
        assert os.path.exists(os.path.join(str(tmp_path), "roots.yaml"))

    def test_one_group_per_label(self, tmp_path):
        diagram = roots_diagram()
        _, svg_path = render.render(diagram, [], str(tmp_path))
        ids = group_ids(svg_path)
        for label in diagram.distinct_labels():
            assert ids.count(f"region-{label}") == 1

    def test_undefined_axes_are_marked(self, tmp_path):
        diagram = sweep(problems.get_problem("pdmp-bdd"), GridSpec.parse("0.01:1:4x4"))
        _, svg_path = render.render(diagram, [], str(tmp_path))
        ids = group_ids(svg_path)
        assert "axis-second=0-not-defined" in ids
        assert "axis-eps=0-not-defined" in ids

    def test_defined_axes_are_solid(self, tmp_path):
        _, svg_path = render.render(roots_diagram(), [], str(tmp_path))
        ids = group_ids(svg_path)
        assert not any(i.startswith("axis-") for i in ids)

    def test_fit_curves(self, tmp_path):
        diagram = roots_diagram()
        _, bare = render.render(diagram, [], str(tmp_path / "bare"))
        assert "fit-0" not in group_ids(bare)
        fit = PowerLawFit(kappa=1.0, p=1.0, residual=0.0, support=5)
        _, fitted = render.render(diagram, [fit], str(tmp_path / "fitted"))
        assert "fit-0" in group_ids(fitted)

    def test_rerender_is_byte_identical(self, tmp_path):
        diagram = roots_diagram()
        _, first = render.render(diagram, [], str(tmp_path / "a"))
        _, second = render.render(diagram, [], str(tmp_path / "b"))
        with open(first, "rb") as one, open(second, "rb") as two:
            assert one.read() == two.read()


def test_render_curve(tmp_path):
    csv_path, svg_path = render.render_curve(
        "curve",
        {"sigma0": [(1.0, 2.0), (2.0, 5.0)]},
        str(tmp_path),
        "alpha",
        "sigma",
        annotations={"Negative": (1.5, 1.0)},
    )
    with open(csv_path, encoding="utf-8") as stream:
        lines = stream.read().splitlines()
    assert lines[0] == "curve,alpha,sigma"
    assert lines[1] == "sigma0,1,2"
    ids = group_ids(svg_path)
    assert "curve-sigma0" in ids
    assert "region-Negative" in ids


def test_label_colors():
    colors = render.label_colors(["A", AMBIGUOUS, "B", NOT_DEFINED])
    assert colors[AMBIGUOUS] == "#bdbdbd"
    assert colors[NOT_DEFINED] == "#ffffff"
    assert colors["A"] != colors["B"]
    assert render.label_colors(["A", "B"]) == {k: colors[k] for k in ("A", "B")}
