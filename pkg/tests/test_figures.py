import math
import os
from unittest import mock

import pytest
import yaml

from dlimit import figures, problems, shear
from dlimit.kernel import DlimitError, DlimitInputError
from dlimit.sweep import GridSpec, extract_boundary, sweep


def read_manifest(out_dir):
    with open(os.path.join(out_dir, "manifest.yaml"), encoding="utf-8") as stream:
        return yaml.safe_load(stream)


class TestFigures:
    def test_quick_subset(self, tmp_path):
        out_dir = str(tmp_path)
        assert figures.figures(["fig2", "fig18"], out_dir, quick=True) == 0
        manifest = read_manifest(out_dir)
        assert manifest["quick"] is True
        assert list(manifest["recipes"]) == ["fig2", "fig18"]
        for entry in manifest["recipes"].values():
            assert entry["status"] == "ok"
            assert entry["files"]
            for name in entry["files"]:
                assert os.path.exists(os.path.join(out_dir, name))

    def test_quick_grid_is_smaller(self, tmp_path):
        figures.figures(["fig18"], str(tmp_path), quick=True)
        with open(os.path.join(str(tmp_path), "fig18.csv"), encoding="utf-8") as stream:
            assert len(stream.read().splitlines()) == 6 * 6 + 1

    def test_unknown_recipe(self, tmp_path):
        with pytest.raises(DlimitInputError) as info:
            figures.figures(["fig99"], str(tmp_path))
        assert "fig99" in info.value.reason

    def test_failing_recipe_is_recorded(self, tmp_path):
        def boom(_ctx):
            raise DlimitError("no convergence")

        broken = figures.Recipe("boom", "always fails", boom)
        with mock.patch.dict(figures.RECIPES, {"boom": broken}):
            assert figures.figures(["fig3", "boom"], str(tmp_path), quick=True) == 2
        recipes = read_manifest(str(tmp_path))["recipes"]
        assert recipes["fig3"]["status"] == "ok"
        assert recipes["boom"]["status"] == "failed: DlimitError"
        assert recipes["boom"]["files"] == []

    def test_unknown_fit_model(self):
        with pytest.raises(DlimitInputError):
            figures.fit_boundary([(0.1, 0.1), (0.2, 0.2), (0.4, 0.4)], "cubic")


@pytest.mark.slow
def test_shear_threshold_scaling():
    grid = GridSpec.parse("0.1:10,0.01:200:24x160")
    diagram = sweep(problems.get_problem("shear"), grid)
    fit = figures.fit_boundary(extract_boundary(diagram, "Negative", "Positive"), "powerlaw")
    assert fit.p == pytest.approx(1.5, abs=0.05)
    assert fit.kappa == pytest.approx(1 / math.sqrt(shear.compute_c0()), rel=0.02)
