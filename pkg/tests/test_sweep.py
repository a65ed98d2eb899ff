import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dlimit import problems
from dlimit.kernel import Axis, DlimitError, DlimitInputError, derive_seed, make_rng
from dlimit.sweep import (
    AMBIGUOUS,
    NOT_DEFINED,
    ClassificationDiagram,
    Degenerate,
    ExpLawFit,
    GridSpec,
    NoBoundary,
    PowerLawFit,
    PropertyEvaluator,
    extract_boundary,
    fit_exp_law,
    fit_power_law,
    sweep,
)


def square_evaluator():
    return problems.get_problem("synthetic-square")


def coin_evaluator():
    return PropertyEvaluator(
        name="coin",
        label_set=("Heads", "Tails"),
        evaluate=lambda p, seed: "Heads" if make_rng(seed).random() < 0.5 else "Tails",
        stochastic=True,
    )


class TestGridSpec:
    def test_parse_square(self):
        grid = GridSpec.parse("0.01:1:20x10")
        assert grid.eps_range == grid.second_range == (0.01, 1.0)
        assert (grid.nx, grid.ny) == (20, 10)
        assert grid.eps[0] == pytest.approx(0.01)
        assert grid.eps[-1] == pytest.approx(1.0)
        assert len(grid.second) == 10

    def test_parse_two_ranges(self):
        grid = GridSpec.parse("1e-3:0.1,0.5:2:4x5")
        assert grid.eps_range == (1e-3, 0.1)
        assert grid.second_range == (0.5, 2.0)

    @pytest.mark.parametrize("text", ["", "0.01:1", "a:b:2x2", "0.01:1:20"])
    def test_parse_rejects(self, text):
        with pytest.raises(DlimitInputError):
            GridSpec.parse(text)

    @pytest.mark.parametrize("text", ["0:1:20x20", "1:0.1:20x20", "0.01:1:1x20"])
    def test_invalid_grid(self, text):
        with pytest.raises(DlimitInputError):
            GridSpec.parse(text)

    def test_log_spacing(self):
        grid = GridSpec.parse("0.01:1:3x3")
        np.testing.assert_allclose(grid.eps, [0.01, 0.1, 1.0])

    def test_scaled(self):
        grid = GridSpec.parse("0.01:1:20x20").scaled(0.32)
        assert (grid.nx, grid.ny) == (6, 6)
        assert GridSpec.parse("0.01:1:3x3").scaled(0.1).nx == 2


class TestSweep:
    def test_root_count_splits_on_the_diagonal(self):
        diagram = sweep(problems.get_problem("roots"), GridSpec.parse("0.01:1:20x20"))
        for eps, delta, label in diagram.rows():
            expected = "RootsTwo" if Fraction(delta) <= Fraction(eps) else "RootsZero"
            assert label == expected
        assert diagram.label_matrix.shape == (20, 20)

    def test_convexity_is_one_region(self):
        diagram = sweep(problems.get_problem("convexity"), GridSpec.parse("0.01:1:10x10"))
        assert diagram.distinct_labels() == ["ConvexAlways"]
        assert diagram.axis_labels[Axis.ORIGIN.value] == "ConvexAlways"

    def test_boundedness_splits_on_the_diagonal(self):
        diagram = sweep(problems.get_problem("pdmp-bdd"), GridSpec.parse("0.01:1:20x20"))
        for eps, delta, label in diagram.rows():
            assert label == ("Bounded" if delta <= eps else "Unbounded")

    def test_per_point_seeds(self):
        seen = {}

        def record(point, seed):
            seen[(point.eps, point.second)] = seed
            return "Heads"

        evaluator = PropertyEvaluator("record", ("Heads",), record)
        grid = GridSpec.parse("0.1:1:3x2")
        sweep(evaluator, grid, base_seed=42)
        for j, second in enumerate(grid.second):
            for i, eps in enumerate(grid.eps):
                assert seen[(float(eps), float(second))] == derive_seed(42, j * 3 + i)

    def test_scheduling_invariance(self):
        grid = GridSpec.parse("0.01:1:12x12")
        serial = sweep(coin_evaluator(), grid, base_seed=7, parallelism=1)
        parallel = sweep(coin_evaluator(), grid, base_seed=7, parallelism=4)
        assert serial.labels == parallel.labels
        assert len(serial.distinct_labels()) == 2

    def test_errors_become_ambiguous(self, caplog):
        def explode(point, _seed):
            if point.eps > 0.5:
                raise DlimitError("no convergence")
            return "Fine"

        diagram = sweep(PropertyEvaluator("explode", ("Fine",), explode), GridSpec.parse("0.1:1:4x2"))
        assert diagram.labels[0][-1] == AMBIGUOUS
        assert diagram.labels[0][0] == "Fine"
        assert "no convergence" in caplog.text

    def test_labels_outside_the_set_are_ambiguous(self):
        evaluator = PropertyEvaluator("rogue", ("Fine",), lambda p, s: "Rogue")
        diagram = sweep(evaluator, GridSpec.parse("0.1:1:2x2"))
        assert diagram.distinct_labels() == [AMBIGUOUS]

    def test_axis_rules_must_use_known_labels(self):
        evaluator = PropertyEvaluator("rogue-axis", ("Fine",), lambda p, s: "Fine", axis_rules={Axis.ORIGIN: "Other"})
        with pytest.raises(ValueError):
            sweep(evaluator, GridSpec.parse("0.1:1:2x2"))

    def test_meta(self):
        grid = GridSpec.parse("0.1:1:2x2")
        first = sweep(coin_evaluator(), grid, base_seed=1)
        again = sweep(coin_evaluator(), grid, base_seed=1)
        other = sweep(coin_evaluator(), grid, base_seed=2)
        assert first.meta["config_hash"] == again.meta["config_hash"]
        assert first.meta["config_hash"] != other.meta["config_hash"]
        assert first.meta["stochastic"] is True
        assert first.axis_labels[Axis.EPS_ZERO.value] == NOT_DEFINED


class TestBoundary:
    def test_square_boundary_within_one_cell(self):
        grid = GridSpec.parse("0.01:1,1e-4:1:30x40")
        diagram = sweep(square_evaluator(), grid)
        ratio = grid.second[1] / grid.second[0]
        points = extract_boundary(diagram, "Below", "Above")
        assert len(points) >= 20
        for eps, delta in points:
            assert abs(math.log(delta / eps**2)) <= math.log(ratio)

    def test_root_boundary_within_one_cell(self):
        grid = GridSpec.parse("0.01:1:20x20")
        diagram = sweep(problems.get_problem("roots"), grid)
        ratio = grid.second[1] / grid.second[0]
        for eps, delta in extract_boundary(diagram, "RootsTwo", "RootsZero"):
            assert abs(math.log(delta / eps)) <= math.log(ratio)

    def test_missing_label(self):
        diagram = sweep(problems.get_problem("convexity"), GridSpec.parse("0.1:1:3x3"))
        with pytest.raises(NoBoundary):
            extract_boundary(diagram, "ConvexAlways", "Other")

    def test_no_transition(self):
        diagram = ClassificationDiagram(
            "flat", (0.1, 1.0), (0.1, 1.0), (("B", "B"), ("A", "A"))
        )
        with pytest.raises(NoBoundary):
            extract_boundary(diagram, "A", "B")

    def test_ambiguous_cells_are_skipped(self):
        diagram = ClassificationDiagram(
            "gap",
            (0.1,),
            (0.1, 0.2, 0.4, 0.8),
            (("A",), ("A",), (AMBIGUOUS,), ("B",)),
        )
        [(eps, delta)] = extract_boundary(diagram, "A", "B")
        assert eps == 0.1
        assert delta == pytest.approx(math.sqrt(0.2 * 0.8))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ClassificationDiagram("bad", (0.1, 0.2), (0.1,), (("A",),))


class TestFits:
    def test_square_fit(self):
        diagram = sweep(square_evaluator(), GridSpec.parse("0.01:1,1e-4:1:30x40"))
        fit = fit_power_law(extract_boundary(diagram, "Below", "Above"))
        assert fit.p == pytest.approx(2.0, abs=0.05)
        assert not fit.low_support

    def test_square_fit_on_a_finer_grid(self):
        coarse = sweep(square_evaluator(), GridSpec.parse("0.01:1,1e-4:1:30x40"))
        fine = sweep(square_evaluator(), GridSpec.parse("0.01:1,1e-4:1:60x80"))
        p_coarse = fit_power_law(extract_boundary(coarse, "Below", "Above")).p
        p_fine = fit_power_law(extract_boundary(fine, "Below", "Above")).p
        assert p_fine == pytest.approx(2.0, abs=0.05)
        assert abs(p_fine - p_coarse) < 0.05

    @given(
        st.floats(min_value=0.1, max_value=10.0),
        st.floats(min_value=-3.0, max_value=3.0),
    )
    def test_exact_power_laws_are_recovered(self, kappa, p):
        points = [(eps, kappa * eps**p) for eps in (0.01, 0.02, 0.05, 0.1, 0.2, 0.5)]
        fit = fit_power_law(points)
        assert fit.kappa == pytest.approx(kappa, rel=1e-6)
        assert fit.p == pytest.approx(p, abs=1e-6)
        assert fit.residual < 1e-6

    def test_low_support(self, caplog):
        fit = fit_power_law([(0.1, 0.01), (0.2, 0.04), (0.4, 0.16)])
        assert fit.low_support
        assert "LowSupport" in caplog.text

    @pytest.mark.parametrize(
        "points",
        [
            [(0.1, 0.1), (0.2, 0.2)],
            [(0.1, 0.1), (0.1, 0.2), (0.1, 0.3)],
            [(0.1, 0.1), (0.2, -0.2), (0.3, 0.3)],
        ],
    )
    def test_degenerate(self, points):
        with pytest.raises(Degenerate):
            fit_power_law(points)

    def test_power_law_curve(self):
        fit = PowerLawFit(kappa=2.0, p=0.5, residual=0.0, support=5)
        assert fit(np.array([4.0]))[0] == pytest.approx(4.0)

    def test_exp_law(self):
        c, big_h = 1.0, 0.3
        sigmas = [0.2, 0.25, 0.3, 0.4, 0.5, 0.7]
        points = [(math.exp(c - big_h / (2 * s * s)), s) for s in sigmas]
        fit = fit_exp_law(points)
        assert fit.c == pytest.approx(c, abs=1e-8)
        assert fit.big_h == pytest.approx(big_h, rel=1e-8)
        assert fit(np.array([points[2][0]]))[0] == pytest.approx(0.3, rel=1e-8)
        assert fit.eps_of(np.array([0.3]))[0] == pytest.approx(points[2][0], rel=1e-8)

    def test_exp_law_needs_distinct_sigmas(self):
        with pytest.raises(Degenerate):
            fit_exp_law([(0.1, 0.2), (0.2, 0.2), (0.3, 0.2)])


class TestPersistence:
    def test_save_load(self, tmp_path):
        diagram = sweep(problems.get_problem("roots"), GridSpec.parse("0.01:1:5x4"), base_seed=3)
        fit = fit_power_law(extract_boundary(diagram, "RootsTwo", "RootsZero"))
        stored = diagram.with_fits([fit, ExpLawFit(c=0.5, big_h=0.2, residual=0.1, support=3)])
        stored.save(str(tmp_path))
        loaded = ClassificationDiagram.load(str(tmp_path), "roots")
        assert loaded == stored

    def test_csv_is_long_form(self, tmp_path):
        diagram = sweep(problems.get_problem("roots"), GridSpec.parse("0.01:1:5x4"))
        csv_path, _ = diagram.save(str(tmp_path))
        with open(csv_path, encoding="utf-8") as stream:
            lines = stream.read().splitlines()
        assert lines[0] == "eps,delta,label"
        assert len(lines) == 1 + 5 * 4
