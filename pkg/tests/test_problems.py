import pytest

from dlimit import problems
from dlimit.kernel import Axis, DlimitInputError, ParamPoint
from dlimit.sweep import AMBIGUOUS, NOT_DEFINED, GridSpec, sweep


@pytest.mark.parametrize("name", sorted(problems.PROBLEMS))
def test_every_problem_constructs(name):
    for quick in (False, True):
        evaluator = problems.get_problem(name, quick)
        assert evaluator.name == name
        assert evaluator.label_set


def test_unknown_problem():
    with pytest.raises(DlimitInputError) as info:
        problems.get_problem("nope")
    assert "roots" in info.value.reason


class TestCheckGrid:
    def test_tc_floor(self):
        with pytest.raises(DlimitInputError) as info:
            problems.check_grid("tc", GridSpec.parse("0.005:0.3:4x4"))
        assert "0.02" in info.value.reason

    def test_tc_ceiling(self):
        with pytest.raises(DlimitInputError):
            problems.check_grid("tc", GridSpec.parse("0.02:0.5:4x4"))

    def test_other_problems_accept_any_grid(self):
        problems.check_grid("roots", GridSpec.parse("1e-6:10:4x4"))


class TestEvaluations:
    def evaluate(self, name, eps, second, third=None):
        return problems.get_problem(name).evaluate(ParamPoint(eps, second, third), 0)

    def test_roots(self):
        assert self.evaluate("roots", 0.5, 0.25) == "RootsTwo"
        assert self.evaluate("roots", 0.25, 0.5) == "RootsZero"

    def test_partials(self):
        assert self.evaluate("partials", 0.5, 0.25) == "PartialMinus"
        assert self.evaluate("partials", 0.25, 0.5) == "PartialPlus"

    def test_partials_on_the_diagonal_is_ambiguous(self):
        diagram = sweep(problems.get_problem("partials"), GridSpec.parse("0.1:1:3x3"))
        assert [diagram.labels[j][j] for j in range(3)] == [AMBIGUOUS] * 3

    def test_boundedness(self):
        assert self.evaluate("pdmp-bdd", 0.5, 0.25) == "Bounded"
        assert self.evaluate("pdmp-bdd", 0.25, 0.5) == "Unbounded"

    def test_mems_regimes(self):
        assert self.evaluate("mems-ss", 0.04, 0.5) == "I"
        assert self.evaluate("mems-ss", 0.5, 0.8) == NOT_DEFINED

    def test_synthetic_square(self):
        assert self.evaluate("synthetic-square", 0.1, 0.02) == "Above"
        assert self.evaluate("synthetic-square", 0.1, 0.005) == "Below"

    def test_tc(self):
        assert self.evaluate("tc", 0.1, 0.2) == "ExchangeOfStability"

    def test_shear(self):
        assert self.evaluate("shear", 1.5, 0.5, third=3.0) == "Negative"
        assert self.evaluate("shear", 1.5, 2.0, third=3.0) == "Positive"

    def test_axis_rules(self):
        evaluator = problems.get_problem("roots")
        assert evaluator.axis_label(Axis.SECOND_ZERO) == "RootsTwo"
        assert evaluator.axis_label(Axis.ORIGIN) == NOT_DEFINED
        assert problems.get_problem("sfs").axis_label(Axis.SECOND_ZERO) == "Concentrated"

    def test_axis_names(self):
        assert problems.get_problem("shear").first_name == "alpha"
        assert problems.get_problem("fhn").second_name == "sigma"


@pytest.mark.parametrize("name", sorted(problems.PROBLEMS))
def test_axis_labels_belong_to_the_label_set(name):
    evaluator = problems.get_problem(name)
    for axis in Axis:
        label = evaluator.axis_label(axis)
        assert label in evaluator.label_set or label in (NOT_DEFINED, AMBIGUOUS)
