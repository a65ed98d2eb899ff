import pytest

from dlimit import classical
from dlimit.classical import ClassicalLabel
from dlimit.kernel import Axis, AxisPoint, ParamPoint


@pytest.mark.parametrize(
    "eps,delta,count",
    [
        (0.5, 0.25, 2),
        (0.5, 0.5, 2),
        (0.5, 0.5000001, 0),
        (0.01, 1.0, 0),
        (1.0, 0.01, 2),
    ],
)
def test_root_count(eps, delta, count):
    assert classical.root_count_unit_interval(ParamPoint(eps, delta)) == count


def test_root_count_label():
    assert classical.root_count_label(ParamPoint(0.3, 0.1)) is ClassicalLabel.RootsTwo
    assert classical.root_count_label(ParamPoint(0.1, 0.3)) is ClassicalLabel.RootsZero


def test_convexity_everywhere():
    assert classical.convexity_property(ParamPoint(0.2, 0.7)) == 1
    assert classical.convexity_property(AxisPoint(Axis.ORIGIN)) == 1


class TestClairaut:
    @pytest.mark.parametrize("eps,delta", [(0.3, 0.1), (0.1, 0.3), (0.2, 0.2), (0.5, 0.05)])
    def test_quotient_matches_direct_formula(self, eps, delta):
        assert classical.clairaut_quotient(eps, delta) == pytest.approx(
            classical.clairaut_quotient_direct(eps, delta), abs=1e-12
        )

    def test_limits(self):
        assert classical.clairaut_quotient(1.0, 1e-9) == pytest.approx(-1.0)
        assert classical.clairaut_quotient(1e-9, 1.0) == pytest.approx(1.0)
        assert classical.clairaut_quotient(0.3, 0.3) == 0.0

    def test_path(self):
        assert classical.clairaut_property(lambda e: e * e, 0.01) == pytest.approx(-1.0, abs=1e-3)
        assert classical.clairaut_property(lambda e: e**0.5, 0.01) == pytest.approx(1.0, abs=0.05)

    def test_function_at_origin(self):
        assert classical.clairaut_function(0.0, 0.0) == 0.0

    def test_labels(self):
        assert classical.partials_label(ParamPoint(0.5, 0.1)) is ClassicalLabel.PartialMinus
        assert classical.partials_label(ParamPoint(0.1, 0.5)) is ClassicalLabel.PartialPlus

    def test_boundary_ray_has_no_label(self):
        with pytest.raises(ValueError):
            classical.partials_label(ParamPoint(0.2, 0.2))

    def test_undefined_on_axes(self):
        with pytest.raises(ValueError):
            classical.partials_label(AxisPoint(Axis.EPS_ZERO, 0.1))

    def test_increments_must_be_positive(self):
        with pytest.raises(ValueError):
            classical.clairaut_quotient(0.0, 0.1)
