"""Closed-form evaluators for the polynomial warm-up problems."""
import enum
import math
from fractions import Fraction
from typing import Callable

from .kernel import AxisPoint, InvalidParameter, ParamPoint, Point


@enum.unique
class ClassicalLabel(enum.Enum):
    RootsTwo = "RootsTwo"
    RootsZero = "RootsZero"
    ConvexAlways = "ConvexAlways"
    PartialMinus = "PartialMinus"
    PartialPlus = "PartialPlus"


def root_count_unit_interval(p: ParamPoint) -> int:
    """Roots of eps*x**2 - delta in [-1, 1], with multiplicity."""
    # exact: floats convert to Fraction without rounding
    return 2 if Fraction(p.delta) <= Fraction(p.eps) else 0


def root_count_label(p: ParamPoint) -> ClassicalLabel:
    return ClassicalLabel.RootsTwo if root_count_unit_interval(p) == 2 else ClassicalLabel.RootsZero


def convexity_property(p: Point) -> int:
    # eps*x**2 - delta is convex for every eps >= 0, on the axes included
    del p
    return 1


def clairaut_function(x: float, y: float) -> float:
    if x == 0 and y == 0:
        return 0.0
    return x * y * (x * x - y * y) / (x * x + y * y)


def clairaut_quotient(eps: float, delta: float) -> float:
    """Mixed difference quotient of the Clairaut counterexample at the origin.

    `delta` is the increment in x, `eps` the increment in y:
    [f(d, e) - f(d, 0) - f(0, e) + f(0, 0)] / (e d) = (d^2 - e^2) / (d^2 + e^2).
    """
    if eps <= 0 or delta <= 0:
        raise InvalidParameter("increments must be positive")
    ratio = delta / eps
    if ratio > 1:
        inv = 1 / (ratio * ratio)
        return (1 - inv) / (1 + inv)
    r2 = ratio * ratio
    return (r2 - 1) / (r2 + 1)


def clairaut_quotient_direct(eps: float, delta: float) -> float:
    f = clairaut_function
    return (f(delta, eps) - f(delta, 0.0) - f(0.0, eps) + f(0.0, 0.0)) / (eps * delta)


def clairaut_property(path: Callable[[float], float], eps: float) -> float:
    """Value of the quotient along delta = path(eps)."""
    return clairaut_quotient(eps, path(eps))


def clairaut_label(value: float) -> ClassicalLabel:
    if math.isnan(value) or value == 0:
        raise InvalidParameter("quotient is on the boundary ray")
    return ClassicalLabel.PartialMinus if value < 0 else ClassicalLabel.PartialPlus


def partials_label(p: Point) -> ClassicalLabel:
    """Pointwise label: sign of the quotient at (eps, delta)."""
    if isinstance(p, AxisPoint):
        raise InvalidParameter("undefined on the axes")
    return clairaut_label(clairaut_quotient(p.eps, p.delta))
