"""
Tests for generalized gradients, directional derivatives and regularity.
"""
import numpy as np
import pytest

from src.calculus.clarke import (
    RegularityVerdict,
    clarke_gradient,
    gen_dir_derivative,
    is_regular,
    partial_gradient,
    strict_derivative_probe,
)
from src.calculus.expression import abs_of, coordinate, max_of, neg, norm_squared, quadratic, sum_of
from src.calculus.oracle import fd_generalized_derivative
from src.geometry.polytope import Polytope

from .conftest import random_expr

X = coordinate(0, 1)
HALF_NORM = norm_squared([0.0, 0.0])


class TestClarkeGradient:
    """Canonical generalized gradients."""

    def test_abs_at_kink(self):
        """∂°|·|(0) is the segment [-1, 1]."""
        assert clarke_gradient(abs_of(X), [0.0]).same_set(Polytope.from_points([[-1.0], [1.0]]))

    def test_max_at_tie(self):
        """Both branches of max(x1, x2) are active at (1, 1)."""
        expr = max_of(coordinate(0, 2), coordinate(1, 2))
        assert clarke_gradient(expr, [1.0, 1.0]).same_set(
            Polytope.from_points([[1.0, 0.0], [0.0, 1.0]])
        )

    def test_smooth_singleton(self):
        """½‖x‖² at (2, 3) has the singleton gradient (2, 3)."""
        gradient = clarke_gradient(HALF_NORM, [2.0, 3.0])
        assert gradient.is_singleton
        assert gradient.generators[0] == pytest.approx((2.0, 3.0))

    def test_active_tolerance(self):
        """Branches within active_tol of the max contribute."""
        expr = max_of(X, quadratic([[0.0]], None, 1e-10))
        assert len(clarke_gradient(expr, [0.0], active_tol=1e-9).generators) == 2
        assert len(clarke_gradient(expr, [0.0], active_tol=0.0).generators) == 1

    def test_partial_gradient(self):
        """∂°_x of |x| + (y - 0.5)² at (0, 0.5) is [-1, 1]; ∂°_y is {0}."""
        u = sum_of(abs_of(coordinate(0, 2)), quadratic([[0.0, 0.0], [0.0, 2.0]], [0.0, -1.0], 0.25))
        assert partial_gradient(u, [0], [0.0, 0.5]).same_set(Polytope.from_points([[-1.0], [1.0]]))
        assert partial_gradient(u, [1], [0.0, 0.5]).generators == ((0.0,),)


class TestDirectionalDerivative:
    """φ° is the support function of ∂°."""

    @pytest.mark.parametrize("h", [1.0, -1.0])
    def test_abs_at_kink(self, h):
        """|·|°(0; ±1) = 1."""
        assert gen_dir_derivative(abs_of(X), [0.0], [h]) == 1.0

    def test_smooth(self):
        """½‖x‖² at (2, 3) in direction (1, 0) is 2."""
        assert gen_dir_derivative(HALF_NORM, [2.0, 3.0], [1.0, 0.0]) == pytest.approx(2.0)

    def test_matches_finite_differences(self, rng):
        """Random depth-3 expressions agree with the limsup oracle at random points."""
        for _ in range(40):
            dim = int(rng.integers(1, 5))
            expr = random_expr(rng, dim, 3)
            for _ in range(5):
                point = rng.uniform(-2.0, 2.0, dim)
                direction = rng.uniform(-1.0, 1.0, dim)
                exact = gen_dir_derivative(expr, point, direction)
                estimate = fd_generalized_derivative(expr, point, direction).value
                assert abs(exact - estimate) <= 1e-3

    def test_oracle_never_exceeds_support_at_kinks(self):
        """At a kink the sampled quotients stay below φ°."""
        expr = sum_of(abs_of(X), neg(abs_of(X)))
        for h in (1.0, -1.0):
            estimate = fd_generalized_derivative(expr, [0.0], [h]).value
            assert estimate <= gen_dir_derivative(expr, [0.0], [h]) + 1e-6

    def test_oracle_profile(self):
        """The oracle reports one quotient per step size."""
        estimate = fd_generalized_derivative(quadratic([[2.0]]), [1.0], [1.0], thetas=(1e-2, 1e-4))
        assert set(estimate.profile) == {1e-2, 1e-4}
        assert estimate.value == pytest.approx(2.0, abs=1e-3)

    def test_oracle_rejects_bad_steps(self):
        with pytest.raises(ValueError):
            fd_generalized_derivative(X, [0.0], [1.0], thetas=(0.0,))


class TestRegularity:
    """Structural regularity certificates."""

    def test_max_of_smooth(self):
        """max(x, -x) is regular at its kink."""
        assert is_regular(max_of(X, neg(X)), [0.0]).verdict == RegularityVerdict.REGULAR

    def test_negated_abs(self):
        """-|x| is not certified at 0 and the trace names the negation."""
        report = is_regular(neg(abs_of(X)), [0.0])
        assert report.verdict == RegularityVerdict.NOT_CERTIFIED
        assert any("neg" in reason for reason in report.trace)

    def test_abs_away_from_kink(self):
        """|x| at 1 has a unique smooth active branch."""
        report = is_regular(abs_of(X), [1.0])
        assert report.is_regular
        assert report.smooth


class TestStrictDerivative:
    """Strict differentiability probe."""

    def test_smooth(self):
        """½‖x‖² at (2, 3) is strictly differentiable with derivative (2, 3)."""
        assert strict_derivative_probe(HALF_NORM, [2.0, 3.0]) == pytest.approx((2.0, 3.0))

    def test_kink(self):
        """|x| at 0 has two generators."""
        assert strict_derivative_probe(abs_of(X), [0.0]) is None

    def test_locally_linear(self):
        """|x| at 0.5 is locally linear."""
        assert strict_derivative_probe(abs_of(X), [0.5]) == pytest.approx((1.0,))

    def test_kink_inside_radius(self):
        """|x| at 1e-7 sits inside the default radius of the kink yet keeps its derivative."""
        assert clarke_gradient(abs_of(X), [1e-7]).is_singleton
        assert strict_derivative_probe(abs_of(X), [1e-7]) == pytest.approx((1.0,))

    def test_kink_inside_active_tol(self):
        """|x| at 1e-10 counts as the kink itself."""
        assert strict_derivative_probe(abs_of(X), [1e-10]) is None

    def test_radius_must_be_positive(self):
        with pytest.raises(ValueError):
            strict_derivative_probe(X, [0.0], radius=0.0)
