"""
Tests for Bellman residuals, value-gradient bounds and the derived audits.
"""
import pytest

from src.calculus.expression import abs_of, coordinate, neg, sum_of
from src.dp.audit import (
    bellman_residual,
    estimate_curvature,
    interior_stationarity_check,
    interpolation_tolerance,
    lipschitz_audit,
    strict_diff_value,
    value_subdiff_bound,
)
from src.dp.model import DPModel, Horizon
from src.dp.solver import solve_value
from src.nsdp.exceptions import InadmissibleProgramError, NonSingletonGradientError, PremiseError

from .conftest import TARGET, stage


class TestInterpolationTolerance:
    def test_linear_values_have_zero_curvature(self, abs_model):
        """The kink of |x| sits on the excluded center node."""
        table = solve_value(abs_model)
        assert estimate_curvature(table, 0, [0.0]) == pytest.approx(0.0, abs=1e-12)
        tol = interpolation_tolerance(table, 0, [0.0])
        assert tol.value_tol == 1e-9
        assert tol.slope_tol == 1e-6

    def test_quadratic_curvature(self, smooth_model):
        table = solve_value(smooth_model)
        tol = interpolation_tolerance(table, 0, [0.5])
        assert tol.curvature == pytest.approx(2.0)
        assert tol.slope_tol == pytest.approx(2.0 * 2.0 * 0.25)

    def test_declared_curvature_wins(self, smooth_model):
        table = solve_value(smooth_model)
        assert interpolation_tolerance(table, 0, [0.5], curvature_bound=0.0).slope_tol == 1e-6


class TestBellmanResidual:
    def test_optimal_program(self, two_stage_model):
        table = solve_value(two_stage_model)
        report = bellman_residual(two_stage_model, table, [[0.0], [0.0], [0.0]])
        assert report.residuals == pytest.approx([0.0, 0.0], abs=1e-12)
        assert report.consistent
        assert report.sign_ok

    def test_perturbed_program(self, two_stage_model):
        """Moving to 0.3 costs 0.09 that v₀(0) = 0 does not pay for."""
        table = solve_value(two_stage_model)
        report = bellman_residual(two_stage_model, table, [[0.0], [0.3], [0.3]])
        assert report.residuals[0] == pytest.approx(-0.09)
        assert report.residuals[0] <= -0.08
        assert report.tolerances[0] >= 1e-9
        assert not report.consistent
        assert report.sign_ok

    def test_inadmissible_program(self, two_stage_model):
        table = solve_value(two_stage_model)
        with pytest.raises(InadmissibleProgramError):
            bellman_residual(two_stage_model, table, [[0.0], [1.5], [0.0]])


class TestValueSubdiffBound:
    def test_kink(self, abs_model):
        """At x̄ = 0 the bound is hull{-1, 1} and the table secants reach ±1."""
        table = solve_value(abs_model)
        result = value_subdiff_bound(abs_model, table, 0, [0.0], [0.5])
        assert sorted(result.polytope.generators) == [(-1.0,), (1.0,)]
        assert len(result.audit) == 2
        for entry in result.audit:
            assert entry.estimate == pytest.approx(1.0)
            assert entry.support == pytest.approx(1.0)
        assert result.audit_ok
        assert result.viability is not None and result.viability.holds

    def test_smooth(self, smooth_model):
        table = solve_value(smooth_model)
        result = value_subdiff_bound(smooth_model, table, 0, [1.0], [0.5])
        assert result.polytope.generators == ((2.0,),)
        assert result.audit_ok

    def test_not_a_policy_point(self, abs_model):
        table = solve_value(abs_model)
        with pytest.raises(PremiseError) as excinfo:
            value_subdiff_bound(abs_model, table, 0, [0.0], [0.25])
        assert excinfo.value.premise == "policy_point"

    def test_irregular_cost(self):
        """-|x| at its kink cannot be certified regular."""
        cost = sum_of(neg(abs_of(coordinate(0, 2))), TARGET)
        model = DPModel(stages=(stage(cost, 0.0, 1.0),), horizon=Horizon.finite(1))
        table = solve_value(model)
        with pytest.raises(PremiseError) as excinfo:
            value_subdiff_bound(model, table, 0, [0.0], [0.5])
        assert excinfo.value.premise == "regular_cost"

    def test_unsolved_stage(self, abs_model):
        table = solve_value(abs_model)
        with pytest.raises(PremiseError) as excinfo:
            value_subdiff_bound(abs_model, table, 3, [0.0], [0.5])
        assert excinfo.value.premise == "solved_horizon"


class TestStrictDiff:
    def test_smooth_gradient(self, smooth_model):
        """∇v₀(0.5) = 1 and the central difference of x² on the grid is exact."""
        table = solve_value(smooth_model)
        result = strict_diff_value(smooth_model, table, 0, [0.5], [0.5])
        assert result.gradient == pytest.approx((1.0,))
        assert result.fd_gradient == pytest.approx((1.0,))
        assert result.audit_ok

    def test_kink_is_not_singleton(self, abs_model):
        table = solve_value(abs_model)
        with pytest.raises(NonSingletonGradientError) as excinfo:
            strict_diff_value(abs_model, table, 0, [0.0], [0.5])
        assert isinstance(excinfo.value, PremiseError)
        assert excinfo.value.premise == "non_singleton_gradient"


class TestInteriorStationarity:
    def test_stationary(self, two_stage_model):
        table = solve_value(two_stage_model)
        result = interior_stationarity_check(two_stage_model, table, 0, [0.0], [0.0])
        assert result.residual == pytest.approx(0.0, abs=1e-12)

    def test_off_policy_residual(self, two_stage_model):
        """∇_y (y - x)² = 0.2 at (0, 0.1) while v₁ is flat."""
        table = solve_value(two_stage_model)
        result = interior_stationarity_check(two_stage_model, table, 0, [0.0], [0.1])
        assert result.residual == pytest.approx(0.2)
        assert result.residual > result.tolerance

    def test_boundary_point(self, two_stage_model):
        table = solve_value(two_stage_model)
        with pytest.raises(PremiseError) as excinfo:
            interior_stationarity_check(two_stage_model, table, 0, [0.0], [1.0])
        assert excinfo.value.premise == "interior_point"

    def test_nonsmooth_cost(self, abs_model):
        table = solve_value(abs_model)
        with pytest.raises(PremiseError) as excinfo:
            interior_stationarity_check(abs_model, table, 0, [0.0], [0.5])
        assert excinfo.value.premise == "smooth_cost"


class TestLipschitzAudit:
    def test_flat_value(self, two_stage_model):
        table = solve_value(two_stage_model)
        result = lipschitz_audit(two_stage_model, table, 0, [0.0], samples=16)
        assert result.ok
        assert result.observed == pytest.approx(0.0, abs=1e-12)
        assert result.viability.holds

    def test_abs_value(self, abs_model):
        """Slopes of |x| stay below the declared bound of the stage cost."""
        table = solve_value(abs_model)
        result = lipschitz_audit(abs_model, table, 0, [0.0], samples=32, seed=3)
        assert result.ok
        assert result.observed <= 1.0 + 1e-9
        assert result.declared >= 1.0
