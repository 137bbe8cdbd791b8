"""
Tests for the Euler inclusion check.
"""
import pytest

from src.calculus.expression import abs_of, coordinate, neg, sum_of
from src.dp.euler import euler_check
from src.dp.model import DPModel, Horizon
from src.dp.solver import solve_value
from src.geometry.membership import Verdict
from src.nsdp.exceptions import InadmissibleProgramError, PremiseError

from .conftest import UNIT_GRID, stage


@pytest.fixture
def linear_model():
    """u₀ = y on Γ = [0, 1]; the minimizer sits on the lower bound."""
    return DPModel(
        stages=(stage(coordinate(1, 2), 0.0, 1.0, UNIT_GRID),), horizon=Horizon.finite(1)
    )


class TestEulerCheck:
    def test_optimum_is_member(self, two_stage_model):
        table = solve_value(two_stage_model)
        result = euler_check(two_stage_model, table, 0, [0.0], [0.0], [0.0])
        assert result.member
        assert result.on_policy
        assert not result.alarm
        assert result.distance == pytest.approx(0.0, abs=1e-9)
        assert result.certificate.witness is not None
        assert set(result.premises) == {
            "regular_cost_0",
            "regular_cost_1",
            "upper_viability_0",
            "upper_viability_1",
        }

    def test_perturbed_is_separated(self, two_stage_model):
        """At ȳ = z̄ = 0.4 the sum is {0.8} and (-1) separates it from 0."""
        table = solve_value(two_stage_model)
        result = euler_check(two_stage_model, table, 0, [0.0], [0.4], [0.4])
        assert result.certificate.verdict == Verdict.NON_MEMBER
        assert result.certificate.separator == pytest.approx((-1.0,))
        assert result.distance == pytest.approx(0.8)
        assert not result.on_policy
        assert not result.alarm

    def test_kink_contains_zero(self, kink_model):
        """∂°_y |y| at 0 is [-1, 1] and u₁ ≡ 0 contributes {0}."""
        table = solve_value(kink_model)
        result = euler_check(kink_model, table, 0, [0.5], [0.0], [0.0])
        assert sorted(result.cost_part.generators) == [(-1.0,), (1.0,)]
        assert result.next_part.generators == ((0.0,),)
        assert result.member
        assert result.on_policy

    def test_normal_cone_at_bound(self, linear_model):
        """∂_y u = 1 is balanced by the normal cone of [0, 1] at 0."""
        table = solve_value(linear_model)
        result = euler_check(linear_model, table, 0, [0.5], [0.0], [0.0])
        assert not result.cone.is_trivial
        assert result.member
        assert result.on_policy

    def test_interior_off_policy(self, linear_model):
        table = solve_value(linear_model)
        result = euler_check(linear_model, table, 0, [0.5], [0.5], [0.0])
        assert result.cone.is_trivial
        assert not result.member
        assert not result.on_policy

    def test_last_stage_has_no_successor_term(self, two_stage_model):
        table = solve_value(two_stage_model)
        result = euler_check(two_stage_model, table, 1, [0.25], [0.25], [0.9])
        assert result.next_part.generators == ((0.0,),)
        assert result.member

    def test_infeasible_y(self, two_stage_model):
        table = solve_value(two_stage_model)
        with pytest.raises(InadmissibleProgramError):
            euler_check(two_stage_model, table, 0, [0.0], [2.0], [0.0])

    def test_irregular_cost(self):
        model = DPModel(
            stages=(
                stage(neg(abs_of(coordinate(1, 2)))),
                stage(sum_of(coordinate(0, 2), coordinate(1, 2))),
            ),
            horizon=Horizon.finite(2),
        )
        table = solve_value(model)
        with pytest.raises(PremiseError) as excinfo:
            euler_check(model, table, 0, [0.0], [0.0], [0.0])
        assert excinfo.value.premise == "regular_cost"

    def test_outside_solved_range(self, two_stage_model):
        table = solve_value(two_stage_model)
        with pytest.raises(PremiseError) as excinfo:
            euler_check(two_stage_model, table, 2, [0.0], [0.0], [0.0])
        assert excinfo.value.premise == "solved_horizon"
