"""
Tests for per-atom generalized gradients, selection normals and the Euler inclusion.
"""
import pytest

from src.calculus.expression import abs_of, coordinate
from src.dp.model import Horizon
from src.dp.solver import solve_value
from src.nsdp.exceptions import (
    AdaptednessError,
    InadmissibleProgramError,
    InfeasiblePointError,
    PremiseError,
)
from src.stochastic.calculus import (
    audit_integral_subdiff,
    integral_directional_derivative,
    integral_subdiff,
    normal_cones_agree,
    selection_normal_cone,
    stochastic_value_subdiff,
)
from src.stochastic.euler import stochastic_euler_check
from src.stochastic.model import StochasticDPModel, StochasticStage
from src.stochastic.reduction import reduce_to_deterministic

from .conftest import GAP, GRID, UNIT_BOX

ZERO = [[0.0], [0.0]]


@pytest.fixture
def reduced(two_atom):
    return reduce_to_deterministic(two_atom)


@pytest.fixture
def table(reduced):
    return solve_value(reduced)


class TestIntegralSubdiff:
    def test_per_atom_partials(self, two_atom):
        """∂_z of (z - y ∓ 0.5)² at y = 0, z = (0.7, -0.2)."""
        family = integral_subdiff(two_atom, 1, ZERO, [[0.7], [-0.2]], block="y")
        assert [p.generators[0][0] for p in family] == pytest.approx([0.4, 0.6])
        family = integral_subdiff(two_atom, 1, ZERO, [[0.7], [-0.2]], block="x")
        assert [p.generators[0][0] for p in family] == pytest.approx([-0.4, -0.6])

    def test_directional_derivative(self, two_atom):
        value = integral_directional_derivative(
            two_atom, 1, ZERO, [[0.7], [-0.2]], [[1.0, 0.0], [1.0, 1.0]]
        )
        assert value == pytest.approx(-0.2)

    def test_matches_finite_differences(self, two_atom):
        audit = audit_integral_subdiff(two_atom, 1, ZERO, [[0.7], [-0.2]], [[1.0, 0.0], [1.0, 1.0]])
        assert audit.exact == pytest.approx(-0.2)
        assert audit.ok

    def test_unadapted_state(self, two_atom):
        with pytest.raises(AdaptednessError):
            integral_subdiff(two_atom, 1, [[0.1], [0.0]], [[0.5], [-0.5]])

    def test_irregular_atom(self, tree):
        kink = abs_of(coordinate(1, 2))
        stage = StochasticStage(
            state_dim=1, grid=GRID, costs=(-kink, -kink), feasibility=(UNIT_BOX, UNIT_BOX)
        )
        smodel = StochasticDPModel(tree=tree, stages=(stage,), horizon=Horizon.finite(1))
        with pytest.raises(PremiseError) as excinfo:
            integral_subdiff(smodel, 0, ZERO, ZERO)
        assert excinfo.value.premise == "regular_cost"


class TestSelectionNormals:
    def test_interior(self, two_atom):
        cones = selection_normal_cone(two_atom, 1, ZERO, [[0.5], [-0.5]])
        assert all(c.is_trivial for c in cones)

    def test_bound_in_one_atom(self, two_atom):
        cones = selection_normal_cone(two_atom, 1, ZERO, [[1.0], [-0.5]])
        assert not cones[0].is_trivial
        assert cones[1].is_trivial
        assert normal_cones_agree(two_atom, 1, ZERO, [[1.0], [-0.5]])

    def test_infeasible_selection(self, two_atom):
        with pytest.raises(InfeasiblePointError):
            selection_normal_cone(two_atom, 1, ZERO, [[1.5], [-0.5]])


class TestStochasticEuler:
    def test_optimum(self, two_atom, reduced, table):
        result = stochastic_euler_check(
            two_atom, table, 0, ZERO, ZERO, [[0.5], [-0.5]], reduced=reduced
        )
        assert result.member
        assert result.on_policy
        assert result.failing_atoms == []
        assert [c.probability for c in result.certificates] == [0.5, 0.5]

    def test_one_atom_fails(self, two_atom, reduced, table):
        """z(up) = 0.75 leaves ∂ of the up cost at -0.5 while the down atom is balanced."""
        result = stochastic_euler_check(
            two_atom, table, 0, ZERO, ZERO, [[0.75], [-0.5]], reduced=reduced
        )
        assert not result.member
        assert result.failing_atoms == [0]
        assert not result.on_policy
        assert result.certificates[0].certificate.separator == pytest.approx((1.0,))

    def test_parallel_matches_serial(self, two_atom, reduced, table):
        serial = stochastic_euler_check(
            two_atom, table, 0, ZERO, ZERO, [[0.75], [-0.5]], reduced=reduced
        )
        parallel = stochastic_euler_check(
            two_atom, table, 0, ZERO, ZERO, [[0.75], [-0.5]], reduced=reduced, parallelism=2
        )
        assert serial == parallel

    def test_unadapted_action(self, two_atom, reduced, table):
        with pytest.raises(AdaptednessError):
            stochastic_euler_check(
                two_atom, table, 0, ZERO, [[0.2], [-0.2]], [[0.5], [-0.5]], reduced=reduced
            )

    def test_infeasible_action(self, two_atom, reduced, table):
        with pytest.raises(InadmissibleProgramError):
            stochastic_euler_check(two_atom, table, 1, ZERO, [[1.5], [-0.5]], ZERO, reduced=reduced)

    def test_outside_solved_range(self, two_atom, table):
        with pytest.raises(PremiseError) as excinfo:
            stochastic_euler_check(two_atom, table, 2, ZERO, ZERO, ZERO)
        assert excinfo.value.premise == "solved_horizon"


class TestValueSubdiff:
    def test_strict_family(self, two_atom, reduced, table):
        result = stochastic_value_subdiff(
            two_atom, table, 1, ZERO, [[0.5], [-0.5]], reduced=reduced
        )
        assert result.strict is not None
        assert [v[0] for v in result.strict] == pytest.approx([0.0, 0.0])
        assert result.reduced_gradient is not None
        assert result.reduced_gradient[0] == pytest.approx(0.0)
        assert result.audit is not None and result.audit.audit_ok

    def test_not_a_policy_point(self, two_atom, reduced, table):
        with pytest.raises(PremiseError) as excinfo:
            stochastic_value_subdiff(two_atom, table, 1, ZERO, [[0.25], [-0.5]], reduced=reduced)
        assert excinfo.value.premise == "policy_point"
