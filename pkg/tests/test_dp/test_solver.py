"""
Tests for backward induction, policies and program evaluation.
"""
from itertools import product

import numpy as np
import pytest

from src.calculus.expression import abs_of, affine, max_of, sum_of
from src.dp.model import DPModel, Horizon, Stage, grid_nodes, uniform_grid
from src.dp.solver import (
    candidate_actions,
    check_admissible,
    extract_policy,
    in_policy,
    is_optimal_program,
    program_cost,
    rollout,
    solve_value,
)
from src.dp.table import INFEASIBLE, is_infeasible
from src.feasibility.sets import box, polyhedral
from src.nsdp.exceptions import AllInfeasibleStageError, InadmissibleProgramError

from .conftest import GAP, GRID, geometric_model, stage


class TestSolveValue:
    def test_target(self, target_model):
        """v₀ ≡ 0 with the single minimizer 0.5."""
        table = solve_value(target_model)
        assert table.T_eff == 0
        assert table.tail_error == 0.0
        assert np.allclose(table.stages[0].values, 0.0)
        policy = extract_policy(target_model, table, [0.0])
        assert policy.generators == ((0.5,),)

    def test_two_stage(self, two_stage_model):
        table = solve_value(two_stage_model)
        assert table.T_eff == 1
        assert len(table.stages) == 2
        for stage_values in table.stages:
            assert np.allclose(stage_values.values, 0.0)
        assert table.value(2, [0.3]) == 0.0

    def test_interpolated_value(self, smooth_model):
        """Between nodes the value is the linear interpolant of x² on the grid."""
        table = solve_value(smooth_model)
        assert table.value(0, [0.25]) == pytest.approx(0.0625)
        assert table.value(0, [0.125]) == pytest.approx(0.5 * 0.0625)

    def test_outside_grid_is_infeasible(self, target_model):
        table = solve_value(target_model)
        assert table.value(0, [1.5]) is INFEASIBLE

    def test_partially_infeasible(self):
        """Γ(x) = {y >= x + 0.5} leaves no successor in [-1, 1] for x > 0.5."""
        S = polyhedral([[-1.0]], [-0.5], [[-1.0]])
        model = DPModel(
            stages=(Stage(state_dim=1, grid=GRID, feasibility=S, cost=GAP),),
            horizon=Horizon.finite(1),
        )
        table = solve_value(model)
        assert is_infeasible(table.value(0, [0.75]))
        assert is_infeasible(table.value(0, [0.625]))
        assert table.value(0, [0.5]) == pytest.approx(0.25)
        assert table.value(0, [-1.0]) == pytest.approx(0.25)

    def test_all_infeasible(self):
        """y <= x together with y >= x + 1 is empty everywhere."""
        S = polyhedral([[1.0], [-1.0]], [0.0, -1.0], [[1.0], [-1.0]])
        model = DPModel(
            stages=(Stage(state_dim=1, grid=GRID, feasibility=S, cost=GAP),),
            horizon=Horizon.finite(1),
        )
        with pytest.raises(AllInfeasibleStageError) as excinfo:
            solve_value(model)
        assert excinfo.value.stage == 0

    def test_parallel_matches_serial(self, two_stage_model, abs_model):
        for model in (two_stage_model, abs_model):
            serial = solve_value(model)
            parallel = solve_value(model, parallelism=4)
            for a, b in zip(serial.stages, parallel.stages):
                assert np.array_equal(a.values, b.values)
                assert a.policies == b.policies

    def test_truncation_monotone(self):
        """Raising T_eff from 10 to 15 moves v₀ by at most the first tail."""
        short = solve_value(geometric_model(1e-3))
        long = solve_value(geometric_model(0.5**15))
        assert short.T_eff == 10
        assert long.T_eff == 15
        assert short.tail_error == pytest.approx(0.5**10)
        difference = long.stages[0].values - short.stages[0].values
        assert np.all(difference >= -1e-12)
        assert np.all(difference <= 0.5**10 + 1e-12)

    def test_infeasible_marker_rejects_arithmetic(self):
        with pytest.raises(TypeError):
            INFEASIBLE + 1.0  # type: ignore[operator]
        with pytest.raises(TypeError):
            float(INFEASIBLE)  # type: ignore[arg-type]


def _brute_force(model: DPModel, stages: int, x: tuple) -> float:
    """Minimum total cost over every sequence of grid nodes."""
    nodes = [tuple(n) for n in grid_nodes(model.stages[0].grid)]
    best = np.inf
    for path in product(nodes, repeat=stages):
        total, state = 0.0, x
        for t, y in enumerate(path):
            total += model.cost_at(t).value_at(np.array(state + y))
            state = y
        best = min(best, total)
    return best


class TestBruteForce:
    def test_matches_enumeration(self):
        """On a full-box grid without projections the solver is exact enumeration."""
        rng = np.random.default_rng(7)
        grid = uniform_grid([-1.0], [1.0], 5)
        for _ in range(20):
            stages = []
            for _ in range(3):
                a = rng.normal(size=(3, 2))
                c = rng.normal(size=3)
                cost = sum_of(
                    max_of(affine(a[0], c[0]), affine(a[1], c[1])),
                    abs_of(affine(a[2], c[2])),
                )
                stages.append(
                    Stage(state_dim=1, grid=grid, feasibility=box([-1.0], [1.0]), cost=cost)
                )
            model = DPModel(stages=tuple(stages), horizon=Horizon.finite(3))
            table = solve_value(model, project_candidates=False)
            for x in grid_nodes(grid):
                expected = _brute_force(model, 3, tuple(x))
                assert table.value(0, x) == pytest.approx(expected, abs=1e-9)


class TestPolicy:
    def test_tie_keeps_every_candidate(self, kink_model):
        """u₁ ≡ 0 makes every successor node a minimizer."""
        table = solve_value(kink_model)
        policy = extract_policy(kink_model, table, [0.5], t=1)
        assert len(policy.generators) == 9

    def test_kink_policy(self, kink_model):
        table = solve_value(kink_model)
        policy = extract_policy(kink_model, table, [0.75], t=0)
        assert policy.generators == ((0.0,),)
        assert in_policy(policy, [0.0])
        assert not in_policy(policy, [0.25])

    def test_recorded_policies(self, target_model):
        table = solve_value(target_model)
        assert all(p == ((0.5,),) for p in table.stages[0].policies)

    def test_rollout(self, two_stage_model):
        table = solve_value(two_stage_model)
        assert rollout(two_stage_model, table, [0.5]) == [(0.5,), (0.5,), (0.5,)]

    def test_candidates_include_projections(self):
        """Infeasible successor nodes contribute their projection onto Γ(x)."""
        S = polyhedral([[1.0]], [0.1], [[0.0]])
        model = DPModel(stages=(Stage(state_dim=1, grid=GRID, feasibility=S, cost=GAP),))
        with_projection = candidate_actions(model, 0, [0.0])
        without = candidate_actions(model, 0, [0.0], project_candidates=False)
        assert len(without) == 5
        assert len(with_projection) == 6
        assert with_projection[:, 0].max() == pytest.approx(0.1)


class TestPrograms:
    def test_admissible(self, two_stage_model):
        check_admissible(two_stage_model, [[0.0], [0.3], [0.3]])

    def test_inadmissible(self, two_stage_model):
        with pytest.raises(InadmissibleProgramError) as excinfo:
            check_admissible(two_stage_model, [[0.0], [0.3], [2.0]])
        assert excinfo.value.stage == 1

    def test_wrong_dimension(self, two_stage_model):
        with pytest.raises(InadmissibleProgramError):
            check_admissible(two_stage_model, [[0.0], [0.3, 0.1]])

    def test_program_cost(self, two_stage_model):
        assert program_cost(two_stage_model, [[0.0], [0.3], [0.3]]) == pytest.approx(0.09)

    def test_is_optimal(self, two_stage_model):
        table = solve_value(two_stage_model)
        assert is_optimal_program(two_stage_model, table, [[0.0], [0.0], [0.0]])
        assert not is_optimal_program(two_stage_model, table, [[0.0], [0.3], [0.3]])


class TestTableExport:
    def test_tsv(self, target_model):
        lines = solve_value(target_model).to_tsv().splitlines()
        assert lines[0] == "stage\tnode\tvalue\tpolicy"
        assert len(lines) == 6
        assert lines[3].startswith("0\t0.5\t")
        assert lines[3].endswith("\t0.5")

    def test_dict(self, target_model):
        data = solve_value(target_model).to_dict()
        assert data["T_eff"] == 0
        assert data["horizon_mode"] == "finite"
        nodes = data["stages"][0]["nodes"]
        assert [n["x"] for n in nodes] == [[0.0], [0.25], [0.5], [0.75], [1.0]]
        assert nodes[0]["policy"] == [[0.5]]
