"""
Two-atom scenario tree with a known optimum.

Stage 0 pays (y - x)² before the atom is revealed; stage 1 pays (z - y - 0.5)² on
"up" and (z - y + 0.5)² on "down". From x = 0 the optimal process is f₁ = 0 and
f₂ = ±0.5.
"""
import pytest

from src.calculus.expression import quadratic
from src.dp.model import Horizon, uniform_grid
from src.feasibility.sets import box
from src.stochastic.model import StochasticDPModel, StochasticStage
from src.stochastic.tree import AdaptedProcess, ScenarioTree

GRID = uniform_grid([-1.0], [1.0], 9)
GAP = quadratic([[2.0, -2.0], [-2.0, 2.0]])
UP = quadratic([[2.0, -2.0], [-2.0, 2.0]], [1.0, -1.0], 0.25)
DOWN = quadratic([[2.0, -2.0], [-2.0, 2.0]], [-1.0, 1.0], 0.25)
UNIT_BOX = box([-1.0], [1.0])


@pytest.fixture
def tree():
    return ScenarioTree(
        probabilities=(0.5, 0.5), filtration=(((0, 1),), ((0,), (1,))), names=("up", "down")
    )


@pytest.fixture
def two_atom(tree):
    return StochasticDPModel(
        tree=tree,
        stages=(
            StochasticStage(
                state_dim=1, grid=GRID, costs=(GAP, GAP), feasibility=(UNIT_BOX, UNIT_BOX)
            ),
            StochasticStage(
                state_dim=1, grid=GRID, costs=(UP, DOWN), feasibility=(UNIT_BOX, UNIT_BOX)
            ),
        ),
        horizon=Horizon.finite(2),
    )


@pytest.fixture
def optimal_process():
    return AdaptedProcess(values=(((0.0,), (0.0,)), ((0.0,), (0.0,)), ((0.5,), (-0.5,))))
