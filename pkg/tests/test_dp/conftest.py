"""
Small deterministic models with closed-form solutions.
"""
import pytest

from src.calculus.expression import abs_of, constant, coordinate, quadratic, sum_of
from src.dp.model import BoundSequence, DPModel, Horizon, Stage, uniform_grid
from src.feasibility.sets import box

GRID = uniform_grid([-1.0], [1.0], 9)
UNIT_GRID = uniform_grid([0.0], [1.0], 5)

# (y - x)² on R × R
GAP = quadratic([[2.0, -2.0], [-2.0, 2.0]])
# (y - 0.5)²
TARGET = quadratic([[0.0, 0.0], [0.0, 2.0]], [0.0, -1.0], 0.25)


def stage(cost, lower=-1.0, upper=1.0, grid=GRID):
    return Stage(state_dim=1, grid=grid, feasibility=box([lower], [upper]), cost=cost)


@pytest.fixture
def target_model():
    """u₀ = (y - 0.5)² on Γ = [0, 1]; v₀ ≡ 0 with argmin 0.5."""
    return DPModel(stages=(stage(TARGET, 0.0, 1.0, UNIT_GRID),), horizon=Horizon.finite(1))


@pytest.fixture
def two_stage_model():
    """u₀ = (y - x)², u₁ = (z - y)² on [-1, 1]; v₀ ≡ 0 with policies y = x, z = y."""
    return DPModel(stages=(stage(GAP), stage(GAP)), horizon=Horizon.finite(2))


@pytest.fixture
def abs_model():
    """u₀ = |x| + (y - 0.5)² on Γ = [0, 1]; v₀(x) = |x|."""
    return DPModel(
        stages=(stage(sum_of(abs_of(coordinate(0, 2)), TARGET), 0.0, 1.0),),
        horizon=Horizon.finite(1),
    )


@pytest.fixture
def smooth_model():
    """u₀ = x² + (y - 0.5)² on Γ = [0, 1]; v₀(x) = x²."""
    cost = quadratic([[2.0, 0.0], [0.0, 2.0]], [0.0, -1.0], 0.25)
    return DPModel(stages=(stage(cost, 0.0, 1.0),), horizon=Horizon.finite(1))


@pytest.fixture
def kink_model():
    """u₀ = |y|, u₁ ≡ 0 on [-1, 1]."""
    return DPModel(
        stages=(stage(abs_of(coordinate(1, 2))), stage(constant(0.0, 2))),
        horizon=Horizon.finite(2),
    )


def geometric_model(epsilon: float) -> DPModel:
    """½(y - x)² + ½(y - 1)² on [0, 1]² discounted by 0.5, so b_t = 0.5^t."""
    cost = quadratic([[1.0, -1.0], [-1.0, 2.0]], [0.0, -1.0], 0.5)
    return DPModel(
        stages=(stage(cost, 0.0, 1.0, UNIT_GRID),),
        horizon=Horizon.truncated(BoundSequence.geometric(1.0, 0.5), epsilon),
        discount=0.5,
    )
