"""
Deterministic DP model: staged grids, feasibility sets, costs and horizon metadata.

Stages past the listed ones repeat the last listed stage, and the cost at stage t is
β^t·u_t when a discount β < 1 is set.
"""
import math
from itertools import product
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.calculus.expression import Expr, ExprNode, ScaleNode
from src.feasibility.sets import FeasibilitySet
from src.nsdp.exceptions import DimensionMismatchError

Grid = Tuple[Tuple[float, ...], ...]


def check_grid(grid: Grid, dim: int, what: str) -> None:
    if len(grid) != dim:
        raise ValueError(f"{what} has {len(grid)} axes, expected {dim}")
    for axis, breakpoints in enumerate(grid):
        if len(breakpoints) < 2:
            raise ValueError(f"{what} axis {axis} needs at least two breakpoints")
        if any(b <= a for a, b in zip(breakpoints, breakpoints[1:])):
            raise ValueError(f"{what} axis {axis} breakpoints must be strictly increasing")


def grid_nodes(grid: Grid) -> np.ndarray:
    """Cartesian product of the axes as rows, first axis slowest."""
    return np.array(list(product(*grid)), dtype=float).reshape(-1, len(grid))


def grid_spacing(grid: Grid) -> float:
    """Largest gap between consecutive breakpoints over all axes."""
    return max(float(np.max(np.diff(axis))) for axis in grid)


def uniform_grid(lower: Sequence[float], upper: Sequence[float], points: int) -> Grid:
    return tuple(
        tuple(float(v) for v in np.linspace(lo, hi, points)) for lo, hi in zip(lower, upper)
    )


class Stage(BaseModel):
    """One period: state grid, feasibility set Γ_t and cost u_t(x, y)."""

    model_config = ConfigDict(frozen=True)

    state_dim: int = Field(..., ge=1)
    grid: Grid = Field(..., description="Per-axis sorted breakpoints of the state box")
    feasibility: FeasibilitySet
    cost: Expr = Field(..., description="Expression over the concatenation (x, y)")

    @model_validator(mode="after")
    def check_stage(self) -> "Stage":
        check_grid(self.grid, self.state_dim, "Stage grid")
        if self.feasibility.state_dim not in (0, self.state_dim):
            raise ValueError(
                f"Feasibility set state_dim {self.feasibility.state_dim} "
                f"differs from {self.state_dim}"
            )
        expected = self.state_dim + self.action_dim
        if self.cost.dim != expected:
            raise ValueError(
                f"Cost takes {self.cost.dim} inputs, expected state+action = {expected}"
            )
        return self

    @property
    def action_dim(self) -> int:
        return self.feasibility.action_dim

    @property
    def lower(self) -> np.ndarray:
        return np.array([axis[0] for axis in self.grid])

    @property
    def upper(self) -> np.ndarray:
        return np.array([axis[-1] for axis in self.grid])


class BoundSequence(BaseModel):
    """Sup-norm bounds b_t of the costs: an explicit prefix then scale·ratio^t.

    Tails Σ_{s>T} b_s have closed forms, so summability is decided without truncating
    the series.
    """

    model_config = ConfigDict(frozen=True)

    prefix: Tuple[float, ...] = Field(default=(), description="b_0 .. b_{L-1}")
    scale: float = Field(default=0.0, ge=0.0, description="Coefficient of the geometric tail")
    ratio: float = Field(default=0.0, ge=0.0, description="Common ratio of the geometric tail")

    @classmethod
    def geometric(cls, scale: float, ratio: float) -> "BoundSequence":
        return cls(scale=scale, ratio=ratio)

    @classmethod
    def constant(cls, value: float) -> "BoundSequence":
        return cls(scale=value, ratio=1.0)

    @property
    def divergent(self) -> bool:
        return self.scale > 0.0 and self.ratio >= 1.0

    def term(self, t: int) -> float:
        if t < len(self.prefix):
            return self.prefix[t]
        return self.scale * self.ratio**t

    def tail_after(self, T: int) -> float:
        """Σ_{s >= T+1} b_s (infinite when the geometric part diverges)."""
        start = T + 1
        explicit = sum(self.prefix[start:]) if start < len(self.prefix) else 0.0
        if self.scale == 0.0:
            return explicit
        if self.divergent:
            return math.inf
        first = max(start, len(self.prefix))
        return explicit + self.scale * self.ratio**first / (1.0 - self.ratio)

    def total(self) -> float:
        return self.term(0) + self.tail_after(0)


class Horizon(BaseModel):
    """``finite``: stages 0..T-1 with v_T ≡ 0. ``truncated``: infinite horizon cut at the
    least T whose bound tail is at most ``epsilon``."""

    model_config = ConfigDict(frozen=True)

    mode: Literal["finite", "truncated"] = "finite"
    T: Optional[int] = Field(default=None, ge=1, description="Number of stages (finite mode)")
    bounds: Optional[BoundSequence] = Field(
        default=None, description="Tail bounds; estimated when absent"
    )
    epsilon: float = Field(default=1e-6, gt=0.0)

    @model_validator(mode="after")
    def check_mode(self) -> "Horizon":
        if self.mode == "finite" and self.T is None:
            raise ValueError("finite horizon needs T")
        return self

    @classmethod
    def finite(cls, T: int) -> "Horizon":
        return cls(mode="finite", T=T)

    @classmethod
    def truncated(cls, bounds: Optional[BoundSequence] = None, epsilon: float = 1e-6) -> "Horizon":
        return cls(mode="truncated", bounds=bounds, epsilon=epsilon)


class DPModel(BaseModel):
    """Staged data {X_t, Γ_t, u_t} with horizon and discount."""

    model_config = ConfigDict(frozen=True)

    stages: Tuple[Stage, ...] = Field(..., min_length=1)
    horizon: Horizon = Field(default_factory=lambda: Horizon.finite(1))
    discount: float = Field(default=1.0, gt=0.0, le=1.0)
    terminal_grid: Optional[Grid] = Field(
        default=None, description="Action grid after the last listed stage"
    )

    @model_validator(mode="after")
    def check_chain(self) -> "DPModel":
        for t, (stage, following) in enumerate(zip(self.stages, self.stages[1:])):
            if stage.action_dim != following.state_dim:
                raise ValueError(
                    f"Stage {t} action dimension {stage.action_dim} differs from stage {t + 1} "
                    f"state dimension {following.state_dim}"
                )
        last = self.stages[-1]
        if self.terminal_grid is not None:
            check_grid(self.terminal_grid, last.action_dim, "Terminal grid")
        elif last.action_dim != last.state_dim:
            raise ValueError("terminal_grid is required when the last stage changes dimension")
        return self

    def stage_at(self, t: int) -> Stage:
        return self.stages[min(t, len(self.stages) - 1)]

    def cost_at(self, t: int) -> ExprNode:
        """u_t including the discount weight β^t."""
        cost = self.stage_at(t).cost
        if self.discount == 1.0:
            return cost
        return ScaleNode(factor=self.discount**t, child=cost)

    def state_grid(self, t: int) -> Grid:
        if t < len(self.stages):
            return self.stages[t].grid
        if self.terminal_grid is not None:
            return self.terminal_grid
        return self.stages[-1].grid

    def check_extension(self, last_stage: int) -> None:
        """Stationary repetition past the list needs the last stage to map X into X."""
        last = self.stages[-1]
        if last_stage >= len(self.stages) and last.action_dim != last.state_dim:
            raise DimensionMismatchError(
                f"Horizon reaches stage {last_stage} but the last listed stage maps dimension "
                f"{last.state_dim} to {last.action_dim}",
                expected=last.state_dim,
                got=last.action_dim,
            )

    def split(self, t: int) -> Tuple[List[int], List[int]]:
        """Indices of the x block and the y block in u_t's input."""
        n = self.stage_at(t).state_dim
        m = self.stage_at(t).action_dim
        return list(range(n)), list(range(n, n + m))
