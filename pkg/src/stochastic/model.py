"""
Stochastic DP model on a scenario tree: per-atom costs φ_t(·,·,ω) and sets Φ_t(·,ω).
"""
import math
from typing import Iterable, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.calculus.expression import Expr
from src.dp.model import BoundSequence, Grid, Horizon, check_grid
from src.feasibility.sets import FeasibilitySet
from src.nsdp.exceptions import AdaptednessError

from .tree import Diagnostic, ScenarioTree


class StochasticStage(BaseModel):
    """One period of the scenario-tree model; per-atom data indexed by atom."""

    model_config = ConfigDict(frozen=True)

    state_dim: int = Field(..., ge=1, description="dim E_t")
    grid: Grid = Field(..., description="Per-axis breakpoints of E_t, reused for every cell block")
    costs: Tuple[Expr, ...] = Field(..., min_length=1, description="φ_t(·,·,ω) per atom")
    feasibility: Tuple[FeasibilitySet, ...] = Field(
        ..., min_length=1, description="Φ_t(·,ω) per atom"
    )
    lipschitz: Optional[Tuple[float, ...]] = Field(
        default=None, description="Declared k_t(ω) per atom"
    )

    @model_validator(mode="after")
    def check_stage(self) -> "StochasticStage":
        check_grid(self.grid, self.state_dim, "Stage grid")
        if len(self.costs) != len(self.feasibility):
            raise ValueError(
                f"{len(self.costs)} costs but {len(self.feasibility)} feasibility sets"
            )
        action_dims = {S.action_dim for S in self.feasibility}
        if len(action_dims) != 1:
            raise ValueError(f"Per-atom sets disagree on action dimension: {sorted(action_dims)}")
        for k, (cost, S) in enumerate(zip(self.costs, self.feasibility)):
            if S.state_dim not in (0, self.state_dim):
                raise ValueError(
                    f"Atom {k}: set state_dim {S.state_dim} differs from {self.state_dim}"
                )
            if cost.dim != self.state_dim + S.action_dim:
                expected = self.state_dim + S.action_dim
                raise ValueError(f"Atom {k}: cost takes {cost.dim} inputs, expected {expected}")
        if self.lipschitz is not None and len(self.lipschitz) != len(self.costs):
            raise ValueError("Declared Lipschitz data needs one value per atom")
        return self

    @property
    def action_dim(self) -> int:
        return self.feasibility[0].action_dim


class StochasticDPModel(BaseModel):
    """Tree, stages, horizon and the integrability data of the costs."""

    model_config = ConfigDict(frozen=True)

    tree: ScenarioTree
    stages: Tuple[StochasticStage, ...] = Field(..., min_length=1)
    horizon: Horizon = Field(default_factory=lambda: Horizon.finite(1))
    discount: float = Field(default=1.0, gt=0.0, le=1.0)
    terminal_grid: Optional[Grid] = None
    p: float = Field(
        default=2.0, ge=1.0, description="Nominal L^p exponent; no effect on finite spaces"
    )
    atom_bounds: Optional[Tuple[BoundSequence, ...]] = Field(
        default=None, description="Per-atom sup bounds of φ_t(·,·,ω) over t"
    )
    envelope: Optional[Tuple[float, ...]] = Field(default=None, description="α(ω) per atom")

    @model_validator(mode="after")
    def check_model(self) -> "StochasticDPModel":
        n = self.tree.size
        for t, stage in enumerate(self.stages):
            if len(stage.costs) != n:
                raise ValueError(f"Stage {t} lists {len(stage.costs)} atoms, tree has {n}")
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
        for name in ("atom_bounds", "envelope"):
            data = getattr(self, name)
            if data is not None and len(data) != n:
                raise ValueError(f"{name} needs one entry per atom")
        if not math.isinf(self.p) and self.p < 1.0:
            raise ValueError("p must lie in [1, inf]")
        return self

    def stage_at(self, t: int) -> StochasticStage:
        return self.stages[min(t, len(self.stages) - 1)]

    def action_grid(self, t: int) -> Grid:
        if t + 1 < len(self.stages):
            return self.stages[t + 1].grid
        if self.terminal_grid is not None:
            return self.terminal_grid
        return self.stages[-1].grid


def cell_constancy(
    model: StochasticDPModel, stages: Optional[Iterable[int]] = None
) -> List[Diagnostic]:
    """Costs and sets of stage t must agree on every cell of partition(t).

    ``stages`` restricts the check; by default every listed stage is checked.
    """
    diagnostics: List[Diagnostic] = []
    for t in range(len(model.stages)) if stages is None else stages:
        stage = model.stage_at(t)
        for cell in model.tree.partition(t):
            first = cell[0]
            for atom in cell[1:]:
                for what, data in (("cost", stage.costs), ("feasibility", stage.feasibility)):
                    if data[atom] != data[first]:
                        diagnostics.append(
                            Diagnostic(
                                stage=t,
                                check=f"{what}_cell_constancy",
                                message=(
                                    f"Stage {t} {what} differs between atoms {first} "
                                    f"and {atom} of cell {list(cell)}"
                                ),
                                cells=(cell,),
                            )
                        )
    return diagnostics


def require_cell_constancy(
    model: StochasticDPModel, stages: Optional[Iterable[int]] = None
) -> None:
    diagnostics = cell_constancy(model, stages)
    if diagnostics:
        first = diagnostics[0]
        cell = first.cells[0]
        raise AdaptednessError(first.message, stage=first.stage or 0, cell=cell, atoms=cell[:2])
