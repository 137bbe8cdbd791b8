"""
Summability of cost bounds and the effective truncation horizon.
"""
import logging
import math
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field

from src.calculus.expression import ExprNode
from src.feasibility.sets import FeasibilitySet, feasible
from src.nsdp.exceptions import DivergentBoundsError
from src.nsdp.utils.log import get_logger, log_with_context

from .model import BoundSequence, DPModel, Grid, grid_nodes

logger = get_logger(__name__)

MAX_HORIZON = 10_000


class SummabilityReport(BaseModel):
    """ok with (T_eff, tail) or fail with the offending (stage, bound)."""

    ok: bool
    T_eff: Optional[int] = Field(default=None, description="Last solved stage index")
    tail: Optional[float] = Field(default=None, description="Σ_{t > T_eff} b_t")
    epsilon: Optional[float] = None
    stage: Optional[int] = None
    bound: Optional[float] = None
    estimated: bool = Field(default=False, description="Bounds came from grid maximization")
    profile: List[float] = Field(default_factory=list, description="Tail after each T up to T_eff")

    def raise_for_status(self) -> None:
        if not self.ok:
            raise DivergentBoundsError(
                f"Cost bounds are not summable (stage {self.stage}, bound {self.bound})",
                stage=self.stage,
                bound=self.bound,
            )


def grid_sup(cost: ExprNode, S: FeasibilitySet, state_grid: Grid, action_grid: Grid) -> float:
    """max |cost(x, y)| over grid nodes x and feasible successor grid nodes y."""
    actions = grid_nodes(action_grid)
    best = 0.0
    for x in grid_nodes(state_grid):
        ok = [y for y in actions if feasible(S, x, y)]
        if not ok:
            continue
        XY = np.hstack([np.tile(x, (len(ok), 1)), np.asarray(ok)])
        best = max(best, float(np.max(np.abs(cost.values(XY)))))
    return best


def estimate_bounds(model: DPModel) -> BoundSequence:
    """Grid maximum of |u_t| over feasible (node, successor node) pairs per listed stage.

    Past the list the last stage repeats, so its bound continues geometrically with the
    discount as ratio.
    """
    maxima = [
        grid_sup(stage.cost, stage.feasibility, model.state_grid(t), model.state_grid(t + 1))
        for t, stage in enumerate(model.stages)
    ]
    beta = model.discount
    prefix = tuple(beta**t * m for t, m in enumerate(maxima))
    return BoundSequence(prefix=prefix, scale=maxima[-1], ratio=beta)


def check_summability(
    model: DPModel, epsilon: Optional[float] = None, max_horizon: int = MAX_HORIZON
) -> SummabilityReport:
    """Decide summability and find T_eff: the least T with Σ_{t>T} b_t <= epsilon.

    A finite horizon of T stages is always ok with T_eff = T − 1 and zero tail.
    """
    horizon = model.horizon
    if horizon.mode == "finite":
        assert horizon.T is not None
        return SummabilityReport(ok=True, T_eff=horizon.T - 1, tail=0.0, epsilon=0.0)

    eps = horizon.epsilon if epsilon is None else epsilon
    estimated = horizon.bounds is None
    bounds = estimate_bounds(model) if estimated else horizon.bounds
    assert bounds is not None

    for t, b in enumerate(bounds.prefix):
        if not math.isfinite(b) or b < 0:
            return SummabilityReport(ok=False, stage=t, bound=b, epsilon=eps, estimated=estimated)
    if bounds.divergent:
        stage = len(bounds.prefix)
        log_with_context(logger, logging.WARNING, "Divergent cost bounds", stage=stage)
        return SummabilityReport(
            ok=False, stage=stage, bound=bounds.term(stage), epsilon=eps, estimated=estimated
        )

    profile: List[float] = []
    for T in range(max_horizon + 1):
        tail = bounds.tail_after(T)
        profile.append(tail)
        if tail <= eps:
            log_with_context(logger, logging.INFO, "Summability ok", T_eff=T, tail=f"{tail:.3e}")
            return SummabilityReport(
                ok=True, T_eff=T, tail=tail, epsilon=eps, estimated=estimated, profile=profile
            )
    return SummabilityReport(
        ok=False,
        stage=max_horizon,
        bound=bounds.term(max_horizon),
        epsilon=eps,
        estimated=estimated,
    )
