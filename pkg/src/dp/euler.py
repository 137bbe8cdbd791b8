"""
Euler inclusion checks: 0 ∈ ∂°_y u_t(x̄, ȳ) + ∂°_x u_{t+1}(ȳ, z̄) + N(ȳ; Γ_t(x̄)).
"""
import logging
from typing import Dict, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from src.calculus.clarke import is_regular, partial_gradient
from src.feasibility.sets import normal_cone
from src.feasibility.viability import DEFAULT_SAMPLES, check_upper_viability
from src.geometry.membership import (
    MembershipCertificate,
    Verdict,
    contains_zero,
    distance_to_origin,
)
from src.geometry.polytope import GradientPolytope, PolyhedralCone, Polytope, Vector
from src.nsdp.exceptions import InadmissibleProgramError, InfeasiblePointError, PremiseError
from src.nsdp.utils.log import get_logger, log_with_context

from .audit import policy_map
from .model import DPModel, grid_spacing
from .solver import extract_policy, in_policy
from .table import ValueTable

logger = get_logger(__name__)


class EulerCertificate(BaseModel):
    """The three sets of the inclusion at (x̄, ȳ, z̄) and the membership certificate."""

    stage: int
    x: Vector
    y: Vector
    z: Vector
    cost_part: GradientPolytope = Field(..., description="∂°_y u_t(x̄, ȳ)")
    next_part: GradientPolytope = Field(..., description="∂°_x u_{t+1}(ȳ, z̄); {0} past T_eff")
    cone: PolyhedralCone = Field(..., description="N(ȳ; Γ_t(x̄))")
    certificate: MembershipCertificate
    distance: float = Field(..., ge=0.0, description="ℓ¹ distance of 0 to the sum")
    on_policy: bool = Field(..., description="ȳ ∈ G_t(x̄) and z̄ ∈ G_{t+1}(ȳ)")
    premises: Dict[str, str] = Field(default_factory=dict)

    @property
    def member(self) -> bool:
        return self.certificate.verdict == Verdict.MEMBER

    @property
    def alarm(self) -> bool:
        """Non-member at a policy point contradicts the necessary condition."""
        return self.on_policy and not self.member


def _regular_or_raise(model: DPModel, t: int, point: np.ndarray, premises: Dict[str, str]) -> None:
    report = is_regular(model.cost_at(t), point)
    if not report.is_regular:
        raise PremiseError(
            f"Cost of stage {t} not certified regular at {tuple(point)}: {report.trace}",
            premise="regular_cost",
        )
    premises[f"regular_cost_{t}"] = "certified"


def _viable_or_raise(
    model: DPModel,
    table: ValueTable,
    t: int,
    x: np.ndarray,
    radius: Optional[float],
    samples: int,
    seed: int,
    premises: Dict[str, str],
) -> None:
    r = grid_spacing(model.state_grid(t)) if radius is None else radius
    report = check_upper_viability(
        policy_map(model, table, t), model.stage_at(t).feasibility, x, r, samples, seed
    )
    report.raise_for_status()
    premises[f"upper_viability_{t}"] = report.verdict.value


def euler_check(
    model: DPModel,
    table: ValueTable,
    t: int,
    x_bar: Sequence[float],
    y_bar: Sequence[float],
    z_bar: Sequence[float],
    radius: Optional[float] = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> EulerCertificate:
    """Certify or refute the Euler inclusion at (x̄, ȳ, z̄).

    Premises gated: regularity of u_t and u_{t+1} and upper viability of G_t around x̄
    and G_{t+1} around ȳ. Policy membership is recorded, not gated, so off-policy
    triples yield the expected rejection.

    Raises:
        InadmissibleProgramError: If ȳ ∉ Γ_t(x̄)
        PremiseError: Named premise not certified
    """
    if not 0 <= t <= table.T_eff:
        raise PremiseError(
            f"Stage {t} is outside the solved range 0..{table.T_eff}", premise="solved_horizon"
        )
    x = np.asarray(x_bar, dtype=float)
    y = np.asarray(y_bar, dtype=float)
    z = np.asarray(z_bar, dtype=float)
    stage = model.stage_at(t)
    try:
        cone = normal_cone(stage.feasibility, x, y)
    except InfeasiblePointError as e:
        raise InadmissibleProgramError(f"ȳ={tuple(y)} is not in Γ_{t}(x̄): {e}", stage=t) from e

    has_next = t + 1 <= table.T_eff
    premises: Dict[str, str] = {}
    _regular_or_raise(model, t, np.concatenate([x, y]), premises)
    if has_next:
        _regular_or_raise(model, t + 1, np.concatenate([y, z]), premises)
    _viable_or_raise(model, table, t, x, radius, samples, seed, premises)
    if has_next:
        _viable_or_raise(model, table, t + 1, y, radius, samples, seed, premises)

    _, y_block = model.split(t)
    cost_part = partial_gradient(model.cost_at(t), y_block, np.concatenate([x, y]))
    if has_next:
        x_block, _ = model.split(t + 1)
        next_part = partial_gradient(model.cost_at(t + 1), x_block, np.concatenate([y, z]))
    else:
        next_part = Polytope.singleton(np.zeros(stage.action_dim))

    on_policy = in_policy(extract_policy(model, table, x, t), y)
    if has_next:
        on_policy = on_policy and in_policy(extract_policy(model, table, y, t + 1), z)

    certificate = contains_zero([cost_part, next_part], cone)
    distance = distance_to_origin([cost_part, next_part], cone)
    result = EulerCertificate(
        stage=t,
        x=tuple(x),
        y=tuple(y),
        z=tuple(z),
        cost_part=cost_part,
        next_part=next_part,
        cone=cone,
        certificate=certificate,
        distance=distance,
        on_policy=on_policy,
        premises=premises,
    )
    if result.alarm:
        log_with_context(
            logger,
            logging.WARNING,
            "solver/tolerance alarm: Euler inclusion fails at a policy point",
            stage=t,
            x=tuple(x),
            y=tuple(y),
            separator=certificate.separator,
        )
    return result
