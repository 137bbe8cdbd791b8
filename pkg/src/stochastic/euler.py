"""
Pointwise stochastic Euler inclusion, one membership test per atom.

No integration is involved: atom ω is checked on
∂°_y φ_t(f̄(ω), ḡ(ω), ω) + ∂°_x φ_{t+1}(ḡ(ω), z̄(ω), ω) + N(ḡ(ω); Φ_t(f̄(ω), ω)).
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from src.calculus.clarke import partial_gradient
from src.dp.euler import EulerCertificate
from src.dp.model import DPModel
from src.dp.solver import extract_policy, in_policy
from src.dp.table import ValueTable
from src.feasibility.viability import DEFAULT_SAMPLES
from src.geometry.membership import contains_zero, distance_to_origin
from src.geometry.polytope import Polytope
from src.nsdp.exceptions import InadmissibleProgramError, InfeasiblePointError, PremiseError
from src.nsdp.utils.log import get_logger, log_with_context

from .calculus import (
    Family,
    atom_cost,
    reduced_upper_viability,
    require_adapted_pair,
    require_regular_atoms,
    selection_normal_cone,
)
from .model import StochasticDPModel
from .reduction import action_layout, flatten, reduce_to_deterministic

logger = get_logger(__name__)


class AtomEulerCertificate(EulerCertificate):
    atom: int
    probability: float = Field(..., gt=0.0)


class StochasticEulerResult(BaseModel):
    """Per-atom certificates; the inclusion holds when every atom is member."""

    stage: int
    certificates: Tuple[AtomEulerCertificate, ...]
    on_policy: bool
    premises: Dict[str, str] = Field(default_factory=dict)

    @property
    def member(self) -> bool:
        return all(c.member for c in self.certificates)

    @property
    def failing_atoms(self) -> List[int]:
        return [c.atom for c in self.certificates if not c.member]


def stochastic_euler_check(
    smodel: StochasticDPModel,
    table: ValueTable,
    t: int,
    f_bar: Family,
    g_bar: Family,
    next_action: Family,
    radius: Optional[float] = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    reduced: Optional[DPModel] = None,
    parallelism: int = 1,
) -> StochasticEulerResult:
    """Check the Euler inclusion atom by atom at (f̄, ḡ, γ_{t+1}(ḡ)).

    ``table`` is the solved table of the reduced model; viability and policy membership
    are evaluated on the reduced problem.

    Raises:
        AdaptednessError: If f̄, ḡ or the next action is not adapted
        InadmissibleProgramError: If ḡ(ω) ∉ Φ_t(f̄(ω), ω) for some atom
        PremiseError: Named premise not certified
    """
    if not 0 <= t <= table.T_eff:
        raise PremiseError(
            f"Stage {t} is outside the solved range 0..{table.T_eff}", premise="solved_horizon"
        )
    model = reduce_to_deterministic(smodel) if reduced is None else reduced
    x, y = require_adapted_pair(smodel, t, f_bar, g_bar)
    has_next = t + 1 <= table.T_eff
    z = flatten(next_action, action_layout(smodel, t + 1)) if has_next else None

    try:
        cones = selection_normal_cone(smodel, t, f_bar, g_bar)
    except InfeasiblePointError as e:
        raise InadmissibleProgramError(str(e), stage=t) from e

    premises: Dict[str, str] = {}
    require_regular_atoms(smodel, t, f_bar, g_bar)
    premises[f"regular_cost_{t}"] = "certified"
    if has_next:
        require_regular_atoms(smodel, t + 1, g_bar, next_action)
        premises[f"regular_cost_{t + 1}"] = "certified"
    premises[f"upper_viability_{t}"] = reduced_upper_viability(
        model, table, t, x, radius, samples, seed
    ).verdict.value
    if has_next:
        premises[f"upper_viability_{t + 1}"] = reduced_upper_viability(
            model, table, t + 1, y, radius, samples, seed
        ).verdict.value

    on_policy = in_policy(extract_policy(model, table, x, t), y)
    if has_next:
        assert z is not None
        on_policy = on_policy and in_policy(extract_policy(model, table, y, t + 1), z)

    stage = smodel.stage_at(t)
    n, m = stage.state_dim, stage.action_dim

    def check(atom: int) -> AtomEulerCertificate:
        f = np.asarray(f_bar[atom], dtype=float)
        g = np.asarray(g_bar[atom], dtype=float)
        cost_part = partial_gradient(
            atom_cost(smodel, t, atom), list(range(n, n + m)), np.concatenate([f, g])
        )
        h = np.asarray(next_action[atom], dtype=float)
        if has_next:
            next_part = partial_gradient(
                atom_cost(smodel, t + 1, atom), list(range(m)), np.concatenate([g, h])
            )
        else:
            next_part = Polytope.singleton(np.zeros(m))
        certificate = contains_zero([cost_part, next_part], cones[atom])
        return AtomEulerCertificate(
            stage=t,
            x=tuple(f),
            y=tuple(g),
            z=tuple(h),
            cost_part=cost_part,
            next_part=next_part,
            cone=cones[atom],
            certificate=certificate,
            distance=distance_to_origin([cost_part, next_part], cones[atom]),
            on_policy=on_policy,
            premises=premises,
            atom=atom,
            probability=smodel.tree.probabilities[atom],
        )

    atoms = range(smodel.tree.size)
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            certificates = tuple(pool.map(check, atoms))
    else:
        certificates = tuple(check(atom) for atom in atoms)

    result = StochasticEulerResult(
        stage=t, certificates=certificates, on_policy=on_policy, premises=premises
    )
    if on_policy and not result.member:
        log_with_context(
            logger,
            logging.WARNING,
            "solver/tolerance alarm: stochastic Euler inclusion fails at a policy point",
            stage=t,
            atoms=result.failing_atoms,
        )
    return result
