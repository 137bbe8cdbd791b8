"""
Finite-atom Leibniz rules: generalized gradients of integral costs, normals to sets of
selections and the value-function bound, all kept per atom.
"""
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from src.calculus.clarke import is_regular, partial_gradient
from src.calculus.expression import ExprNode, ScaleNode
from src.calculus.oracle import fd_generalized_derivative
from src.dp.audit import StrictDiffResult, policy_map, strict_diff_value
from src.dp.model import DPModel, grid_spacing
from src.dp.solver import extract_policy, in_policy
from src.dp.table import ValueTable
from src.feasibility.sets import normal_cone
from src.feasibility.viability import DEFAULT_SAMPLES, ViabilityReport, check_upper_viability
from src.geometry.membership import cones_equal
from src.geometry.polytope import GradientPolytope, PolyhedralCone, Vector
from src.nsdp.exceptions import InfeasiblePointError, PremiseError
from src.nsdp.utils.log import get_logger

from .model import StochasticDPModel
from .reduction import (
    action_layout,
    flatten,
    reduce_to_deterministic,
    reduced_cost,
    reduced_feasibility,
    state_layout,
    to_euclidean,
)

logger = get_logger(__name__)

Block = Literal["x", "y"]

AUDIT_THETAS: Tuple[float, ...] = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7)
AUDIT_TOL = 1e-6

Family = Sequence[Sequence[float]]


def atom_cost(smodel: StochasticDPModel, t: int, atom: int) -> ExprNode:
    """φ_t(·,·,ω) with the discount weight β^t."""
    cost = smodel.stage_at(t).costs[atom]
    if smodel.discount == 1.0:
        return cost
    return ScaleNode(factor=smodel.discount**t, child=cost)


def require_adapted_pair(
    smodel: StochasticDPModel, t: int, f_bar: Family, g_bar: Family
) -> Tuple[np.ndarray, np.ndarray]:
    """Flatten (f̄, ḡ) at stage t, refusing non-adapted inputs."""
    return flatten(f_bar, state_layout(smodel, t)), flatten(g_bar, action_layout(smodel, t))


def _joint(f: Sequence[float], g: Sequence[float]) -> np.ndarray:
    return np.concatenate([np.asarray(f, dtype=float), np.asarray(g, dtype=float)])


def require_regular_atoms(smodel: StochasticDPModel, t: int, f_bar: Family, g_bar: Family) -> None:
    for atom in range(smodel.tree.size):
        report = is_regular(atom_cost(smodel, t, atom), _joint(f_bar[atom], g_bar[atom]))
        if not report.is_regular:
            raise PremiseError(
                f"Stage {t} cost of atom {smodel.tree.label(atom)} not certified regular: "
                f"{report.trace}",
                premise="regular_cost",
            )


def _partials(
    smodel: StochasticDPModel, t: int, f_bar: Family, g_bar: Family, block: Block
) -> Tuple[GradientPolytope, ...]:
    n = smodel.stage_at(t).state_dim
    m = smodel.stage_at(t).action_dim
    indices = list(range(n)) if block == "x" else list(range(n, n + m))
    return tuple(
        partial_gradient(atom_cost(smodel, t, atom), indices, _joint(f_bar[atom], g_bar[atom]))
        for atom in range(smodel.tree.size)
    )


def integral_subdiff(
    smodel: StochasticDPModel, t: int, f_bar: Family, g_bar: Family, block: Block = "x"
) -> Tuple[GradientPolytope, ...]:
    """Per-atom ∂°_x φ_t (block "x") or ∂°_y φ_t (block "y") at (f̄(ω), ḡ(ω)).

    Under regularity the family is the generalized gradient of the integral cost for
    the μ-weighted pairing.

    Raises:
        AdaptednessError: If f̄ or ḡ is not adapted
        PremiseError: If some atom cost is not certified regular
    """
    require_adapted_pair(smodel, t, f_bar, g_bar)
    require_regular_atoms(smodel, t, f_bar, g_bar)
    return _partials(smodel, t, f_bar, g_bar, block)


def integral_directional_derivative(
    smodel: StochasticDPModel, t: int, f_bar: Family, g_bar: Family, h: Family
) -> float:
    """Σ_ω μ(ω)·σ(∂°φ_t(f̄(ω), ḡ(ω), ω); h(ω)) for a joint per-atom direction h."""
    require_adapted_pair(smodel, t, f_bar, g_bar)
    require_regular_atoms(smodel, t, f_bar, g_bar)
    n = smodel.stage_at(t).state_dim
    m = smodel.stage_at(t).action_dim
    total = 0.0
    for atom, mu in enumerate(smodel.tree.probabilities):
        gradient = partial_gradient(
            atom_cost(smodel, t, atom), list(range(n + m)), _joint(f_bar[atom], g_bar[atom])
        )
        total += mu * gradient.support(h[atom])
    return total


class IntegralAudit(BaseModel):
    exact: float = Field(..., description="μ-weighted sum of per-atom supports")
    fd: float = Field(..., description="Finite-difference φ° of the reduced cost")
    tolerance: float
    ok: bool


def audit_integral_subdiff(
    smodel: StochasticDPModel,
    t: int,
    f_bar: Family,
    g_bar: Family,
    h: Family,
    tol: float = AUDIT_TOL,
    seed: int = 0,
) -> IntegralAudit:
    """Compare the per-atom formula with the FD oracle on the reduced integral cost.

    The direction h must be adapted like (f̄, ḡ) so that it has a reduced form.
    """
    n = smodel.stage_at(t).state_dim
    exact = integral_directional_derivative(smodel, t, f_bar, g_bar, h)
    x, y = require_adapted_pair(smodel, t, f_bar, g_bar)
    hx, hy = require_adapted_pair(smodel, t, [v[:n] for v in h], [v[n:] for v in h])
    cost = reduced_cost(smodel, t)
    if smodel.discount != 1.0:
        cost = ScaleNode(factor=smodel.discount**t, child=cost)
    fd = fd_generalized_derivative(
        cost, np.concatenate([x, y]), np.concatenate([hx, hy]), AUDIT_THETAS, seed=seed
    )
    return IntegralAudit(exact=exact, fd=fd.value, tolerance=tol, ok=abs(exact - fd.value) <= tol)


def selection_normal_cone(
    smodel: StochasticDPModel, t: int, f_bar: Family, g_bar: Family
) -> Tuple[PolyhedralCone, ...]:
    """Per-atom N(ḡ(ω); Φ_t(f̄(ω), ω)).

    Raises:
        InfeasiblePointError: If ḡ(ω) ∉ Φ_t(f̄(ω), ω) for some atom
    """
    stage = smodel.stage_at(t)
    cones: List[PolyhedralCone] = []
    for atom in range(smodel.tree.size):
        try:
            cones.append(normal_cone(stage.feasibility[atom], f_bar[atom], g_bar[atom]))
        except InfeasiblePointError as e:
            raise InfeasiblePointError(f"Atom {smodel.tree.label(atom)} at stage {t}: {e}") from e
    return tuple(cones)


def product_normal_cone(
    smodel: StochasticDPModel, t: int, family: Sequence[PolyhedralCone]
) -> PolyhedralCone:
    """Per-atom cones in reduced coordinates: cell rays weighted by μ(cell)."""
    layout = action_layout(smodel, t)
    rays: List[np.ndarray] = []
    for k, cell in enumerate(layout.cells):
        weight = sum(layout.probabilities[a] for a in cell)
        for ray in family[cell[0]].rays:
            embedded = np.zeros(layout.size)
            embedded[layout.block(k)] = weight * np.asarray(ray)
            rays.append(embedded)
    return PolyhedralCone.from_rays(rays, layout.size)


def normal_cones_agree(smodel: StochasticDPModel, t: int, f_bar: Family, g_bar: Family) -> bool:
    """Per-atom selection cones match the normal cone of the reduced product set."""
    family = selection_normal_cone(smodel, t, f_bar, g_bar)
    x, y = require_adapted_pair(smodel, t, f_bar, g_bar)
    reduced = normal_cone(reduced_feasibility(smodel, t), x, y)
    return cones_equal(reduced, product_normal_cone(smodel, t, family))


class StochasticSubdiffResult(BaseModel):
    """Per-atom ∂°_x φ_t, a certified superset of ∂°v_t(f̄) atom-wise."""

    stage: int
    family: Tuple[GradientPolytope, ...]
    strict: Optional[Tuple[Vector, ...]] = Field(
        default=None, description="∇_x φ_t per atom when all singletons"
    )
    reduced_gradient: Optional[Vector] = Field(default=None, description="to_euclidean(strict)")
    audit: Optional[StrictDiffResult] = None
    viability: ViabilityReport


def require_reduced_policy(
    reduced: DPModel, table: ValueTable, t: int, x: np.ndarray, y: np.ndarray
) -> None:
    hull = extract_policy(reduced, table, x, t)
    if not in_policy(hull, y):
        raise PremiseError(
            f"Reduced ḡ={tuple(y)} is not a policy point of stage {t} (policy {hull})",
            premise="policy_point",
        )


def reduced_upper_viability(
    reduced: DPModel,
    table: ValueTable,
    t: int,
    x: np.ndarray,
    radius: Optional[float],
    samples: int,
    seed: int,
) -> ViabilityReport:
    r = grid_spacing(reduced.state_grid(t)) if radius is None else radius
    report = check_upper_viability(
        policy_map(reduced, table, t), reduced.stage_at(t).feasibility, x, r, samples, seed
    )
    report.raise_for_status()
    return report


def stochastic_value_subdiff(
    smodel: StochasticDPModel,
    table: ValueTable,
    t: int,
    f_bar: Family,
    g_bar: Family,
    radius: Optional[float] = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    reduced: Optional[DPModel] = None,
) -> StochasticSubdiffResult:
    """Per-atom ∂°_x φ_t(f̄(ω), ḡ(ω), ω) at a reduced policy point.

    ``table`` is the solved table of the reduced model. When every atom polytope is a
    singleton the strict-derivative family is returned and audited on the table.

    Raises:
        AdaptednessError: If f̄ or ḡ is not adapted
        PremiseError: policy_point, regular_cost or upper_viability not certified
    """
    model = reduce_to_deterministic(smodel) if reduced is None else reduced
    x, y = require_adapted_pair(smodel, t, f_bar, g_bar)
    if not 0 <= t <= table.T_eff:
        raise PremiseError(
            f"Stage {t} is outside the solved range 0..{table.T_eff}", premise="solved_horizon"
        )
    require_reduced_policy(model, table, t, x, y)
    require_regular_atoms(smodel, t, f_bar, g_bar)
    viability = reduced_upper_viability(model, table, t, x, radius, samples, seed)

    family = _partials(smodel, t, f_bar, g_bar, "x")
    result = StochasticSubdiffResult(stage=t, family=family, viability=viability)
    if all(p.is_singleton for p in family):
        strict = tuple(p.generators[0] for p in family)
        gradient = to_euclidean(strict, state_layout(smodel, t))
        audit = strict_diff_value(model, table, t, x, y, radius, samples, seed)
        result = result.model_copy(
            update={
                "strict": strict,
                "reduced_gradient": tuple(float(v) for v in gradient),
                "audit": audit,
            }
        )
    return result
