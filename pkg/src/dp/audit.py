"""
Premise-gated checks on a solved value table.

Every check that rests on a hypothesis (policy point, regular cost, viability,
interiority, smoothness) refuses to run with PremiseError when the hypothesis is not
certified. Numerical audits compare table finite differences against the certified
objects with the interpolation tolerances of ``interpolation_tolerance``; an audit
that fails at a policy point is logged as a solver/tolerance alarm.
"""
import logging
from typing import Callable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from src.calculus.clarke import is_regular, lipschitz_bound, partial_gradient
from src.feasibility.sets import is_interior
from src.feasibility.viability import (
    DEFAULT_SAMPLES,
    ViabilityReport,
    check_lower_viability,
    check_upper_viability,
    sample_pairs,
)
from src.geometry.polytope import Polytope, Vector
from src.nsdp.exceptions import (
    InadmissibleProgramError,
    NonSingletonGradientError,
    PremiseError,
)
from src.nsdp.utils.log import get_logger, log_with_context

from .model import DPModel
from .solver import check_admissible, extract_policy, in_policy
from .table import ValueTable, is_infeasible

logger = get_logger(__name__)

VALUE_FLOOR = 1e-9
SLOPE_FLOOR = 1e-6


class InterpolationTolerance(BaseModel):
    """Error allowances of the multilinear table near a point."""

    curvature: float = Field(..., ge=0.0, description="Local second-difference bound M")
    spacing: float = Field(..., ge=0.0, description="Largest grid gap h")
    value_tol: float = Field(..., ge=0.0, description="max(2·M·h², floor)")
    slope_tol: float = Field(..., ge=0.0, description="max(2·M·h, floor)")


def _nearest_index(axis: Sequence[float], v: float) -> int:
    return int(np.argmin(np.abs(np.asarray(axis) - v)))


def estimate_curvature(table: ValueTable, t: int, x_bar: Sequence[float], window: int = 2) -> float:
    """Largest |second difference| of v_t at feasible nodes near ``x_bar``.

    The node nearest to ``x_bar`` is left out so that a kink sitting there does not
    inflate the bound.
    """
    if t > table.T_eff:
        return 0.0
    stage = table.stages[t]
    center = tuple(_nearest_index(axis, v) for axis, v in zip(stage.grid, x_bar))
    worst = 0.0
    for index in np.ndindex(*stage.shape):
        if index == center or any(abs(i - c) > window for i, c in zip(index, center)):
            continue
        for axis, breakpoints in enumerate(stage.grid):
            k = index[axis]
            if k == 0 or k == len(breakpoints) - 1:
                continue
            lo = index[:axis] + (k - 1,) + index[axis + 1 :]
            hi = index[:axis] + (k + 1,) + index[axis + 1 :]
            if stage.infeasible[lo] or stage.infeasible[index] or stage.infeasible[hi]:
                continue
            left = breakpoints[k] - breakpoints[k - 1]
            right = breakpoints[k + 1] - breakpoints[k]
            slope_change = (stage.values[hi] - stage.values[index]) / right - (
                stage.values[index] - stage.values[lo]
            ) / left
            worst = max(worst, abs(float(slope_change)) / (0.5 * (left + right)))
    return worst


def interpolation_tolerance(
    table: ValueTable,
    t: int,
    x_bar: Sequence[float],
    curvature_bound: Optional[float] = None,
) -> InterpolationTolerance:
    """Value tolerance 2·M·h² and slope tolerance 2·M·h at ``x_bar``.

    M is ``curvature_bound`` when given, else estimated from local second differences.
    """
    M = estimate_curvature(table, t, x_bar) if curvature_bound is None else curvature_bound
    h = table.spacing(t)
    return InterpolationTolerance(
        curvature=M,
        spacing=h,
        value_tol=max(2.0 * M * h * h, VALUE_FLOOR),
        slope_tol=max(2.0 * M * h, SLOPE_FLOOR),
    )


def _value(table: ValueTable, t: int, x: Sequence[float]) -> Optional[float]:
    v = table.value(t, x)
    return None if is_infeasible(v) else float(v)  # type: ignore[arg-type]


def _axis_steps(model: DPModel, t: int) -> List[float]:
    return [float(np.max(np.diff(axis))) for axis in model.state_grid(t)]


def _joint(x: Sequence[float], y: Sequence[float]) -> np.ndarray:
    return np.concatenate([np.asarray(x, dtype=float), np.asarray(y, dtype=float)])


def policy_map(model: DPModel, table: ValueTable, t: int) -> Callable[[Sequence[float]], Polytope]:
    """x -> G_t(x) as a candidate hull, for the viability checks."""
    return lambda x: extract_policy(model, table, x, t)


def _radius(model: DPModel, t: int, radius: Optional[float]) -> float:
    return max(_axis_steps(model, t)) if radius is None else radius


def _require_solved(table: ValueTable, t: int) -> None:
    if not 0 <= t <= table.T_eff:
        raise PremiseError(
            f"Stage {t} is outside the solved range 0..{table.T_eff}", premise="solved_horizon"
        )


# Bellman principle


class BellmanReport(BaseModel):
    """Per-step residuals v_t(x_t) − u_t(x_t, x_{t+1}) − v_{t+1}(x_{t+1})."""

    residuals: List[float]
    tolerances: List[float]

    @property
    def consistent(self) -> bool:
        """Every step is Bellman-consistent (residual ≈ 0)."""
        return all(abs(r) <= tol for r, tol in zip(self.residuals, self.tolerances))

    @property
    def sign_ok(self) -> bool:
        """Residuals never exceed their tolerance (they are ≤ 0 by the Bellman equation)."""
        return all(r <= tol for r, tol in zip(self.residuals, self.tolerances))


def bellman_residual(
    model: DPModel,
    table: ValueTable,
    program: Sequence[Sequence[float]],
    t0: int = 0,
    curvature_bound: Optional[float] = None,
) -> BellmanReport:
    """Residuals along an admissible program starting at stage ``t0``.

    Raises:
        InadmissibleProgramError: At the first infeasible step or infinite value
    """
    check_admissible(model, program, t0)
    residuals: List[float] = []
    tolerances: List[float] = []
    for offset, (x, y) in enumerate(zip(program, program[1:])):
        t = t0 + offset
        if t > table.T_eff:
            break
        here, there = _value(table, t, x), _value(table, t + 1, y)
        if here is None or there is None:
            raise InadmissibleProgramError(f"Program leaves the solved domain at step {t}", stage=t)
        cost = model.cost_at(t).value_at(_joint(x, y))
        residuals.append(here - cost - there)
        tol = interpolation_tolerance(table, t, x, curvature_bound).value_tol
        if t + 1 <= table.T_eff:
            tol += interpolation_tolerance(table, t + 1, y, curvature_bound).value_tol
        tolerances.append(tol)
    return BellmanReport(residuals=residuals, tolerances=tolerances)


# Generalized gradient of the value function


class DirectionalAudit(BaseModel):
    direction: Vector
    estimate: float = Field(..., description="Table secant estimate of v_t°(x̄; d)")
    support: float = Field(..., description="Support of ∂°_x u_t(x̄, ȳ) at d")
    tolerance: float
    ok: bool


class ValueSubdiffResult(BaseModel):
    """∂°_x u_t(x̄, ȳ), a certified superset of ∂°v_t(x̄), with its table audit."""

    stage: int
    x: Vector
    y: Vector
    polytope: Polytope
    audit: List[DirectionalAudit] = Field(default_factory=list)
    viability: Optional[ViabilityReport] = None

    @property
    def audit_ok(self) -> bool:
        return all(entry.ok for entry in self.audit)


def _require_policy_point(
    model: DPModel, table: ValueTable, t: int, x: Sequence[float], y: Sequence[float]
) -> None:
    hull = extract_policy(model, table, x, t)
    if not in_policy(hull, y):
        raise PremiseError(
            f"ȳ={tuple(y)} is not a policy point of stage {t} at x̄={tuple(x)} (policy {hull})",
            premise="policy_point",
        )


def _require_regular(model: DPModel, t: int, x: Sequence[float], y: Sequence[float]) -> None:
    report = is_regular(model.cost_at(t), _joint(x, y))
    if not report.is_regular:
        raise PremiseError(
            f"Cost of stage {t} not certified regular at ({tuple(x)}, {tuple(y)}): {report.trace}",
            premise="regular_cost",
        )


def _require_upper_viability(
    model: DPModel,
    table: ValueTable,
    t: int,
    x: Sequence[float],
    radius: Optional[float],
    samples: int,
    seed: int,
) -> ViabilityReport:
    report = check_upper_viability(
        policy_map(model, table, t),
        model.stage_at(t).feasibility,
        x,
        _radius(model, t, radius),
        samples,
        seed,
    )
    report.raise_for_status()
    return report


def _secant_estimate(
    table: ValueTable, t: int, x: np.ndarray, direction: np.ndarray, step: float
) -> Optional[float]:
    """max of the forward secants at x̄ and at x̄ − h·d (whichever stay on the table)."""
    center = _value(table, t, x)
    if center is None:
        return None
    secants = []
    forward = x + step * direction
    ahead = _value(table, t, forward) if table.stages[t].in_box(forward) else None
    if ahead is not None:
        secants.append((ahead - center) / step)
    backward = x - step * direction
    behind = _value(table, t, backward) if table.stages[t].in_box(backward) else None
    if behind is not None:
        secants.append((center - behind) / step)
    return max(secants) if secants else None


def value_subdiff_bound(
    model: DPModel,
    table: ValueTable,
    t: int,
    x_bar: Sequence[float],
    y_bar: Sequence[float],
    radius: Optional[float] = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    curvature_bound: Optional[float] = None,
) -> ValueSubdiffResult:
    """Return ∂°_x u_t(x̄, ȳ) ⊇ ∂°v_t(x̄) and audit it against table secants.

    Raises:
        PremiseError: policy_point, regular_cost or upper_viability not certified
    """
    _require_solved(table, t)
    x = np.asarray(x_bar, dtype=float)
    y = np.asarray(y_bar, dtype=float)
    _require_policy_point(model, table, t, x, y)
    _require_regular(model, t, x, y)
    viability = _require_upper_viability(model, table, t, x, radius, samples, seed)

    x_block, _ = model.split(t)
    polytope = partial_gradient(model.cost_at(t), x_block, _joint(x, y))

    tolerance = interpolation_tolerance(table, t, x, curvature_bound).slope_tol
    audit: List[DirectionalAudit] = []
    for axis, step in enumerate(_axis_steps(model, t)):
        for sign in (1.0, -1.0):
            d = np.zeros(x.size)
            d[axis] = sign
            estimate = _secant_estimate(table, t, x, d, step)
            if estimate is None:
                continue
            support = polytope.support(d)
            audit.append(
                DirectionalAudit(
                    direction=tuple(d),
                    estimate=estimate,
                    support=support,
                    tolerance=tolerance,
                    ok=estimate <= support + tolerance,
                )
            )
    result = ValueSubdiffResult(
        stage=t, x=tuple(x), y=tuple(y), polytope=polytope, audit=audit, viability=viability
    )
    if not result.audit_ok:
        log_with_context(
            logger,
            logging.WARNING,
            "solver/tolerance alarm: value secants exceed the generalized gradient bound",
            stage=t,
            x=tuple(x),
        )
    return result


class StrictDiffResult(BaseModel):
    gradient: Vector
    fd_gradient: Vector
    tolerance: float
    audit_ok: bool


def _central_gradient(model: DPModel, table: ValueTable, t: int, x: np.ndarray) -> np.ndarray:
    """Central differences of the table (one-sided at the box edge); zero past T_eff."""
    if t > table.T_eff:
        return np.zeros(x.size)
    stage = table.stages[t]
    center = _value(table, t, x)
    gradient = np.zeros(x.size)
    for axis, step in enumerate(_axis_steps(model, t)):
        e = np.zeros(x.size)
        e[axis] = step
        up = _value(table, t, x + e) if stage.in_box(x + e) else None
        down = _value(table, t, x - e) if stage.in_box(x - e) else None
        if up is not None and down is not None:
            gradient[axis] = (up - down) / (2.0 * step)
        elif up is not None and center is not None:
            gradient[axis] = (up - center) / step
        elif down is not None and center is not None:
            gradient[axis] = (center - down) / step
    return gradient


def strict_diff_value(
    model: DPModel,
    table: ValueTable,
    t: int,
    x_bar: Sequence[float],
    y_bar: Sequence[float],
    radius: Optional[float] = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    curvature_bound: Optional[float] = None,
) -> StrictDiffResult:
    """∇v_t(x̄) = ∇_x u_t(x̄, ȳ) when the partial gradient is a singleton.

    Raises:
        NonSingletonGradientError: If ∂°_x u_t(x̄, ȳ) has more than one generator
    """
    bound = value_subdiff_bound(
        model, table, t, x_bar, y_bar, radius, samples, seed, curvature_bound
    )
    if not bound.polytope.is_singleton:
        raise NonSingletonGradientError(
            f"∂°_x u_{t} at ({tuple(x_bar)}, {tuple(y_bar)}) is {bound.polytope}, not a singleton"
        )
    gradient = bound.polytope.matrix[0]
    x = np.asarray(x_bar, dtype=float)
    fd = _central_gradient(model, table, t, x)
    tolerance = 10.0 * interpolation_tolerance(table, t, x, curvature_bound).slope_tol
    ok = bool(np.max(np.abs(fd - gradient), initial=0.0) <= tolerance)
    if not ok:
        log_with_context(
            logger,
            logging.WARNING,
            "solver/tolerance alarm: strict derivative audit failed",
            stage=t,
        )
    return StrictDiffResult(
        gradient=tuple(float(v) for v in gradient),
        fd_gradient=tuple(float(v) for v in fd),
        tolerance=tolerance,
        audit_ok=ok,
    )


class StationarityResult(BaseModel):
    residual: float = Field(..., ge=0.0)
    gradient_y: Vector
    value_gradient: Vector
    tolerance: float


def interior_stationarity_check(
    model: DPModel,
    table: ValueTable,
    t: int,
    x_bar: Sequence[float],
    y_bar: Sequence[float],
    margin: float = 1e-8,
    curvature_bound: Optional[float] = None,
) -> StationarityResult:
    """‖∇_y u_t(x̄, ȳ) + ∇̃v_{t+1}(ȳ)‖ at an interior point of gph Γ_t with smooth cost.

    Raises:
        PremiseError: interior_point or smooth_cost not satisfied
    """
    x = np.asarray(x_bar, dtype=float)
    y = np.asarray(y_bar, dtype=float)
    if not is_interior(model.stage_at(t).feasibility, x, y, margin):
        raise PremiseError(
            f"({tuple(x)}, {tuple(y)}) is not interior to gph Γ_{t}", premise="interior_point"
        )
    report = is_regular(model.cost_at(t), _joint(x, y))
    if not (report.is_regular and report.smooth):
        raise PremiseError(
            f"Cost of stage {t} is not smooth at ({tuple(x)}, {tuple(y)})", premise="smooth_cost"
        )

    _, y_block = model.split(t)
    gradient_y = partial_gradient(model.cost_at(t), y_block, _joint(x, y)).matrix[0]
    value_gradient = _central_gradient(model, table, t + 1, y)
    residual = float(np.linalg.norm(gradient_y + value_gradient))
    tolerance = (
        interpolation_tolerance(table, t + 1, y, curvature_bound).slope_tol
        if t + 1 <= table.T_eff
        else SLOPE_FLOOR
    )
    return StationarityResult(
        residual=residual,
        gradient_y=tuple(float(v) for v in gradient_y),
        value_gradient=tuple(float(v) for v in value_gradient),
        tolerance=tolerance,
    )


class LipschitzAuditResult(BaseModel):
    declared: float = Field(..., description="ℓ_t from atom bounds on the stage box")
    observed: float = Field(..., description="Largest sampled |v_t(x) − v_t(x')| / ‖x − x'‖")
    tolerance: float
    ok: bool
    viability: ViabilityReport


def lipschitz_audit(
    model: DPModel,
    table: ValueTable,
    t: int,
    x_bar: Sequence[float],
    radius: Optional[float] = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    curvature_bound: Optional[float] = None,
) -> LipschitzAuditResult:
    """Sampled slopes of v_t around x̄ against the cost's Lipschitz bound ℓ_t.

    Raises:
        PremiseError: lower_viability violated on samples
    """
    _require_solved(table, t)
    x = np.asarray(x_bar, dtype=float)
    r = _radius(model, t, radius)
    viability = check_lower_viability(
        policy_map(model, table, t), model.stage_at(t).feasibility, x, r, samples, seed
    )
    viability.raise_for_status()

    state_grid, action_grid = model.state_grid(t), model.state_grid(t + 1)
    lower = [axis[0] for axis in state_grid] + [axis[0] for axis in action_grid]
    upper = [axis[-1] for axis in state_grid] + [axis[-1] for axis in action_grid]
    declared = lipschitz_bound(model.cost_at(t), lower, upper)

    stage = table.stages[t]
    observed = 0.0
    for a, b in sample_pairs(x, r, samples, seed + 1):
        a = np.clip(a, [axis[0] for axis in state_grid], [axis[-1] for axis in state_grid])
        b = np.clip(b, [axis[0] for axis in state_grid], [axis[-1] for axis in state_grid])
        gap = float(np.linalg.norm(a - b))
        va, vb = _value(table, t, a), _value(table, t, b)
        if gap == 0.0 or va is None or vb is None or not stage.in_box(a):
            continue
        observed = max(observed, abs(va - vb) / gap)
    tolerance = interpolation_tolerance(table, t, x, curvature_bound).slope_tol
    return LipschitzAuditResult(
        declared=declared,
        observed=observed,
        tolerance=tolerance,
        ok=observed <= declared + tolerance,
        viability=viability,
    )
