"""
Backward induction on grids.

For each stage t from T_eff down to 0 and each grid node x,

    v_t(x) = min over candidate actions y of u_t(x, y) + ṽ_{t+1}(y),

with ṽ_{t+1} the multilinear interpolant of the next table (v_{T_eff+1} ≡ 0). Candidates
are the successor grid nodes feasible for Γ_t(x) plus the ℓ¹ projections of the
infeasible ones onto Γ_t(x); candidates outside the successor grid box are dropped.
Each node is a self-contained unit of work, so thread parallelism over the nodes of a
stage never changes the result.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.feasibility.sets import FEASIBILITY_TOL, project
from src.geometry.polytope import Polytope, dedupe_vectors
from src.nsdp.exceptions import (
    AllInfeasibleStageError,
    EmptyPolicySetError,
    InadmissibleProgramError,
    InfeasiblePointError,
)
from src.nsdp.utils.log import get_logger, log_with_context, timed_operation

from .model import DPModel, grid_nodes
from .summability import check_summability
from .table import INFEASIBLE, StageValues, Value, ValueTable, is_infeasible

logger = get_logger(__name__)

POLICY_TOL = 1e-9


def candidate_actions(
    model: DPModel, t: int, x: Sequence[float], project_candidates: bool = True
) -> np.ndarray:
    """Candidate actions at state ``x`` of stage t, as rows."""
    stage = model.stage_at(t)
    S = stage.feasibility
    successor = model.state_grid(t + 1)
    nodes = grid_nodes(successor)
    slack = S.rhs(x)[:, None] - S.A_matrix @ nodes.T
    ok = np.all(slack >= -FEASIBILITY_TOL, axis=0) if len(S.A) else np.ones(len(nodes), dtype=bool)
    rows: List[Sequence[float]] = list(nodes[ok])
    if project_candidates and not np.all(ok):
        lower = np.array([axis[0] for axis in successor])
        upper = np.array([axis[-1] for axis in successor])
        for node in nodes[~ok]:
            try:
                point, _ = project(S, x, node)
            except InfeasiblePointError:
                return np.zeros((0, stage.action_dim))
            p = np.asarray(point)
            if np.all(p >= lower) and np.all(p <= upper):
                rows.append(p)
    if not rows:
        return np.zeros((0, stage.action_dim))
    return np.asarray(dedupe_vectors(rows), dtype=float)


def _bellman_node(
    model: DPModel,
    t: int,
    x: np.ndarray,
    following: Optional[StageValues],
    policy_tol: float,
    project_candidates: bool,
) -> Tuple[Value, Tuple[Tuple[float, ...], ...]]:
    """Minimum of u_t(x, y) + ṽ_{t+1}(y) over candidates, with all minimizers within tol."""
    Y = candidate_actions(model, t, x, project_candidates)
    if not len(Y):
        return INFEASIBLE, ()
    if following is None:
        continuation = [0.0] * len(Y)
    else:
        continuation = [following.value(y) for y in Y]
    keep = [k for k, v in enumerate(continuation) if not is_infeasible(v)]
    if not keep:
        return INFEASIBLE, ()
    Y = Y[keep]
    XY = np.hstack([np.tile(x, (len(Y), 1)), Y])
    immediate = model.cost_at(t).values(XY)
    totals = [
        float(immediate[i]) + float(continuation[k])  # type: ignore[arg-type]
        for i, k in enumerate(keep)
    ]
    best = min(totals)
    argmin = tuple(
        tuple(float(v) for v in Y[i])
        for i, total in enumerate(totals)
        if total <= best + policy_tol
    )
    return best, argmin


def solve_value(
    model: DPModel,
    epsilon: Optional[float] = None,
    parallelism: int = 1,
    policy_tol: float = POLICY_TOL,
    project_candidates: bool = True,
    max_horizon: int = 10_000,
) -> ValueTable:
    """Solve the Bellman equation backward from v_{T_eff+1} ≡ 0.

    Args:
        model: Deterministic model
        epsilon: Tail tolerance overriding the model's horizon epsilon
        parallelism: Worker threads per stage (1 = serial)
        policy_tol: Tie tolerance for recorded minimizers
        project_candidates: Add ℓ¹ projections of infeasible successor nodes
        max_horizon: Cap on the truncation search

    Returns:
        ValueTable for stages 0..T_eff

    Raises:
        DivergentBoundsError: If the cost bounds are not summable
        AllInfeasibleStageError: If no node of some stage has a feasible action
    """
    summability = check_summability(model, epsilon, max_horizon)
    summability.raise_for_status()
    assert summability.T_eff is not None
    T_eff = summability.T_eff
    model.check_extension(T_eff)

    solved: List[StageValues] = []
    following: Optional[StageValues] = None
    with timed_operation(logger, "solve_value", T_eff=T_eff, parallelism=parallelism):
        for t in range(T_eff, -1, -1):
            grid = model.state_grid(t)
            nodes = grid_nodes(grid)

            def work(
                x: np.ndarray, t: int = t, nxt: Optional[StageValues] = following
            ) -> Tuple[Value, Tuple]:
                return _bellman_node(model, t, x, nxt, policy_tol, project_candidates)

            if parallelism > 1:
                with ThreadPoolExecutor(max_workers=parallelism) as pool:
                    results = list(pool.map(work, nodes))
            else:
                results = [work(x) for x in nodes]

            shape = tuple(len(axis) for axis in grid)
            mask = np.array([is_infeasible(v) for v, _ in results]).reshape(shape)
            if mask.all():
                raise AllInfeasibleStageError(
                    f"No grid node of stage {t} has a feasible action", stage=t
                )
            values = np.array([0.0 if is_infeasible(v) else v for v, _ in results]).reshape(shape)
            following = StageValues(
                stage=t,
                grid=grid,
                values=values,
                infeasible=mask,
                policies=tuple(p for _, p in results),
            )
            solved.append(following)
            log_with_context(
                logger,
                logging.DEBUG,
                "Stage solved",
                stage=t,
                nodes=len(nodes),
                infeasible=int(mask.sum()),
            )

    return ValueTable(
        stages=tuple(reversed(solved)),
        T_eff=T_eff,
        tail_error=summability.tail or 0.0,
        horizon_mode=model.horizon.mode,
        policy_tol=policy_tol,
    )


def extract_policy(
    model: DPModel,
    table: ValueTable,
    x: Sequence[float],
    t: int = 0,
    tol: Optional[float] = None,
    project_candidates: bool = True,
) -> Polytope:
    """G_t(x): every candidate action attaining the Bellman minimum within ``tol``.

    Raises:
        EmptyPolicySetError: If no feasible candidate exists at ``x``
    """
    state = np.asarray(x, dtype=float).reshape(-1)
    following = table.stages[t + 1] if t + 1 <= table.T_eff else None
    value, argmin = _bellman_node(
        model, t, state, following, table.policy_tol if tol is None else tol, project_candidates
    )
    if is_infeasible(value):
        raise EmptyPolicySetError(f"No feasible action at stage {t}, x={tuple(state)}", state=state)
    return Polytope.from_points(argmin)


def in_policy(hull: Polytope, y: Sequence[float], tol: float = 1e-9) -> bool:
    """Whether ``y`` is one of the candidate actions of ``hull`` (sup-norm within tol)."""
    target = np.asarray(y, dtype=float)
    return bool(np.any(np.max(np.abs(hull.matrix - target), axis=1) <= tol))


def rollout(
    model: DPModel,
    table: ValueTable,
    x0: Sequence[float],
    t0: int = 0,
    tol: Optional[float] = None,
) -> List[Tuple[float, ...]]:
    """Forward program x_{t0}, ..., x_{T_eff+1} following the first policy candidate."""
    program = [tuple(float(v) for v in x0)]
    for t in range(t0, table.T_eff + 1):
        hull = extract_policy(model, table, program[-1], t, tol)
        program.append(hull.generators[0])
    return program


def check_admissible(model: DPModel, program: Sequence[Sequence[float]], t0: int = 0) -> None:
    """Raise InadmissibleProgramError at the first step with x_{t+1} outside Γ_t(x_t)."""
    for offset, (x, y) in enumerate(zip(program, program[1:])):
        t = t0 + offset
        stage = model.stage_at(t)
        if len(x) != stage.state_dim or len(y) != stage.action_dim:
            raise InadmissibleProgramError(f"Program step {t} has wrong dimensions", stage=t)
        slack = stage.feasibility.slack(x, y)
        if np.any(slack < -FEASIBILITY_TOL):
            raise InadmissibleProgramError(
                f"Program violates Γ_{t} at step {t}: slack {float(slack.min()):.3e}", stage=t
            )


def program_cost(model: DPModel, program: Sequence[Sequence[float]], t0: int = 0) -> float:
    """Σ_t u_t(x_t, x_{t+1}) along an admissible program, summed from the last step back."""
    check_admissible(model, program, t0)
    total = 0.0
    steps = list(zip(program, program[1:]))
    for offset in range(len(steps) - 1, -1, -1):
        x, y = steps[offset]
        total = model.cost_at(t0 + offset).value_at(np.concatenate([x, y])) + total
    return total


def is_optimal_program(
    model: DPModel,
    table: ValueTable,
    program: Sequence[Sequence[float]],
    tol: float = 1e-9,
) -> bool:
    """Program cost from x_0 matches v_0(x_0) within ``tol``."""
    value = table.value(0, program[0])
    if is_infeasible(value):
        return False
    return abs(program_cost(model, program) - float(value)) <= tol  # type: ignore[arg-type]
