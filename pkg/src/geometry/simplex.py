"""
Dense two-phase tableau simplex with Bland's rule.

Solves ``min c^T x  s.t.  A x = b, x >= 0``. Problem sizes are desk scale (a few
hundred columns), so a dense numpy tableau and an anti-cycling pivot rule are
preferred over speed. Phase one also yields a Farkas certificate when the system
is infeasible, which the membership test turns into a separating direction.
"""
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.nsdp.exceptions import DimensionMismatchError, LPError
from src.nsdp.utils.log import get_logger

logger = get_logger(__name__)

PIVOT_TOL = 1e-11
FEASIBILITY_TOL = 1e-9
PRIMAL_TOL = 1e-9
MAX_ITERATIONS = 50_000


class LPStatus(str, Enum):
    """Terminal states of the solver."""

    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LPResult(BaseModel):
    """Outcome of ``solve_lp``.

    ``duals`` are the equality multipliers y of the original rows. At an optimum they
    satisfy ``A^T y <= c`` (up to tolerance). For an infeasible system they form a
    Farkas certificate: ``A^T y <= 0`` and ``b^T y > 0``.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    status: LPStatus
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    duals: Optional[np.ndarray] = None
    phase_one_objective: float = 0.0
    iterations: int = 0


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row, :] /= tableau[row, col]
    for r in range(tableau.shape[0]):
        if r != row and tableau[r, col] != 0.0:
            tableau[r, :] -= tableau[r, col] * tableau[row, :]


def _entering(cost_row: np.ndarray, allowed: int) -> int:
    # Bland: lowest index with negative reduced cost
    candidates = np.flatnonzero(cost_row[:allowed] < -PIVOT_TOL)
    return int(candidates[0]) if candidates.size else -1


def _leaving(tableau: np.ndarray, col: int, basis: Sequence[int]) -> int:
    rows = tableau.shape[0] - 1
    column = tableau[:rows, col]
    eligible = np.flatnonzero(column > PIVOT_TOL)
    if not eligible.size:
        return -1
    ratios = tableau[eligible, -1] / column[eligible]
    best = ratios.min()
    cutoff = best + PIVOT_TOL * max(1.0, abs(best))
    ties = [int(r) for r, ratio in zip(eligible, ratios) if ratio <= cutoff]
    # Bland: among ties pick the row whose basic variable has the lowest index
    return min(ties, key=lambda r: basis[r])


def _run(tableau: np.ndarray, basis: List[int], allowed: int, iterations: int) -> tuple[bool, int]:
    while True:
        if iterations >= MAX_ITERATIONS:
            raise LPError(f"Simplex iteration limit reached ({MAX_ITERATIONS})")
        col = _entering(tableau[-1, :-1], allowed)
        if col == -1:
            return True, iterations
        row = _leaving(tableau, col, basis)
        if row == -1:
            return False, iterations
        _pivot(tableau, row, col)
        basis[row] = col
        iterations += 1


def solve_lp(
    c: Sequence[float],
    A_eq: np.ndarray,
    b_eq: Sequence[float],
    feas_tol: float = FEASIBILITY_TOL,
) -> LPResult:
    """Minimize ``c^T x`` subject to ``A_eq x = b_eq`` and ``x >= 0``.

    Args:
        c: Objective coefficients, length n
        A_eq: Constraint matrix of shape (m, n)
        b_eq: Right-hand side, length m
        feas_tol: Phase-one objective above which the system is declared infeasible

    Returns:
        LPResult with status, primal solution, objective and duals
    """
    cost = np.asarray(c, dtype=float).reshape(-1)
    A = np.asarray(A_eq, dtype=float)
    b = np.asarray(b_eq, dtype=float).reshape(-1)
    n = cost.size
    if A.size == 0:
        A = A.reshape(b.size, n)
    m = A.shape[0]
    if A.shape != (m, n) or b.size != m:
        raise DimensionMismatchError(
            f"LP shapes disagree: A {A.shape}, b {b.shape}, c {cost.shape}", expected=m, got=b.size
        )

    if m == 0:
        if np.any(cost < -PIVOT_TOL):
            return LPResult(status=LPStatus.UNBOUNDED)
        return LPResult(status=LPStatus.OPTIMAL, x=np.zeros(n), objective=0.0, duals=np.zeros(0))

    signs = np.where(b < 0.0, -1.0, 1.0)
    A = A * signs[:, None]
    b = b * signs

    # Phase one: artificial identity block, minimize the artificial sum
    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = A
    tableau[:m, n : n + m] = np.eye(m)
    tableau[:m, -1] = b
    tableau[m, :n] = -A.sum(axis=0)
    tableau[m, -1] = -b.sum()
    basis = list(range(n, n + m))

    _, iterations = _run(tableau, basis, allowed=n + m, iterations=0)
    phase_one = float(-tableau[m, -1])
    if phase_one > feas_tol:
        farkas = signs * (1.0 - tableau[m, n : n + m])
        logger.debug(
            f"LP infeasible: phase-one objective {phase_one:.3e} after {iterations} pivots"
        )
        return LPResult(
            status=LPStatus.INFEASIBLE,
            duals=farkas,
            phase_one_objective=phase_one,
            iterations=iterations,
        )

    # Drive zero-valued artificials out of the basis on their largest structural entry
    for row, var in enumerate(basis):
        if var < n or n == 0 or abs(tableau[row, -1]) > PIVOT_TOL:
            continue
        entries = np.abs(tableau[row, :n])
        col = int(np.argmax(entries))
        if entries[col] > PIVOT_TOL:
            _pivot(tableau, row, col)
            basis[row] = col
            iterations += 1

    # Phase two: artificials stay (cost 0) but may never re-enter
    tableau[m, :] = 0.0
    tableau[m, :n] = cost
    for row, var in enumerate(basis):
        if var < n and cost[var] != 0.0:
            tableau[m, :] -= cost[var] * tableau[row, :]

    bounded, iterations = _run(tableau, basis, allowed=n, iterations=iterations)
    if not bounded:
        return LPResult(
            status=LPStatus.UNBOUNDED, phase_one_objective=phase_one, iterations=iterations
        )

    x = np.zeros(n)
    for row, var in enumerate(basis):
        if var < n:
            x[var] = tableau[row, -1]
    _check_primal(A, b, x, feas_tol)
    x = np.maximum(x, 0.0)
    duals = signs * (-tableau[m, n : n + m])
    return LPResult(
        status=LPStatus.OPTIMAL,
        x=x,
        objective=float(cost @ x),
        duals=duals,
        phase_one_objective=phase_one,
        iterations=iterations,
    )


def _check_primal(A: np.ndarray, b: np.ndarray, x: np.ndarray, feas_tol: float) -> None:
    """Refuse an optimal basis whose primal is not feasible for the original rows."""
    tol = feas_tol + PRIMAL_TOL * max(1.0, float(np.max(np.abs(b), initial=0.0)))
    lowest = float(np.min(x, initial=0.0))
    residual = float(np.max(np.abs(A @ x - b), initial=0.0))
    if lowest < -tol or residual > tol:
        raise LPError(
            f"Simplex primal is not feasible: min x {lowest:.3e}, row residual {residual:.3e}"
        )
