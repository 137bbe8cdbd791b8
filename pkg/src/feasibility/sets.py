"""
Parametrized polyhedral feasibility sets S(x) = {y : A y <= b + C x}.

A box is the special case with ±identity rows and C = 0; it keeps its bounds so that
projection becomes a clip. Cones are read off the rows active at (x, y).
"""
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.geometry.polytope import PolyhedralCone, Polytope, Vector
from src.geometry.simplex import LPStatus, solve_lp
from src.nsdp.exceptions import DimensionMismatchError, InfeasiblePointError, LPError
from src.nsdp.utils.log import get_logger

logger = get_logger(__name__)

FEASIBILITY_TOL = 1e-9
SET_ACTIVE_TOL = 1e-8
CONTINGENT_THETAS: Tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4)
CONTINGENT_TOL = 1e-6


class FeasibilitySet(BaseModel):
    """{y in R^action_dim : A y <= b + C x} for a state x in R^state_dim."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["box", "polyhedral"] = "polyhedral"
    state_dim: int = Field(..., ge=0)
    action_dim: int = Field(..., ge=1)
    A: Tuple[Vector, ...] = ()
    b: Vector = ()
    C: Tuple[Vector, ...] = ()
    lower: Optional[Vector] = Field(default=None, description="Box lower bounds")
    upper: Optional[Vector] = Field(default=None, description="Box upper bounds")

    @model_validator(mode="before")
    @classmethod
    def expand_box(cls, data: Any) -> Any:
        """Fill A, b, C from box bounds and default C to zero."""
        if not isinstance(data, dict):
            return data
        data = dict(data)
        if data.get("kind") == "box" and not data.get("A"):
            lower = list(data.get("lower") or [])
            upper = list(data.get("upper") or [])
            if len(lower) != len(upper):
                raise ValueError("box lower and upper must have the same length")
            m = len(lower)
            identity = np.eye(m)
            data["A"] = [tuple(row) for row in np.vstack([identity, -identity])]
            data["b"] = tuple(float(u) for u in upper) + tuple(-float(v) for v in lower)
            data.setdefault("action_dim", m)
            data.setdefault("state_dim", 0)
        if not data.get("C"):
            rows = len(data.get("A") or ())
            data["C"] = [tuple([0.0] * int(data.get("state_dim", 0)))] * rows
        return data

    @model_validator(mode="after")
    def check_shapes(self) -> "FeasibilitySet":
        rows = len(self.A)
        if len(self.b) != rows or len(self.C) != rows:
            raise ValueError(f"A has {rows} rows but b has {len(self.b)} and C has {len(self.C)}")
        if any(len(row) != self.action_dim for row in self.A):
            raise ValueError(f"Rows of A must have length action_dim={self.action_dim}")
        if any(len(row) != self.state_dim for row in self.C):
            raise ValueError(f"Rows of C must have length state_dim={self.state_dim}")
        if self.kind == "box":
            if self.lower is None or self.upper is None:
                raise ValueError("box needs lower and upper bounds")
            if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
                raise ValueError("box lower bound exceeds upper bound")
        return self

    @property
    def A_matrix(self) -> np.ndarray:
        return np.asarray(self.A, dtype=float).reshape(len(self.A), self.action_dim)

    @property
    def C_matrix(self) -> np.ndarray:
        return np.asarray(self.C, dtype=float).reshape(len(self.A), self.state_dim)

    @property
    def b_vector(self) -> np.ndarray:
        return np.asarray(self.b, dtype=float)

    @property
    def depends_on_state(self) -> bool:
        return bool(np.any(self.C_matrix != 0.0))

    def rhs(self, x: Sequence[float]) -> np.ndarray:
        """b + C x."""
        state = _state(self, x)
        return self.b_vector + self.C_matrix @ state

    def slack(self, x: Sequence[float], y: Sequence[float]) -> np.ndarray:
        """Componentwise b + C x − A y (nonnegative exactly when feasible)."""
        return self.rhs(x) - self.A_matrix @ _action(self, y)

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == "box":
            return {"kind": "box", "lower": list(self.lower or ()), "upper": list(self.upper or ()),
                    "state_dim": self.state_dim}
        return {
            "kind": "polyhedral",
            "state_dim": self.state_dim,
            "action_dim": self.action_dim,
            "A": [list(r) for r in self.A],
            "b": list(self.b),
            "C": [list(r) for r in self.C],
        }


def _state(S: FeasibilitySet, x: Sequence[float]) -> np.ndarray:
    # x-independent sets accept any state
    if S.state_dim == 0:
        return np.zeros(0)
    state = np.asarray(x, dtype=float).reshape(-1)
    if state.size != S.state_dim:
        raise DimensionMismatchError(
            f"State has dimension {state.size}, set expects {S.state_dim}",
            expected=S.state_dim,
            got=int(state.size),
        )
    return state


def _action(S: FeasibilitySet, y: Sequence[float]) -> np.ndarray:
    action = np.asarray(y, dtype=float).reshape(-1)
    if action.size != S.action_dim:
        raise DimensionMismatchError(
            f"Action has dimension {action.size}, set expects {S.action_dim}",
            expected=S.action_dim,
            got=int(action.size),
        )
    return action


def box(lower: Sequence[float], upper: Sequence[float], state_dim: int = 0) -> FeasibilitySet:
    """x-independent box [lower, upper]."""
    return FeasibilitySet(
        kind="box",
        lower=tuple(float(v) for v in lower),
        upper=tuple(float(v) for v in upper),
        state_dim=state_dim,
        action_dim=len(lower),
    )


def polyhedral(
    A: Sequence[Sequence[float]],
    b: Sequence[float],
    C: Optional[Sequence[Sequence[float]]] = None,
    state_dim: Optional[int] = None,
) -> FeasibilitySet:
    """{y : A y <= b + C x}; ``C`` defaults to zero of width ``state_dim``."""
    A_rows = [tuple(float(v) for v in row) for row in A]
    if not A_rows:
        raise ValueError("polyhedral set needs at least one row; use whole_space for R^m")
    if C is not None and len(C):
        C_rows = [tuple(float(v) for v in row) for row in C]
        width = len(C_rows[0])
    else:
        width = state_dim or 0
        C_rows = [tuple([0.0] * width)] * len(A_rows)
    return FeasibilitySet(
        kind="polyhedral",
        A=tuple(A_rows),
        b=tuple(float(v) for v in b),
        C=tuple(C_rows),
        state_dim=width,
        action_dim=len(A_rows[0]),
    )


def whole_space(action_dim: int, state_dim: int = 0) -> FeasibilitySet:
    return FeasibilitySet(kind="polyhedral", state_dim=state_dim, action_dim=action_dim)


def feasible(
    S: FeasibilitySet, x: Sequence[float], y: Sequence[float], tol: float = FEASIBILITY_TOL
) -> bool:
    """True iff A y <= b + C x + tol componentwise."""
    return bool(np.all(S.slack(x, y) >= -tol))


def active_rows(
    S: FeasibilitySet, x: Sequence[float], y: Sequence[float], active_tol: float = SET_ACTIVE_TOL
) -> List[int]:
    """Rows with A_i y − b_i − C_i x >= −active_tol·‖A_i‖."""
    slack = S.slack(x, y)
    norms = np.linalg.norm(S.A_matrix, axis=1)
    return [i for i in range(len(S.A)) if norms[i] > 0.0 and slack[i] <= active_tol * norms[i]]


def _require_feasible(
    S: FeasibilitySet, x: Sequence[float], y: Sequence[float], tol: float
) -> None:
    if not feasible(S, x, y, tol):
        worst = float(np.min(S.slack(x, y)))
        raise InfeasiblePointError(
            f"Point y={tuple(np.asarray(y, dtype=float))} violates S(x) by {-worst:.3e}"
        )


def normal_cone(
    S: FeasibilitySet, x: Sequence[float], y: Sequence[float], active_tol: float = SET_ACTIVE_TOL
) -> PolyhedralCone:
    """Cone generated by the active row normals; {0} at interior points."""
    _require_feasible(S, x, y, max(active_tol, FEASIBILITY_TOL))
    A = S.A_matrix
    return PolyhedralCone.from_rays([A[i] for i in active_rows(S, x, y, active_tol)], S.action_dim)


def tangent_cone(
    S: FeasibilitySet, x: Sequence[float], y: Sequence[float], active_tol: float = SET_ACTIVE_TOL
) -> FeasibilitySet:
    """{h : A_i h <= 0 for active i} as a homogeneous polyhedral set (no rows: whole space)."""
    _require_feasible(S, x, y, max(active_tol, FEASIBILITY_TOL))
    rows = active_rows(S, x, y, active_tol)
    if not rows:
        return whole_space(S.action_dim, S.state_dim)
    A = S.A_matrix
    return polyhedral([A[i] for i in rows], [0.0] * len(rows), state_dim=S.state_dim)


def project(S: FeasibilitySet, x: Sequence[float], w: Sequence[float]) -> Tuple[Vector, float]:
    """ℓ¹-nearest point of S(x) to ``w`` and its distance.

    Boxes clip; general sets solve an LP with free y split into positive parts.

    Raises:
        InfeasiblePointError: If S(x) is empty
    """
    target = _action(S, w)
    if S.kind == "box":
        clipped = np.clip(target, np.asarray(S.lower), np.asarray(S.upper))
        return tuple(float(v) for v in clipped), float(np.sum(np.abs(target - clipped)))
    if not S.A:
        return tuple(float(v) for v in target), 0.0

    A = S.A_matrix
    k, m = A.shape
    rhs = S.rhs(x)
    # Columns: y+ | y- | p | q | slack; rows: A y + s = b + Cx, y - p + q = w
    M = np.zeros((k + m, 4 * m + k))
    M[:k, :m] = A
    M[:k, m : 2 * m] = -A
    M[:k, 4 * m :] = np.eye(k)
    M[k:, :m] = np.eye(m)
    M[k:, m : 2 * m] = -np.eye(m)
    M[k:, 2 * m : 3 * m] = -np.eye(m)
    M[k:, 3 * m : 4 * m] = np.eye(m)
    cost = np.zeros(4 * m + k)
    cost[2 * m : 4 * m] = 1.0
    result = solve_lp(cost, M, np.concatenate([rhs, target]))
    if result.status == LPStatus.INFEASIBLE:
        raise InfeasiblePointError(f"S(x) is empty at x={tuple(np.asarray(x, dtype=float))}")
    if result.status != LPStatus.OPTIMAL or result.x is None or result.objective is None:
        raise LPError(f"Projection LP ended with status {result.status.value}")
    point = result.x[:m] - result.x[m : 2 * m]
    return tuple(float(v) for v in point), max(float(result.objective), 0.0)


def distance(S: FeasibilitySet, x: Sequence[float], w: Sequence[float]) -> float:
    """ℓ¹ distance from ``w`` to S(x)."""
    return project(S, x, w)[1]


def is_nonempty(S: FeasibilitySet, x: Sequence[float]) -> bool:
    try:
        project(S, x, np.zeros(S.action_dim))
    except InfeasiblePointError:
        return False
    return True


def is_interior(
    S: FeasibilitySet, x: Sequence[float], y: Sequence[float], margin: float = SET_ACTIVE_TOL
) -> bool:
    """Strict feasibility: every row holds with slack above ``margin``."""
    return bool(np.all(S.slack(x, y) > margin))


def intersects(
    S: FeasibilitySet, x: Sequence[float], hull: Polytope, tol: float = FEASIBILITY_TOL
) -> bool:
    """Whether the polytope ``hull`` meets S(x) relaxed by ``tol``, by an LP over convex weights."""
    if hull.dimension != S.action_dim:
        raise DimensionMismatchError(
            f"Polytope dimension {hull.dimension} differs from action dimension {S.action_dim}",
            expected=S.action_dim,
            got=hull.dimension,
        )
    if not S.A:
        return True
    G = hull.matrix
    k = len(S.A)
    j = G.shape[0]
    # Columns: λ | slack; rows: A Gᵀ λ + s = b + Cx + tol, Σλ = 1
    M = np.zeros((k + 1, j + k))
    M[:k, :j] = S.A_matrix @ G.T
    M[:k, j:] = np.eye(k)
    M[k, :j] = 1.0
    result = solve_lp(np.zeros(j + k), M, np.concatenate([S.rhs(x) + tol, [1.0]]))
    return result.status == LPStatus.OPTIMAL


def contingent_probe(
    S: FeasibilitySet,
    x: Sequence[float],
    y: Sequence[float],
    h: Sequence[float],
    theta_grid: Sequence[float] = CONTINGENT_THETAS,
    tol: float = CONTINGENT_TOL,
) -> bool:
    """Diagnostic for h in the contingent cone: min over θ of d(y + θh)/θ <= tol."""
    _require_feasible(S, x, y, FEASIBILITY_TOL)
    base = _action(S, y)
    step = _action(S, h)
    ratios = [distance(S, x, base + theta * step) / theta for theta in theta_grid]
    return min(ratios) <= tol


def block_diagonal(
    sets: Sequence[FeasibilitySet],
    placements: Sequence[Tuple[Sequence[int], Sequence[int]]],
    state_dim: int,
    action_dim: int,
) -> FeasibilitySet:
    """Stack sets acting on disjoint coordinate blocks of a larger (state, action) space.

    ``placements[k]`` gives the (state indices, action indices) of ``sets[k]``.
    """
    if len(sets) != len(placements):
        raise ValueError("Need one placement per set")
    if sets and all(s.kind == "box" for s in sets):
        lower = np.full(action_dim, -np.inf)
        upper = np.full(action_dim, np.inf)
        for S, (_, actions) in zip(sets, placements):
            lower[list(actions)] = S.lower
            upper[list(actions)] = S.upper
        if np.all(np.isfinite(lower)) and np.all(np.isfinite(upper)):
            return box(lower, upper, state_dim)

    A_rows: List[np.ndarray] = []
    C_rows: List[np.ndarray] = []
    b: List[float] = []
    for S, (states, actions) in zip(sets, placements):
        if len(states) != S.state_dim or len(actions) != S.action_dim:
            raise DimensionMismatchError(
                f"Placement sizes ({len(states)}, {len(actions)}) do not match set dimensions "
                f"({S.state_dim}, {S.action_dim})"
            )
        for i in range(len(S.A)):
            a = np.zeros(action_dim)
            c = np.zeros(state_dim)
            a[list(actions)] = S.A_matrix[i]
            if states:
                c[list(states)] = S.C_matrix[i]
            A_rows.append(a)
            C_rows.append(c)
            b.append(float(S.b_vector[i]))
    if not A_rows:
        return whole_space(action_dim, state_dim)
    return FeasibilitySet(
        kind="polyhedral",
        state_dim=state_dim,
        action_dim=action_dim,
        A=tuple(tuple(float(v) for v in r) for r in A_rows),
        b=tuple(b),
        C=tuple(tuple(float(v) for v in r) for r in C_rows),
    )
