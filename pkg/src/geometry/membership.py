"""
Certified test for 0 ∈ P_1 + ... + P_K + cone(R), and the ℓ¹ distance to the origin.

Both reduce to LPs over convex multipliers λ_k (one simplex per polytope) and conic
multipliers ν >= 0. A member verdict carries the multipliers (witness); a non-member
verdict carries a direction h with σ_{sum}(h) < 0 and <h, r> <= 0 for every ray, taken
from a max-margin LP over the unit sup-norm ball.

Membership is decided on normalized data: generators are divided by the largest
generator norm and rays by their own norms. Both are positive rescalings, so the
verdict does not depend on a common factor; residual and margin are reported in the
normalized units.
"""
from enum import Enum
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.nsdp.exceptions import DimensionMismatchError, IllConditionedError, LPError
from src.nsdp.utils.log import get_logger

from .polytope import PolyhedralCone, Polytope, Vector
from .simplex import LPStatus, solve_lp

logger = get_logger(__name__)

MEMBERSHIP_TOL = 1e-9
MARGIN_TOL = 1e-9
MAX_GENERATOR_NORM = 1e12
# Below this generator norm the data is compared without rescaling
SCALE_FLOOR = 1e-12
CLOSEST_POINT_BOUND = 1e6


class Verdict(str, Enum):
    MEMBER = "member"
    NON_MEMBER = "non_member"


class Witness(BaseModel):
    """Convex weights per polytope and conic weights per ray reproducing the origin."""

    model_config = ConfigDict(frozen=True)

    part_weights: Tuple[Tuple[float, ...], ...]
    ray_weights: Tuple[float, ...] = ()


class MembershipCertificate(BaseModel):
    """Verdict of ``contains_zero`` together with the evidence for it."""

    model_config = ConfigDict(frozen=True)

    verdict: Verdict
    witness: Optional[Witness] = None
    separator: Optional[Vector] = Field(
        default=None, description="Direction h with max over the sum set of <h,.> < 0"
    )
    margin: Optional[float] = Field(
        default=None, description="-σ_sum(h) on the normalized generators"
    )
    residual: float = Field(
        default=0.0, ge=0.0, description="Sup-norm reconstruction error, normalized"
    )
    scale: float = Field(
        default=1.0, gt=0.0, description="Largest generator norm the data was divided by"
    )

    @property
    def is_member(self) -> bool:
        return self.verdict == Verdict.MEMBER


class _Normalized(NamedTuple):
    scale: float
    parts: List[np.ndarray]
    rays: np.ndarray
    ray_norms: np.ndarray
    dimension: int


def _validate(parts: Sequence[Polytope], cone: PolyhedralCone) -> int:
    dimension = cone.dimension
    for index, part in enumerate(parts):
        if part.dimension != dimension:
            raise DimensionMismatchError(
                f"Part {index} has dimension {part.dimension}, cone has {dimension}",
                expected=dimension,
                got=part.dimension,
            )
        if part.matrix.size and np.max(np.linalg.norm(part.matrix, axis=1)) > MAX_GENERATOR_NORM:
            raise IllConditionedError(f"Part {index} has a generator with norm above 1e12")
    if cone.rays and np.max(np.linalg.norm(cone.matrix, axis=1)) > MAX_GENERATOR_NORM:
        raise IllConditionedError("Cone has a ray with norm above 1e12")
    return dimension


def _normalize(parts: Sequence[Polytope], cone: PolyhedralCone) -> _Normalized:
    dimension = _validate(parts, cone)
    largest = max((float(np.max(np.linalg.norm(p.matrix, axis=1))) for p in parts), default=0.0)
    scale = largest if largest > SCALE_FLOOR else 1.0
    ray_norms = np.linalg.norm(cone.matrix, axis=1)
    ray_norms = np.where(ray_norms > 0.0, ray_norms, 1.0)
    return _Normalized(
        scale=scale,
        parts=[part.matrix / scale for part in parts],
        rays=cone.matrix / ray_norms[:, None],
        ray_norms=ray_norms,
        dimension=dimension,
    )


def _constraint_matrix(
    matrices: Sequence[np.ndarray], rays: np.ndarray, dimension: int
) -> np.ndarray:
    """Columns [g; e_k] per generator of part k, then [r; 0] per ray."""
    count = len(matrices)
    columns: List[np.ndarray] = []
    for k, matrix in enumerate(matrices):
        selector = np.zeros(count)
        selector[k] = 1.0
        for generator in matrix:
            columns.append(np.concatenate([generator, selector]))
    for ray in rays:
        columns.append(np.concatenate([ray, np.zeros(count)]))
    if not columns:
        return np.zeros((dimension + count, 0))
    return np.column_stack(columns)


def _split_weights(
    x: np.ndarray, matrices: Sequence[np.ndarray]
) -> Tuple[List[np.ndarray], np.ndarray]:
    weights, offset = [], 0
    for matrix in matrices:
        size = matrix.shape[0]
        weights.append(x[offset : offset + size])
        offset += size
    return weights, x[offset:]


def max_margin_separator(
    matrices: Sequence[np.ndarray], rays: np.ndarray, dimension: int
) -> np.ndarray:
    """Direction h with ‖h‖∞ <= 1 and <r, h> <= 0 maximizing -Σ_k max_i <g_ki, h>.

    Variables are h = h⁺ - h⁻, per-part supports s_k = s⁺_k - s⁻_k, the margin t >= 0 and
    one slack per inequality row.
    """
    d, count = dimension, len(matrices)
    generator_rows = sum(matrix.shape[0] for matrix in matrices)
    ray_rows = rays.shape[0]
    rows = generator_rows + 1 + ray_rows + d
    h_plus, h_minus = 0, d
    s_plus, s_minus = 2 * d, 2 * d + count
    t_col = 2 * d + 2 * count
    slack = t_col + 1
    A = np.zeros((rows, slack + rows))
    b = np.zeros(rows)

    row = 0
    for k, matrix in enumerate(matrices):
        for generator in matrix:
            A[row, h_plus : h_plus + d] = generator
            A[row, h_minus : h_minus + d] = -generator
            A[row, s_plus + k] = -1.0
            A[row, s_minus + k] = 1.0
            row += 1
    A[row, s_plus : s_plus + count] = 1.0
    A[row, s_minus : s_minus + count] = -1.0
    A[row, t_col] = 1.0
    row += 1
    for ray in rays:
        A[row, h_plus : h_plus + d] = ray
        A[row, h_minus : h_minus + d] = -ray
        row += 1
    for i in range(d):
        A[row, h_plus + i] = 1.0
        A[row, h_minus + i] = 1.0
        b[row] = 1.0
        row += 1
    A[:, slack:] = np.eye(rows)

    c = np.zeros(A.shape[1])
    c[t_col] = -1.0
    result = solve_lp(c, A, b)
    if result.status != LPStatus.OPTIMAL or result.x is None:
        raise LPError(f"Separator LP ended with status {result.status.value}")
    return result.x[h_plus : h_plus + d] - result.x[h_minus : h_minus + d]


def _member_certificate(data: _Normalized, x: np.ndarray, tol: float) -> MembershipCertificate:
    weights, ray_weights = _split_weights(x, data.parts)
    point = np.zeros(data.dimension)
    for matrix, lam in zip(data.parts, weights):
        point += lam @ matrix
    if ray_weights.size:
        point += ray_weights @ data.rays
    simplex_error = max((abs(float(lam.sum()) - 1.0) for lam in weights), default=0.0)
    residual = max(float(np.max(np.abs(point), initial=0.0)), simplex_error)
    if residual > tol:
        raise LPError(f"Member witness residual {residual:.3e} exceeds tolerance {tol:.1e}")
    return MembershipCertificate(
        verdict=Verdict.MEMBER,
        witness=Witness(
            part_weights=tuple(tuple(float(v) for v in lam) for lam in weights),
            ray_weights=tuple(float(v) for v in ray_weights * data.scale / data.ray_norms),
        ),
        residual=residual,
        scale=data.scale,
    )


def contains_zero(
    parts: Sequence[Polytope],
    cone: PolyhedralCone,
    tol: float = MEMBERSHIP_TOL,
    margin_tol: float = MARGIN_TOL,
) -> MembershipCertificate:
    """Decide 0 ∈ Σ_k parts[k] + cone by phase-one simplex on normalized data.

    When phase one reports infeasibility but no separator reaches ``margin_tol``, the
    origin lies within tolerance of the sum set and the ℓ¹-closest point is the witness.

    Args:
        parts: Polytopes to add (may be empty)
        cone: Polyhedral cone added to the sum; its dimension fixes the space
        tol: Feasibility residual accepted for a member witness
        margin_tol: Minimum separation margin required of a separator

    Returns:
        MembershipCertificate with witness (member) or separator (non_member)

    Raises:
        LPError: If neither a witness nor a separator passes its soundness check
    """
    data = _normalize(parts, cone)
    A = _constraint_matrix(data.parts, data.rays, data.dimension)
    b = np.concatenate([np.zeros(data.dimension), np.ones(len(parts))])
    result = solve_lp(np.zeros(A.shape[1]), A, b, feas_tol=tol)
    if result.status == LPStatus.OPTIMAL:
        assert result.x is not None
        return _member_certificate(data, result.x, tol)

    direction = max_margin_separator(data.parts, data.rays, data.dimension)
    size = float(np.max(np.abs(direction), initial=0.0))
    margin, cone_excess = 0.0, 0.0
    if size > 0.0:
        direction = direction / size
        margin = -sum(float(np.max(matrix @ direction)) for matrix in data.parts)
        cone_excess = float(np.max(data.rays @ direction, initial=0.0))
        if margin >= margin_tol and cone_excess <= tol:
            return MembershipCertificate(
                verdict=Verdict.NON_MEMBER,
                separator=tuple(float(v) for v in direction),
                margin=margin,
                scale=data.scale,
            )

    distance, x = _closest_point(data.parts, data.rays, data.dimension, CLOSEST_POINT_BOUND)
    if distance <= tol:
        logger.debug(
            f"Phase one {result.phase_one_objective:.3e} overruled by closest point "
            f"at {distance:.3e}"
        )
        return _member_certificate(data, x, tol)
    raise LPError(
        f"No sound certificate: separator margin {margin:.3e}, cone excess {cone_excess:.3e}, "
        f"closest point at {distance:.3e}"
    )


def _closest_point(
    matrices: Sequence[np.ndarray], rays: np.ndarray, dimension: int, bound: float
) -> Tuple[float, np.ndarray]:
    """ℓ¹-closest point of the sum set to the origin: (distance, multipliers [λ | ν])."""
    base = _constraint_matrix(matrices, rays, dimension)
    n_base = base.shape[1]
    n_rays = rays.shape[0]
    count = len(matrices)

    # Columns: [base | p | q | slack]; rows: coordinates, simplices, ray caps
    rows = dimension + count + n_rays
    cols = n_base + 2 * dimension + n_rays
    A = np.zeros((rows, cols))
    A[: dimension + count, :n_base] = base
    A[:dimension, n_base : n_base + dimension] = -np.eye(dimension)
    A[:dimension, n_base + dimension : n_base + 2 * dimension] = np.eye(dimension)
    ray_offset = n_base - n_rays
    for j in range(n_rays):
        A[dimension + count + j, ray_offset + j] = 1.0
        A[dimension + count + j, n_base + 2 * dimension + j] = 1.0
    b = np.concatenate([np.zeros(dimension), np.ones(count), np.full(n_rays, float(bound))])
    c = np.zeros(cols)
    c[n_base : n_base + 2 * dimension] = 1.0

    result = solve_lp(c, A, b)
    if result.status != LPStatus.OPTIMAL or result.objective is None or result.x is None:
        raise LPError(f"Distance LP ended with status {result.status.value}")
    return max(result.objective, 0.0), result.x[:n_base]


def distance_to_origin(
    parts: Sequence[Polytope],
    cone: PolyhedralCone,
    bound: float = 1e6,
) -> float:
    """Minimum ℓ¹ norm of Σλg + Σνr over the simplices, with 0 <= ν <= bound.

    Reported as "residual (ℓ¹)" in the units of the input; zero when ``contains_zero``
    is member and ``bound`` admits a witness.
    """
    if bound <= 0:
        raise ValueError("bound must be positive")
    dimension = _validate(parts, cone)
    distance, _ = _closest_point([part.matrix for part in parts], cone.matrix, dimension, bound)
    return distance


def cone_contains(
    cone: PolyhedralCone, vector: Sequence[float], tol: float = MEMBERSHIP_TOL
) -> bool:
    """True iff ``vector`` is a nonnegative combination of the cone's rays."""
    v = np.asarray(vector, dtype=float)
    if v.shape != (cone.dimension,):
        raise DimensionMismatchError(
            f"Vector has shape {v.shape}, cone dimension is {cone.dimension}",
            expected=cone.dimension,
            got=int(v.size),
        )
    if not np.any(np.abs(v) > tol):
        return True
    if cone.is_trivial:
        return False
    return contains_zero([Polytope.singleton(-v)], cone, tol=tol).is_member


def cones_equal(first: PolyhedralCone, second: PolyhedralCone, tol: float = MEMBERSHIP_TOL) -> bool:
    """Mutual inclusion of two ray-generated cones."""
    if first.dimension != second.dimension:
        return False
    return all(cone_contains(second, r, tol) for r in first.rays) and all(
        cone_contains(first, r, tol) for r in second.rays
    )
