"""
Clarke calculus on piecewise-smooth expressions.

The recursion over node kinds yields generators of the generalized gradient; the
generalized directional derivative is its support function, and regularity is
certified structurally from the active sets at the point.
"""
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from src.geometry.polytope import GradientPolytope, Polytope, Vector
from src.nsdp.exceptions import DimensionMismatchError
from src.nsdp.utils.log import get_logger

from .expression import BindNode, ExprNode, bind

logger = get_logger(__name__)

ACTIVE_TOL = 1e-9
STRICT_RADIUS = 1e-6
STRICT_SAMPLES = 64
STRICT_TOL = 1e-4
# Smallest sampling radius; below it rounding dominates the difference quotients
STRICT_FLOOR = 1e-12


class RegularityVerdict(str, Enum):
    REGULAR = "regular"
    NOT_CERTIFIED = "not_certified"


class RegularityReport(BaseModel):
    """Outcome of ``is_regular``; ``trace`` names the nodes that blocked certification."""

    verdict: RegularityVerdict
    smooth: bool = Field(default=False, description="Unique active smooth branch everywhere")
    trace: List[str] = Field(default_factory=list)

    @property
    def is_regular(self) -> bool:
        return self.verdict == RegularityVerdict.REGULAR


def as_point(expr: ExprNode, point: Sequence[float], what: str = "Point") -> np.ndarray:
    """Coerce ``point`` to a float vector of the expression's input dimension."""
    x = np.asarray(point, dtype=float).reshape(-1)
    if x.size != expr.dim:
        raise DimensionMismatchError(
            f"{what} has dimension {x.size}, expression expects {expr.dim}",
            expected=expr.dim,
            got=int(x.size),
        )
    return x


def evaluate(expr: ExprNode, point: Sequence[float]) -> float:
    """Value of ``expr`` at ``point``."""
    return expr.value_at(as_point(expr, point))


def clarke_gradient(
    expr: ExprNode, point: Sequence[float], active_tol: float = ACTIVE_TOL
) -> GradientPolytope:
    """Generalized gradient of ``expr`` at ``point`` as a generator hull.

    Branches of max/min (and both signs of abs) whose values lie within ``active_tol``
    of the extremum contribute their generators.
    """
    x = as_point(expr, point)
    _, G = expr.generators(x, active_tol)
    return Polytope.from_points(G)


def gen_dir_derivative(
    expr: ExprNode,
    point: Sequence[float],
    direction: Sequence[float],
    active_tol: float = ACTIVE_TOL,
) -> float:
    """φ°(x̄; h): the support function of the generalized gradient at ``direction``."""
    h = as_point(expr, direction, "Direction")
    return clarke_gradient(expr, point, active_tol).support(h)


def is_regular(
    expr: ExprNode, point: Sequence[float], active_tol: float = ACTIVE_TOL
) -> RegularityReport:
    """Structural regularity certificate at ``point``.

    ``not_certified`` means regularity was not established, not that it fails.
    """
    x = as_point(expr, point)
    result = expr.regularity(x, active_tol, "root")
    if result.regular:
        return RegularityReport(verdict=RegularityVerdict.REGULAR, smooth=result.smooth)
    logger.debug(f"Regularity not certified at {tuple(x)}: {result.reasons}")
    return RegularityReport(verdict=RegularityVerdict.NOT_CERTIFIED, trace=result.reasons)


def ball_samples(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Uniform samples from the Euclidean unit ball."""
    directions = rng.normal(size=(count, dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = rng.random((count, 1)) ** (1.0 / dim)
    return directions / norms * radii


def strict_derivative_probe(
    expr: ExprNode,
    point: Sequence[float],
    radius: float = STRICT_RADIUS,
    samples: int = STRICT_SAMPLES,
    active_tol: float = ACTIVE_TOL,
    seed: int = 0,
    tol: float = STRICT_TOL,
) -> Optional[Vector]:
    """Return the strict derivative at ``point`` when the probe supports one.

    Requires a singleton generalized gradient {g} and, for sampled pairs (x, x + h)
    in a ball around ``point``, |f(x + h) − f(x) − ⟨g, h⟩| / ‖h‖ < ``tol``. The ball
    starts at ``radius`` and shrinks tenfold per rejection, never below ``active_tol``,
    so a kink outside ``active_tol`` but inside ``radius`` does not hide the derivative.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    x = as_point(expr, point)
    gradient = clarke_gradient(expr, x, active_tol)
    if not gradient.is_singleton:
        return None
    g = gradient.matrix[0]
    if x.size == 0:
        return tuple(float(v) for v in g)

    rng = np.random.default_rng(seed)
    unit_bases = ball_samples(rng, samples, x.size)
    unit_steps = ball_samples(rng, samples, x.size)
    lengths = np.linalg.norm(unit_steps, axis=1)
    keep = lengths > 0.0
    unit_bases, unit_steps, lengths = unit_bases[keep], unit_steps[keep], lengths[keep]

    current = radius
    while True:
        bases = x + current * unit_bases
        steps = current * unit_steps
        increments = expr.values(bases + steps) - expr.values(bases) - steps @ g
        quotients = increments / (current * lengths)
        worst = float(np.max(np.abs(quotients), initial=0.0))
        if worst < tol:
            return tuple(float(v) for v in g)
        if current <= max(active_tol, STRICT_FLOOR):
            logger.debug(
                f"Strict derivative rejected at {tuple(x)}: deviation {worst:.3e} "
                f"at radius {current:.1e}"
            )
            return None
        current = max(current / 10.0, active_tol, STRICT_FLOOR)


def partial(expr: ExprNode, block: Sequence[int], at: Sequence[float]) -> BindNode:
    """Hold every coordinate outside ``block`` at its value in ``at``.

    The result is a function of the ``block`` coordinates only, so its generalized
    gradient is the partial one, e.g. ∂°_y u(x̄, ȳ) with ``block`` the y indices.
    """
    full = as_point(expr, at, "Base point")
    keep = set(block)
    if not keep.issubset(range(expr.dim)):
        raise DimensionMismatchError(
            f"Block {sorted(keep)} exceeds expression dimension {expr.dim}", expected=expr.dim
        )
    held = [i for i in range(expr.dim) if i not in keep]
    return bind(expr, held, full[held])


def partial_gradient(
    expr: ExprNode,
    block: Sequence[int],
    at: Sequence[float],
    active_tol: float = ACTIVE_TOL,
) -> GradientPolytope:
    """Generalized gradient with respect to ``block`` at ``at``."""
    restricted = partial(expr, block, at)
    full = np.asarray(at, dtype=float)
    return clarke_gradient(restricted, full[sorted(set(block))], active_tol)


def lipschitz_bound(
    expr: ExprNode, lower: Sequence[float], upper: Sequence[float]
) -> float:
    """Euclidean Lipschitz constant of ``expr`` on the box [lower, upper] from atom bounds."""
    lo = as_point(expr, lower, "Lower corner")
    hi = as_point(expr, upper, "Upper corner")
    if np.any(lo > hi):
        raise ValueError("Box lower corner exceeds upper corner")
    return float(expr.lipschitz(lo, hi))


def value_and_gradient(
    expr: ExprNode, point: Sequence[float], active_tol: float = ACTIVE_TOL
) -> Tuple[float, GradientPolytope]:
    x = as_point(expr, point)
    value, G = expr.generators(x, active_tol)
    return value, Polytope.from_points(G)
