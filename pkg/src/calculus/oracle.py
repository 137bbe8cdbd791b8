"""
Finite-difference oracle for the generalized directional derivative.

φ°(x̄; h) is a limsup of (f(y + θh) − f(y)) / θ over y → x̄ and θ ↓ 0. The oracle samples
that quotient over a θ grid and over base points y in a ball around x̄ whose radius
shrinks with θ, and reports the maximum at the smallest θ together with the profile.
"""
from typing import Dict, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from .clarke import ball_samples, as_point
from .expression import ExprNode

DEFAULT_THETAS: Tuple[float, ...] = (1e-2, 1e-3, 1e-4, 1e-5)
DEFAULT_SAMPLES = 32
DEFAULT_RADIUS = 1e-3


class FDDerivativeEstimate(BaseModel):
    """Sampled φ° value and its per-θ profile."""

    value: float = Field(..., description="Estimate at the smallest θ")
    profile: Dict[float, float] = Field(default_factory=dict, description="θ -> max quotient")


def fd_generalized_derivative(
    expr: ExprNode,
    point: Sequence[float],
    direction: Sequence[float],
    thetas: Sequence[float] = DEFAULT_THETAS,
    samples: int = DEFAULT_SAMPLES,
    radius: float = DEFAULT_RADIUS,
    seed: int = 0,
) -> FDDerivativeEstimate:
    """Estimate φ°(point; direction) by sampled difference quotients.

    Args:
        expr: Expression to probe
        point: Base point x̄
        direction: Direction h
        thetas: Step sizes, positive
        samples: Base-point perturbations per θ (x̄ itself is always included)
        radius: Base-point ball radius at the largest θ
        seed: Seed for the perturbations

    Returns:
        FDDerivativeEstimate with the smallest-θ value and the full profile
    """
    if not thetas or min(thetas) <= 0:
        raise ValueError("thetas must be a nonempty list of positive step sizes")
    x = as_point(expr, point)
    h = as_point(expr, direction, "Direction")
    rng = np.random.default_rng(seed)
    unit = ball_samples(rng, samples, x.size) if x.size else np.zeros((samples, 0))
    largest = max(thetas)

    profile: Dict[float, float] = {}
    for theta in sorted(thetas, reverse=True):
        shrink = radius * theta / largest
        bases = np.vstack([x[None, :], x + shrink * unit])
        quotients = (expr.values(bases + theta * h) - expr.values(bases)) / theta
        profile[float(theta)] = float(np.max(quotients))
    return FDDerivativeEstimate(value=profile[float(min(thetas))], profile=profile)
