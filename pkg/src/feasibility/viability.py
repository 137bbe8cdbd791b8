"""
Sampled viability diagnostics for a policy multifunction G against a feasibility set.

Lower viability: G(x) ∩ S(x') is nonempty for x, x' near x̄. Upper viability:
G(x) ⊂ S(x'). Pairs are drawn from a scrambled Halton sequence over the sup-norm ball
of the given radius, so a report is reproducible from its seed. Verdicts only ever
claim ``holds_on_samples``.
"""
import logging
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.stats import qmc

from src.geometry.polytope import Polytope, Vector
from src.nsdp.exceptions import EmptyPolicySetError, PremiseError
from src.nsdp.utils.log import get_logger, log_with_context

from .sets import FEASIBILITY_TOL, FeasibilitySet, feasible, intersects

logger = get_logger(__name__)

DEFAULT_SAMPLES = 64

PolicyMap = Callable[[Sequence[float]], Optional[Polytope]]


class ViabilityKind(str, Enum):
    LOWER = "lower"
    UPPER = "upper"


class ViabilityVerdict(str, Enum):
    HOLDS_ON_SAMPLES = "holds_on_samples"
    VIOLATED = "violated"


class ViabilityReport(BaseModel):
    """Outcome of a sampled viability check around ``center``."""

    kind: ViabilityKind
    center: Vector
    radius: float = Field(..., ge=0.0)
    samples: int = Field(..., ge=0, description="Pairs actually checked")
    verdict: ViabilityVerdict
    violating_pair: Optional[Tuple[Vector, Vector]] = Field(
        default=None, description="(x, x') with the violation; reproducible with feasible()"
    )

    @property
    def holds(self) -> bool:
        return self.verdict == ViabilityVerdict.HOLDS_ON_SAMPLES

    def raise_for_status(self) -> None:
        """Raise PremiseError when the sampled check found a violation."""
        if not self.holds:
            raise PremiseError(
                f"{self.kind.value.capitalize()} viability violated around {self.center} "
                f"at pair {self.violating_pair}",
                premise=f"{self.kind.value}_viability",
            )


def sample_pairs(
    center: Sequence[float], radius: float, samples: int, seed: int = 0
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Pairs (x, x') in the sup-norm ball around ``center``; radius 0 gives the single pair."""
    x_bar = np.asarray(center, dtype=float).reshape(-1)
    if radius == 0.0 or x_bar.size == 0 or samples == 0:
        return [(x_bar, x_bar)]
    n = x_bar.size
    sampler = qmc.Halton(d=2 * n, scramble=True, seed=seed)
    points = (2.0 * sampler.random(samples) - 1.0) * radius
    pairs = [(x_bar, x_bar)]
    pairs += [(x_bar + row[:n], x_bar + row[n:]) for row in points]
    return pairs


def _policy_at(policy_sets: PolicyMap, x: np.ndarray) -> Polytope:
    hull = policy_sets(tuple(float(v) for v in x))
    if hull is None:
        raise EmptyPolicySetError(f"Policy set is empty at {tuple(x)}", state=x)
    return hull


def _check(
    kind: ViabilityKind,
    policy_sets: PolicyMap,
    S: FeasibilitySet,
    x_bar: Sequence[float],
    radius: float,
    samples: int,
    seed: int,
    tol: float,
) -> ViabilityReport:
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    center = tuple(float(v) for v in x_bar)
    pairs = sample_pairs(center, radius, samples, seed)

    # S(x) constant in x: upper viability holds whenever G(x) ⊂ S, which the policy guarantees
    if kind == ViabilityKind.UPPER and not S.depends_on_state:
        return ViabilityReport(
            kind=kind,
            center=center,
            radius=radius,
            samples=len(pairs),
            verdict=ViabilityVerdict.HOLDS_ON_SAMPLES,
        )

    for checked, (x, x_prime) in enumerate(pairs, start=1):
        hull = _policy_at(policy_sets, x)
        if kind == ViabilityKind.UPPER:
            ok = all(feasible(S, x_prime, g, tol) for g in hull.generators)
        else:
            ok = intersects(S, x_prime, hull, tol)
        if not ok:
            pair = (tuple(float(v) for v in x), tuple(float(v) for v in x_prime))
            log_with_context(
                logger,
                logging.WARNING,
                f"{kind.value} viability violated",
                center=center,
                pair=pair,
                checked=checked,
            )
            return ViabilityReport(
                kind=kind,
                center=center,
                radius=radius,
                samples=checked,
                verdict=ViabilityVerdict.VIOLATED,
                violating_pair=pair,
            )
    return ViabilityReport(
        kind=kind,
        center=center,
        radius=radius,
        samples=len(pairs),
        verdict=ViabilityVerdict.HOLDS_ON_SAMPLES,
    )


def check_lower_viability(
    policy_sets: PolicyMap,
    S: FeasibilitySet,
    x_bar: Sequence[float],
    radius: float,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tol: float = FEASIBILITY_TOL,
) -> ViabilityReport:
    """Check G(x) ∩ S(x') ≠ ∅ on sampled pairs around ``x_bar``.

    Raises:
        EmptyPolicySetError: If the policy set is empty at a sampled state
    """
    return _check(ViabilityKind.LOWER, policy_sets, S, x_bar, radius, samples, seed, tol)


def check_upper_viability(
    policy_sets: PolicyMap,
    S: FeasibilitySet,
    x_bar: Sequence[float],
    radius: float,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tol: float = FEASIBILITY_TOL,
) -> ViabilityReport:
    """Check G(x) ⊂ S(x') on sampled pairs around ``x_bar`` (every generator feasible)."""
    return _check(ViabilityKind.UPPER, policy_sets, S, x_bar, radius, samples, seed, tol)
