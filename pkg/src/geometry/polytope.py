"""
Polytopes (convex hulls of finitely many generators) and polyhedral cones.

Only the V-representation is ever used: queries go through support functions or
through LP membership (see ``membership``), never through facet enumeration.
"""
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.nsdp.exceptions import DimensionMismatchError

Vector = Tuple[float, ...]

# Generators closer than this (sup-norm) are merged
DEDUP_TOL = 1e-12


def dedupe_vectors(vectors: Iterable[Sequence[float]], tol: float = DEDUP_TOL) -> List[Vector]:
    """Drop vectors within ``tol`` (sup-norm) of an earlier one, keeping first-seen order."""
    kept: List[np.ndarray] = []
    for vector in vectors:
        candidate = np.asarray(vector, dtype=float)
        if any(np.max(np.abs(candidate - other), initial=0.0) <= tol for other in kept):
            continue
        kept.append(candidate)
    return [tuple(float(v) for v in vec) for vec in kept]


class Polytope(BaseModel):
    """Convex hull of a nonempty finite generator list.

    Used as the carrier of Clarke generalized gradients (``GradientPolytope``) and of
    policy sets (finite candidate hulls).
    """

    model_config = ConfigDict(frozen=True)

    generators: Tuple[Vector, ...] = Field(..., description="Generators; the set is their hull")
    dimension: int = Field(..., ge=0, description="Common dimension of all generators")

    @model_validator(mode="after")
    def check_generators(self) -> "Polytope":
        if not self.generators:
            raise ValueError("Polytope needs at least one generator")
        for generator in self.generators:
            if len(generator) != self.dimension:
                raise ValueError(
                    f"Generator {generator} has dimension {len(generator)}, "
                    f"expected {self.dimension}"
                )
        return self

    @classmethod
    def from_points(cls, points: Iterable[Sequence[float]], tol: float = DEDUP_TOL) -> "Polytope":
        """Build a polytope from raw points, merging near-duplicates."""
        generators = dedupe_vectors(points, tol)
        if not generators:
            raise ValueError("Polytope needs at least one generator")
        return cls(generators=tuple(generators), dimension=len(generators[0]))

    @classmethod
    def singleton(cls, point: Sequence[float]) -> "Polytope":
        return cls.from_points([point])

    @property
    def matrix(self) -> np.ndarray:
        """Generators as rows of a (count, dimension) array."""
        count = len(self.generators)
        return np.asarray(self.generators, dtype=float).reshape(count, self.dimension)

    @property
    def is_singleton(self) -> bool:
        return len(self.generators) == 1

    def support(self, direction: Sequence[float]) -> float:
        return support(self, direction)

    def negate(self) -> "Polytope":
        return Polytope(
            generators=tuple(tuple(-v for v in g) for g in self.generators),
            dimension=self.dimension,
        )

    def scale(self, factor: float) -> "Polytope":
        return Polytope.from_points(factor * self.matrix)

    def same_set(self, other: "Polytope", directions: int = 64, tol: float = 1e-9) -> bool:
        """Hull equality tested through support functions on coordinate and random directions."""
        if self.dimension != other.dimension:
            return False
        rng = np.random.default_rng(0)
        probes = [np.eye(self.dimension)[i] for i in range(self.dimension)]
        probes += [-p for p in probes]
        probes += list(rng.normal(size=(directions, self.dimension)))
        return all(abs(self.support(h) - other.support(h)) <= tol for h in probes)

    def __str__(self) -> str:
        return "hull{" + ", ".join(str(list(g)) for g in self.generators) + "}"


GradientPolytope = Polytope


class PolyhedralCone(BaseModel):
    """Nonnegative combinations of finitely many rays; no rays means the cone {0}."""

    model_config = ConfigDict(frozen=True)

    rays: Tuple[Vector, ...] = Field(default=(), description="Generating rays")
    dimension: int = Field(..., ge=0)

    @model_validator(mode="after")
    def check_rays(self) -> "PolyhedralCone":
        for ray in self.rays:
            if len(ray) != self.dimension:
                raise ValueError(f"Ray {ray} has dimension {len(ray)}, expected {self.dimension}")
        return self

    @classmethod
    def zero(cls, dimension: int) -> "PolyhedralCone":
        return cls(rays=(), dimension=dimension)

    @classmethod
    def from_rays(cls, rays: Iterable[Sequence[float]], dimension: int) -> "PolyhedralCone":
        kept = [r for r in dedupe_vectors(rays) if any(abs(v) > DEDUP_TOL for v in r)]
        return cls(rays=tuple(kept), dimension=dimension)

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.rays, dtype=float).reshape(len(self.rays), self.dimension)

    @property
    def is_trivial(self) -> bool:
        return not self.rays

    def __str__(self) -> str:
        if not self.rays:
            return "{0}"
        return "cone{" + ", ".join(str(list(r)) for r in self.rays) + "}"


def _check_dimension(expected: int, vector: np.ndarray, what: str) -> None:
    if vector.shape != (expected,):
        raise DimensionMismatchError(
            f"{what} has shape {vector.shape}, expected ({expected},)",
            expected=expected,
            got=int(vector.size),
        )


def support(polytope: Polytope, direction: Sequence[float]) -> float:
    """Support function: max over generators of <g, h>."""
    h = np.asarray(direction, dtype=float).reshape(-1)
    _check_dimension(polytope.dimension, h, "Direction")
    return float(np.max(polytope.matrix @ h))


def minkowski_sum(first: Polytope, second: Polytope, tol: float = DEDUP_TOL) -> Polytope:
    """Pairwise generator sums, deduplicated; supports add: σ_{P+Q} = σ_P + σ_Q."""
    if first.dimension != second.dimension:
        raise DimensionMismatchError(
            f"Cannot add polytopes of dimension {first.dimension} and {second.dimension}",
            expected=first.dimension,
            got=second.dimension,
        )
    sums = (first.matrix[:, None, :] + second.matrix[None, :, :]).reshape(-1, first.dimension)
    return Polytope.from_points(sums, tol=tol)
