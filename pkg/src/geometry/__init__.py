"""
Vertex/ray represented convex sets, support functions and certified membership tests.
"""
from .membership import (
    MembershipCertificate,
    Verdict,
    Witness,
    cone_contains,
    cones_equal,
    contains_zero,
    distance_to_origin,
)
from .polytope import (
    GradientPolytope,
    PolyhedralCone,
    Polytope,
    dedupe_vectors,
    minkowski_sum,
    support,
)
from .simplex import LPResult, LPStatus, solve_lp

__all__ = [
    "GradientPolytope",
    "LPResult",
    "LPStatus",
    "MembershipCertificate",
    "PolyhedralCone",
    "Polytope",
    "Verdict",
    "Witness",
    "cone_contains",
    "cones_equal",
    "contains_zero",
    "dedupe_vectors",
    "distance_to_origin",
    "minkowski_sum",
    "solve_lp",
    "support",
]
