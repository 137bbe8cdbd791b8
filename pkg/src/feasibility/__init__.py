"""
Polyhedral feasibility multifunctions, their cones, projections and viability checks.
"""
from .sets import (
    FeasibilitySet,
    active_rows,
    block_diagonal,
    box,
    contingent_probe,
    distance,
    feasible,
    intersects,
    is_interior,
    is_nonempty,
    normal_cone,
    polyhedral,
    project,
    tangent_cone,
    whole_space,
)
from .viability import (
    ViabilityKind,
    ViabilityReport,
    ViabilityVerdict,
    check_lower_viability,
    check_upper_viability,
    sample_pairs,
)

__all__ = [
    "FeasibilitySet",
    "ViabilityKind",
    "ViabilityReport",
    "ViabilityVerdict",
    "active_rows",
    "block_diagonal",
    "box",
    "check_lower_viability",
    "check_upper_viability",
    "contingent_probe",
    "distance",
    "feasible",
    "intersects",
    "is_interior",
    "is_nonempty",
    "normal_cone",
    "polyhedral",
    "project",
    "sample_pairs",
    "tangent_cone",
    "whole_space",
]
