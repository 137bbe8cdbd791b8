"""
Deterministic dynamic programming on grids: model, summability, Bellman solving and checks.
"""
from .audit import (
    BellmanReport,
    DirectionalAudit,
    InterpolationTolerance,
    LipschitzAuditResult,
    StationarityResult,
    StrictDiffResult,
    ValueSubdiffResult,
    bellman_residual,
    interior_stationarity_check,
    interpolation_tolerance,
    lipschitz_audit,
    strict_diff_value,
    value_subdiff_bound,
)
from .euler import EulerCertificate, euler_check
from .model import BoundSequence, DPModel, Grid, Horizon, Stage, grid_nodes, uniform_grid
from .solver import (
    candidate_actions,
    check_admissible,
    extract_policy,
    in_policy,
    is_optimal_program,
    program_cost,
    rollout,
    solve_value,
)
from .summability import SummabilityReport, check_summability, estimate_bounds
from .table import INFEASIBLE, StageValues, ValueTable, is_infeasible

__all__ = [
    "BellmanReport",
    "BoundSequence",
    "DPModel",
    "DirectionalAudit",
    "EulerCertificate",
    "Grid",
    "Horizon",
    "INFEASIBLE",
    "InterpolationTolerance",
    "LipschitzAuditResult",
    "Stage",
    "StageValues",
    "StationarityResult",
    "StrictDiffResult",
    "SummabilityReport",
    "ValueSubdiffResult",
    "ValueTable",
    "bellman_residual",
    "candidate_actions",
    "check_admissible",
    "check_summability",
    "estimate_bounds",
    "euler_check",
    "extract_policy",
    "grid_nodes",
    "in_policy",
    "interior_stationarity_check",
    "interpolation_tolerance",
    "is_infeasible",
    "is_optimal_program",
    "lipschitz_audit",
    "program_cost",
    "rollout",
    "solve_value",
    "uniform_grid",
]
