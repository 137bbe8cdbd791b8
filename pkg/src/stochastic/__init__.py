"""
Scenario-tree stochastic DP: filtrations, adapted processes, the deterministic reduction,
per-atom Leibniz rules and the pointwise Euler inclusion.
"""
from .assumptions import AssumptionReport, check_assumptions, estimate_lipschitz, lipschitz_rank
from .calculus import (
    audit_integral_subdiff,
    integral_directional_derivative,
    integral_subdiff,
    normal_cones_agree,
    selection_normal_cone,
    stochastic_value_subdiff,
)
from .euler import AtomEulerCertificate, StochasticEulerResult, stochastic_euler_check
from .model import StochasticDPModel, StochasticStage, cell_constancy
from .reduction import (
    BlockLayout,
    action_layout,
    flatten,
    flatten_process,
    integral_cost,
    program_objective,
    reduce_to_deterministic,
    reduced_objective,
    state_layout,
    to_euclidean,
    unflatten,
)
from .tree import (
    AdaptedProcess,
    AdaptednessReport,
    ScenarioTree,
    TreeReport,
    validate_adapted,
    validate_tree,
)

__all__ = [
    "AdaptedProcess",
    "AdaptednessReport",
    "AssumptionReport",
    "AtomEulerCertificate",
    "BlockLayout",
    "ScenarioTree",
    "StochasticDPModel",
    "StochasticEulerResult",
    "StochasticStage",
    "TreeReport",
    "action_layout",
    "audit_integral_subdiff",
    "cell_constancy",
    "check_assumptions",
    "estimate_lipschitz",
    "flatten",
    "flatten_process",
    "integral_cost",
    "integral_directional_derivative",
    "integral_subdiff",
    "lipschitz_rank",
    "normal_cones_agree",
    "program_objective",
    "reduce_to_deterministic",
    "reduced_objective",
    "selection_normal_cone",
    "state_layout",
    "stochastic_euler_check",
    "stochastic_value_subdiff",
    "to_euclidean",
    "unflatten",
    "validate_adapted",
    "validate_tree",
]
