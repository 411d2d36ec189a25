"""Optimal anonymous independent reward schemes and their benchmarks."""

from .airs_solver import (AirsSolution, KKTReport, SegmentStructure, build_scheme,
                          compute_segments, kkt_residuals, solve_airs)
from .estimators import LinearRewardScheme, OptimalAIRS
from .exceptions import (ConvergenceError, InstanceError, NotAnEquilibriumError,
                         UnboundedResponseError)
from .model import (AgentProfile, Instance, PiecewiseLinearCost, PowerCost, StepRewardScheme,
                    compute_alpha, load_agents, load_instance, validate_agents,
                    validate_instance)
from .schemes import (LinearSolution, PropEquilibrium, airs_from_proportional, best_response,
                      evaluate_scheme, prop_equilibrium_closed_form, prop_equilibrium_numeric,
                      solve_linear)

__version__ = "0.1.0"

__all__ = [
    "AgentProfile", "AirsSolution", "ConvergenceError", "Instance", "InstanceError",
    "KKTReport", "LinearRewardScheme", "LinearSolution", "NotAnEquilibriumError",
    "OptimalAIRS", "PiecewiseLinearCost", "PowerCost", "PropEquilibrium",
    "SegmentStructure", "StepRewardScheme", "UnboundedResponseError",
    "airs_from_proportional", "best_response", "build_scheme", "compute_alpha",
    "compute_segments", "evaluate_scheme", "kkt_residuals", "load_agents", "load_instance",
    "prop_equilibrium_closed_form", "prop_equilibrium_numeric", "solve_airs", "solve_linear",
    "validate_agents", "validate_instance",
]
