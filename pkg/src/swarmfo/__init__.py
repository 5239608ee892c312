"""Distributed feedback optimisation for unicycle swarms.

Drives N unicycle agents into a target formation around a target location
with a gradient flow on their tracking references, using only
neighbour-relative information, and provides the closed-form steady state
needed to check the simulations.
"""
from ._backend import BACKEND
from .analysis import (
    SteadyStateReport,
    formation_error_curve,
    optimal_configuration,
    steady_state_report,
)
from .controller import GainConfig, cost, cost_gradient, hessian, lipschitz_constant
from .graph import FormationSpec, build_spec, desired_configuration, laplacian, spec_from_edges
from .sim import Scenario, SwarmState, Trajectory, detect_convergence, integrate, simulate_tracking
from .scenarios import builtin_scenarios, get_scenario

__all__ = [
    "BACKEND",
    "FormationSpec",
    "GainConfig",
    "Scenario",
    "SteadyStateReport",
    "SwarmState",
    "Trajectory",
    "build_spec",
    "builtin_scenarios",
    "cost",
    "cost_gradient",
    "desired_configuration",
    "detect_convergence",
    "formation_error_curve",
    "get_scenario",
    "hessian",
    "integrate",
    "laplacian",
    "lipschitz_constant",
    "optimal_configuration",
    "simulate_tracking",
    "spec_from_edges",
    "steady_state_report",
]
