"""Multimachine power-system simulator with a distributed bounded integral controller."""
from .controller import (CommGraph, ControllerParams, ControllerState, NeighborMessage,
                         control_outputs, exchange_messages, g_value, sigma_E_derivative,
                         sigma_T_derivative, vector_derivatives, weighted_laplacian)
from .engine import ClosedLoop, Trajectory, TrajectoryRecord, rk4_step, run_scenario
from .equilibrium import PowerFlowSpec, back_solve_generator, initialize, solve_power_flow
from .errors import (BicsimError, BoundViolation, DegenerateMachineError, InfeasibleDispatchError,
                     InitializationError, IntegrationDiverged, NetworkSingularError,
                     ProtocolViolation, ValidationError)
from .machine import GeneratorParams, GeneratorState, generator_derivatives
from .network import (Line, LoadAdmittance, build_admittance, electrical_torque,
                      injection_current, rotate_to_common, solve_network, stator_currents)
from .report import MetricsReport, compute_metrics, export_csv, read_csv
from .scenario import Event, Scenario, load_default_scenario, load_scenario

__version__ = "0.1.0"

__all__ = [
    "BicsimError",
    "BoundViolation",
    "ClosedLoop",
    "CommGraph",
    "ControllerParams",
    "ControllerState",
    "DegenerateMachineError",
    "Event",
    "GeneratorParams",
    "GeneratorState",
    "InfeasibleDispatchError",
    "InitializationError",
    "IntegrationDiverged",
    "Line",
    "LoadAdmittance",
    "MetricsReport",
    "NeighborMessage",
    "NetworkSingularError",
    "PowerFlowSpec",
    "ProtocolViolation",
    "Scenario",
    "Trajectory",
    "TrajectoryRecord",
    "ValidationError",
    "back_solve_generator",
    "build_admittance",
    "compute_metrics",
    "control_outputs",
    "electrical_torque",
    "exchange_messages",
    "export_csv",
    "g_value",
    "generator_derivatives",
    "initialize",
    "injection_current",
    "load_default_scenario",
    "load_scenario",
    "read_csv",
    "rk4_step",
    "rotate_to_common",
    "run_scenario",
    "sigma_E_derivative",
    "sigma_T_derivative",
    "solve_network",
    "solve_power_flow",
    "stator_currents",
    "vector_derivatives",
    "weighted_laplacian",
]
