"""Eco-driving optimal control for a 48V mild-hybrid over signalized routes.

Quasi-static powertrain plant, spatial-domain dynamic programming with a
serial reference backend and an equivalent data-parallel backend, a
receding-horizon controller with an offline terminal cost field, a
heuristic baseline controller, and a CLI harness.
"""

from .baseline import BaselineDriver, DriverParams, SplitParams
from .bench import BenchReport, DiffReport, diff_backends_run, run_bench
from .dp import (
    CostToGoTable,
    GridSpec,
    PenaltyConfig,
    PolicyTable,
    SolveResult,
    build_context,
    solve_horizon,
)
from .errors import (
    InfeasiblePowerError,
    RouteFormatError,
    StartStateInfeasibleError,
    UnknownSignalError,
    VehicleFormatError,
    ZeroMeanVelocityError,
)
from .mpc import (
    ClosedLoopTrajectory,
    ControlDecision,
    EcoDrivingMPC,
    TerminalCostField,
    build_terminal_cost,
    mpc_step,
    simulate_closed_loop,
)
from .plant import (
    ActionVector,
    StateVector,
    Vehicle,
    action_limits,
    dump_vehicle,
    load_vehicle,
    propagate_state,
    propagate_state_full,
)
from .route import (
    GreenIndicator,
    Route,
    SignalTiming,
    SpatSchedule,
    indicator_vector,
    load_route,
    next_green_start,
    phase_at,
)

__version__ = "0.1.0"

__all__ = [
    "ActionVector",
    "BaselineDriver",
    "BenchReport",
    "ClosedLoopTrajectory",
    "ControlDecision",
    "CostToGoTable",
    "DiffReport",
    "DriverParams",
    "EcoDrivingMPC",
    "GreenIndicator",
    "GridSpec",
    "InfeasiblePowerError",
    "PenaltyConfig",
    "PolicyTable",
    "Route",
    "RouteFormatError",
    "SignalTiming",
    "SolveResult",
    "SpatSchedule",
    "SplitParams",
    "StartStateInfeasibleError",
    "StateVector",
    "TerminalCostField",
    "UnknownSignalError",
    "Vehicle",
    "VehicleFormatError",
    "ZeroMeanVelocityError",
    "action_limits",
    "build_context",
    "build_terminal_cost",
    "diff_backends_run",
    "dump_vehicle",
    "indicator_vector",
    "load_route",
    "load_vehicle",
    "mpc_step",
    "next_green_start",
    "phase_at",
    "propagate_state",
    "propagate_state_full",
    "run_bench",
    "simulate_closed_loop",
    "solve_horizon",
]
