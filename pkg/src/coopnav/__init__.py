"""Cooperative navigation of unicycle vehicles with bearing-only localization."""

from .sim import RunResult, export_traces, metrics, run_closed_loop, run_monte_carlo
from .world import Landmark, Scenario, ScenarioError, VehicleState, VehicleTask, dump_scenario, load_scenario

__all__ = [
    "Landmark",
    "RunResult",
    "Scenario",
    "ScenarioError",
    "VehicleState",
    "VehicleTask",
    "dump_scenario",
    "export_traces",
    "load_scenario",
    "metrics",
    "run_closed_loop",
    "run_monte_carlo",
]
__version__ = "0.1.0"
