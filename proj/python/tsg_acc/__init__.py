"""TSG-guided MPC-CBF adaptive cruise control simulator."""

from ._core import (
    Scenario,
    ScenarioInvalid,
    SimResult,
    VehicleParams,
    h_acc,
    h_c3bf,
    in_collision_cone,
    linearize,
    relaxed_h,
    run,
    set_scenario_param,
    solve_qp,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "Scenario",
    "ScenarioInvalid",
    "SimResult",
    "VehicleParams",
    "h_acc",
    "h_c3bf",
    "in_collision_cone",
    "linearize",
    "relaxed_h",
    "run",
    "set_scenario_param",
    "solve_qp",
    "step",
]
