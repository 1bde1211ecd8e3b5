"""Reactive barrier-function control, scheduled-intersection coordination and an energy-optimal
baseline planner for connected automated vehicles, with a deterministic multi-vehicle simulator."""
import os

from .core import (
    REFERENCE_PARAMS,
    ControlBounds,
    ControllerMode,
    CrossingWindow,
    ParameterError,
    PrecedingSignal,
    VehicleParams,
    VehicleState,
)
from .controller import assemble_bounds, clamp_control, controller_step
from .coordinator import Coordinator, SignalPhase, SignalProgram
from .kernels import BACKEND_NAME
from .simulator import BASELINE, PROPOSED, Lane, Scenario, ScenarioResult, VehicleSpec, audit_safety, run
from .trajectories import baseline_earliest_arrival, feedback_law, primitive_eval

__version__ = "0.1.0"

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
REFERENCE_CONFIG = os.path.join(DATA_DIR, "reference.yaml")

__all__ = [
    "REFERENCE_PARAMS", "ControlBounds", "ControllerMode", "CrossingWindow", "ParameterError",
    "PrecedingSignal", "VehicleParams", "VehicleState", "assemble_bounds", "clamp_control",
    "controller_step", "Coordinator", "SignalPhase", "SignalProgram", "BACKEND_NAME", "BASELINE",
    "PROPOSED", "Lane", "Scenario", "ScenarioResult", "VehicleSpec", "audit_safety", "run",
    "baseline_earliest_arrival", "feedback_law", "primitive_eval", "REFERENCE_CONFIG",
]
