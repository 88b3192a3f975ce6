"""Flight simulation: plant, references, scenarios and error summaries."""

from .dynamics import SIM_K_T, Plant, SimulationError, VehicleParams, VehicleState, hover_speed, step
from .scenario import (
    CompensationSchedule,
    MorphEvent,
    MorphSchedule,
    Scenario,
    ScenarioConfigError,
    ScenarioResult,
    load_scenario,
    morph_schedule,
    run_scenario,
)
from .summary import SegmentSummary, summarize, summary_dict
from .trajectory import Circle, CircleVarying, Hover, Reference, trajectory_sample

__all__ = [
    "SIM_K_T", "Plant", "SimulationError", "VehicleParams", "VehicleState", "hover_speed", "step",
    "CompensationSchedule", "MorphEvent", "MorphSchedule", "Scenario", "ScenarioConfigError",
    "ScenarioResult", "load_scenario", "morph_schedule", "run_scenario",
    "SegmentSummary", "summarize", "summary_dict",
    "Circle", "CircleVarying", "Hover", "Reference", "trajectory_sample",
]
