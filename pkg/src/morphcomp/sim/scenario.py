"""Scenario description, morphology/compensation schedules and the flight loop."""

from __future__ import annotations

import bisect
import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from ..aero import AeroModel, paper_shaped_model
from ..compensation import MotorLimits, command_rotors
from ..control import (
    AttitudeController,
    ControllerGains,
    PositionController,
    allocate,
    allocation_matrix,
)
from ..geometry import GeometryConfig, MorphologyState, has_overlap, occlusion_angle
from .dynamics import SIM_K_T, Plant, VehicleParams, VehicleState, mixer_rows, params_tuple, rk4_step
from .trajectory import Hover, TrajectorySpec, trajectory_from_dict, trajectory_sample, trajectory_to_dict

log = logging.getLogger(__name__)


class ScenarioConfigError(ValueError):
    """Scenario file does not follow the schema."""


# -- schedules -----------------------------------------------------------------


@dataclass(frozen=True)
class MorphEvent:
    t: float
    preset: str
    transition_duration: float = 0.5


class MorphSchedule:
    """Arm angles over time: linear ramps between named presets."""

    def __init__(self, presets: GeometryConfig, initial: str = "X", events: Sequence[MorphEvent] = ()):
        self.presets = presets
        self.initial = initial
        self.events = list(events)
        times = [e.t for e in self.events]
        if times != sorted(times):
            raise ScenarioConfigError("morph events must be sorted by time")
        self._times = times
        self._targets = [np.array(presets.preset(e.preset).theta) for e in self.events]
        self._starts = []
        cur = np.array(presets.preset(initial).theta)
        for i, e in enumerate(self.events):
            if i:
                cur = self._eval(i - 1, e.t)
            self._starts.append(cur)

    def _eval(self, i: int, t: float) -> np.ndarray:
        e = self.events[i]
        frac = 1.0 if e.transition_duration <= 0 else min(1.0, (t - e.t) / e.transition_duration)
        return self._starts[i] + frac * (self._targets[i] - self._starts[i])

    def target(self, t: float) -> str:
        i = bisect.bisect_right(self._times, t) - 1
        return self.initial if i < 0 else self.events[i].preset

    def __call__(self, t: float) -> MorphologyState:
        i = bisect.bisect_right(self._times, t) - 1
        if i < 0:
            return self.presets.preset(self.initial)
        return MorphologyState(tuple(self._eval(i, t)))


def morph_schedule(schedule: MorphSchedule, t: float) -> MorphologyState:
    return schedule(t)


@dataclass(frozen=True)
class CompensationSchedule:
    initial: bool = True
    events: tuple[tuple[float, bool], ...] = ()

    def __call__(self, t: float) -> bool:
        on = self.initial
        for te, state in self.events:
            if t >= te:
                on = state
        return on


# -- scenario ------------------------------------------------------------------


@dataclass
class Scenario:
    name: str = "scenario"
    trajectory: TrajectorySpec = field(default_factory=Hover)
    morph_initial: str = "X"
    morph_events: list[MorphEvent] = field(default_factory=list)
    compensation: CompensationSchedule = field(default_factory=CompensationSchedule)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    model: AeroModel = field(default_factory=lambda: paper_shaped_model(SIM_K_T))
    plant_slope_pct: float = 0.0
    plant_intercept_pct: float = 0.0
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    gains: ControllerGains = field(default_factory=ControllerGains)
    position_noise: float = 0.0
    velocity_noise: float = 0.0
    duration: float = 10.0
    dt: float = 0.002
    control_dt: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ScenarioConfigError("dt must be positive")
        if not self.duration > 0:
            raise ScenarioConfigError("duration must be positive")
        times = [e.t for e in self.morph_events]
        if times != sorted(times):
            raise ScenarioConfigError("morph events must be sorted by time")
        ctimes = [t for t, _ in self.compensation.events]
        if ctimes != sorted(ctimes):
            raise ScenarioConfigError("compensation events must be sorted by time")

    def with_compensation(self, on: bool) -> "Scenario":
        out = copy.copy(self)
        out.compensation = CompensationSchedule(on, ())
        return out

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "duration": self.duration,
            "dt": self.dt,
            "control_dt": self.control_dt,
            "seed": self.seed,
            "trajectory": trajectory_to_dict(self.trajectory),
            "morphology": {
                "initial": self.morph_initial,
                "events": [e.__dict__.copy() for e in self.morph_events],
            },
            "compensation": {
                "initial": self.compensation.initial,
                "events": [{"t": t, "on": on} for t, on in self.compensation.events],
            },
            "geometry": self.geometry.to_dict(),
            "plant": {
                "model": self.model.to_dict(),
                "mismatch": {"slope_pct": self.plant_slope_pct, "intercept_pct": self.plant_intercept_pct},
            },
            "vehicle": {**self.vehicle.__dict__, "inertia": list(self.vehicle.inertia)},
            "gains": dict(self.gains.__dict__),
            "sensor_noise": {"position": self.position_noise, "velocity": self.velocity_noise},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Scenario":
        try:
            return _scenario_from_dict(data)
        except ScenarioConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioConfigError(f"invalid scenario: {exc}") from exc


_TOP_KEYS = {
    "name", "duration", "dt", "control_dt", "seed", "trajectory", "morphology", "compensation",
    "geometry", "geometry_file", "plant", "vehicle", "gains", "sensor_noise",
}


def _scenario_from_dict(data: Mapping[str, Any]) -> Scenario:
    if not isinstance(data, Mapping):
        raise ScenarioConfigError("scenario must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ScenarioConfigError(f"unknown scenario keys: {sorted(unknown)}")

    if "geometry_file" in data:
        geometry = GeometryConfig.from_dict(json.loads(Path(data["geometry_file"]).read_text()))
    else:
        geometry = GeometryConfig.from_dict(data.get("geometry", {}))

    morph = data.get("morphology", {})
    events = [
        MorphEvent(float(e["t"]), str(e["preset"]), float(e.get("transition_duration", 0.5)))
        for e in morph.get("events", [])
    ]
    for name in [morph.get("initial", "X")] + [e.preset for e in events]:
        if name not in geometry.presets:
            raise ScenarioConfigError(f"unknown morphology preset {name!r}")

    comp = data.get("compensation", True)
    if isinstance(comp, bool):
        comp_sched = CompensationSchedule(comp, ())
    elif isinstance(comp, Mapping):
        comp_sched = CompensationSchedule(
            bool(comp.get("initial", True)),
            tuple((float(e["t"]), bool(e["on"])) for e in comp.get("events", [])),
        )
    else:
        raise ScenarioConfigError("compensation must be a boolean or {initial, events}")

    plant = data.get("plant", {})
    model_data = plant.get("model", "paper")
    if model_data == "paper":
        model = paper_shaped_model(float(plant.get("k_t", SIM_K_T)))
    elif isinstance(model_data, Mapping):
        model = AeroModel.from_dict(model_data)
    else:
        model = AeroModel.load(model_data)
    mismatch = plant.get("mismatch", {})

    vehicle = data.get("vehicle", {})
    if "inertia" in vehicle:
        vehicle = {**vehicle, "inertia": tuple(float(v) for v in vehicle["inertia"])}
    noise = data.get("sensor_noise", {})
    return Scenario(
        name=str(data.get("name", "scenario")),
        trajectory=trajectory_from_dict(data.get("trajectory", {"type": "hover"})),
        morph_initial=str(morph.get("initial", "X")),
        morph_events=events,
        compensation=comp_sched,
        geometry=geometry,
        model=model,
        plant_slope_pct=float(mismatch.get("slope_pct", 0.0)),
        plant_intercept_pct=float(mismatch.get("intercept_pct", 0.0)),
        vehicle=VehicleParams(**vehicle),
        gains=ControllerGains(**data.get("gains", {})),
        position_noise=float(noise.get("position", 0.0)),
        velocity_noise=float(noise.get("velocity", 0.0)),
        duration=float(data.get("duration", 10.0)),
        dt=float(data.get("dt", 0.002)),
        control_dt=None if data.get("control_dt") is None else float(data["control_dt"]),
        seed=int(data.get("seed", 0)),
    )


def load_scenario(path: str | Path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioConfigError(f"{path}: {exc}") from exc
    return Scenario.from_dict(data)


# -- result --------------------------------------------------------------------


@dataclass
class ScenarioResult:
    name: str
    t: np.ndarray
    ref_pos: np.ndarray
    ref_vel: np.ndarray
    true_pos: np.ndarray
    true_vel: np.ndarray
    est_pos: np.ndarray
    attitude: np.ndarray
    phi: np.ndarray
    omega_cmd: np.ndarray
    saturated: np.ndarray
    compensation: np.ndarray
    infeasible: np.ndarray
    labels: list[str]

    CSV_COLUMNS = (
        ["t"]
        + [f"ref_{a}" for a in "xyz"]
        + [f"est_{a}" for a in "xyz"]
        + [f"true_{a}" for a in "xyz"]
        + [f"phi_{i}" for i in range(1, 5)]
        + [f"omega_cmd_{i}" for i in range(1, 5)]
        + [f"sat_{i}" for i in range(1, 5)]
        + ["compensation"]
    )

    def table(self) -> np.ndarray:
        return np.column_stack(
            [
                self.t,
                self.ref_pos,
                self.est_pos,
                self.true_pos,
                self.phi,
                self.omega_cmd,
                self.saturated.astype(float),
                self.compensation.astype(float),
            ]
        )

    def write_csv(self, path: str | Path) -> None:
        np.savetxt(path, self.table(), delimiter=",", header=",".join(self.CSV_COLUMNS), comments="", fmt="%.10g")


# -- the loop ------------------------------------------------------------------


def _segment_label(preset: str, overlapping: bool, comp: bool) -> str:
    if not overlapping:
        return preset
    return f"{preset}_{'c' if comp else 'nc'}"


def run_scenario(scenario: Scenario, compensation_override: bool | None = None) -> ScenarioResult:
    """Fly ``scenario`` and record references, states and commands each tick.

    Occlusion angles (and the allocation matrix) are recomputed only when
    the arm angles change, and only propellers passing the overlap test get
    a non-zero angle.
    """
    sc = scenario
    geom = sc.geometry.geometry
    params = sc.vehicle
    limits = MotorLimits(params.omega_min, params.omega_max)
    plant = Plant(sc.model, geom, sc.plant_slope_pct, sc.plant_intercept_pct)
    morph = MorphSchedule(sc.geometry, sc.morph_initial, sc.morph_events)
    comp_sched = sc.compensation if compensation_override is None else CompensationSchedule(compensation_override)
    pos_ctl = PositionController(sc.gains, params.g)
    att_ctl = AttitudeController(sc.gains, params.mass, np.diag(params.inertia))
    rng = np.random.default_rng(sc.seed)
    ptuple = params_tuple(params)

    preset_overlap = {
        name: any(has_overlap(geom, th, i) for i, th in enumerate(sc.geometry.presets[name]))
        for name in {sc.morph_initial, *(e.preset for e in sc.morph_events)}
    }

    n = int(round(sc.duration / sc.dt))
    ctrl_every = 1 if sc.control_dt is None else max(1, int(round(sc.control_dt / sc.dt)))
    ctrl_dt = sc.dt * ctrl_every

    t_arr = np.arange(n) * sc.dt
    ref_pos = np.empty((n, 3))
    ref_vel = np.empty((n, 3))
    true_pos = np.empty((n, 3))
    true_vel = np.empty((n, 3))
    est_pos = np.empty((n, 3))
    att = np.empty((n, 4))
    phi_log = np.empty((n, 4))
    cmd_log = np.empty((n, 4))
    sat_log = np.zeros((n, 4), dtype=bool)
    comp_log = np.zeros(n, dtype=bool)
    inf_log = np.zeros(n, dtype=bool)
    labels: list[str] = []

    ref0 = trajectory_sample(sc.trajectory, 0.0)
    state = VehicleState.hover(ref0.position, yaw=ref0.yaw)
    state.velocity = ref0.velocity.copy()
    x = state.pack()

    last_theta = None
    phi = np.zeros(4)
    alloc = None
    coef = mix = None
    speeds = None
    cmd = None

    for k in range(n):
        t = t_arr[k]
        theta = morph(t)
        if theta.theta != last_theta:
            overlapping = [has_overlap(geom, th, i) for i, th in enumerate(theta.theta)]
            if any(overlapping):
                full = occlusion_angle(geom, theta).phi
                phi = np.where(overlapping, full, 0.0)
            else:
                phi = np.zeros(4)
            alloc = allocation_matrix(geom, theta, params.c_q)
            coef = tuple(plant.coefficient(float(p)) for p in phi)
            mix = mixer_rows(alloc.positions, params.c_q)
            last_theta = theta.theta

        comp = comp_sched(t)
        ref = trajectory_sample(sc.trajectory, t)

        if k % ctrl_every == 0:
            est = VehicleState.unpack(x)
            if sc.position_noise > 0:
                est.position = est.position + rng.normal(0.0, sc.position_noise, 3)
            if sc.velocity_noise > 0:
                est.velocity = est.velocity + rng.normal(0.0, sc.velocity_noise, 3)
            a_des = pos_ctl(est, ref, ctrl_dt)
            thrust, torque = att_ctl(est.attitude, est.angular_rate, a_des, ref.yaw)
            thrusts = allocate((thrust, *torque), alloc)
            cmd = command_rotors(sc.model, thrusts, phi, alloc.matrix, limits, comp)
            speeds = tuple(float(w) for w in cmd.corrected_speeds)
            if k == 0:
                # start with the motors already at the first command
                x[13:17] = speeds

        ref_pos[k] = ref.position
        ref_vel[k] = ref.velocity
        true_pos[k] = x[0:3]
        true_vel[k] = x[3:6]
        est_pos[k] = est.position
        att[k] = x[6:10]
        phi_log[k] = phi
        cmd_log[k] = speeds
        sat_log[k] = cmd.saturated
        comp_log[k] = comp
        inf_log[k] = cmd.infeasible
        labels.append(_segment_label(morph.target(t), preset_overlap[morph.target(t)], comp))

        x = rk4_step(x, speeds, coef, mix, ptuple, sc.dt)

    return ScenarioResult(
        name=sc.name,
        t=t_arr,
        ref_pos=ref_pos,
        ref_vel=ref_vel,
        true_pos=true_pos,
        true_vel=true_vel,
        est_pos=est_pos,
        attitude=att,
        phi=phi_log,
        omega_cmd=cmd_log,
        saturated=sat_log,
        compensation=comp_log,
        infeasible=inf_log,
        labels=labels,
    )
