"""Rigid-body quadrotor plant with first-order motors and occluded thrust.

The integrator works on a flat 17-element state
``[p(3), v(3), q(4), w(3), motor(4)]`` using plain floats; at 500 Hz this
is considerably faster than small numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..aero import AeroModel
from ..control import GRAVITY, SPIN
from ..geometry import MorphologyState, VehicleGeometry, occlusion_angle, prop_centers

# 1e-8 N/RPM^2 (the scale of the bench coefficients) in SI units
SIM_K_T = 1.0e-8 * (60.0 / (2.0 * math.pi)) ** 2


class SimulationError(RuntimeError):
    """The simulated state became non-finite."""


@dataclass(frozen=True)
class VehicleParams:
    mass: float = 0.58
    inertia: tuple[float, float, float] = (2.5e-3, 2.5e-3, 4.5e-3)
    c_q: float = 0.016
    tau_motor: float = 0.03
    omega_min: float = 150.0
    omega_max: float = 2000.0
    g: float = GRAVITY

    def __post_init__(self):
        if self.mass <= 0 or min(self.inertia) <= 0:
            raise ValueError("mass and inertia must be positive")
        if self.tau_motor <= 0:
            raise ValueError("tau_motor must be positive")


@dataclass
class VehicleState:
    position: np.ndarray
    velocity: np.ndarray
    attitude: np.ndarray
    angular_rate: np.ndarray
    motor_speeds: np.ndarray

    @classmethod
    def hover(cls, position=(0.0, 0.0, 0.0), motor_speeds=(0.0,) * 4, yaw: float = 0.0) -> "VehicleState":
        return cls(
            np.array(position, float),
            np.zeros(3),
            np.array([math.cos(yaw / 2), 0.0, 0.0, math.sin(yaw / 2)]),
            np.zeros(3),
            np.array(motor_speeds, float),
        )

    def pack(self) -> list[float]:
        return [
            *map(float, self.position),
            *map(float, self.velocity),
            *map(float, self.attitude),
            *map(float, self.angular_rate),
            *map(float, self.motor_speeds),
        ]

    @classmethod
    def unpack(cls, x: Sequence[float]) -> "VehicleState":
        a = np.array(x, dtype=float)
        return cls(a[0:3], a[3:6], a[6:10], a[10:13], a[13:17])


@dataclass(frozen=True)
class Plant:
    """Ground-truth aerodynamics. ``mismatch`` perturbs the line in percent."""

    model: AeroModel
    geometry: VehicleGeometry = field(default_factory=VehicleGeometry)
    slope_pct: float = 0.0
    intercept_pct: float = 0.0

    def coefficient(self, phi: float) -> float:
        if self.slope_pct == 0.0 and self.intercept_pct == 0.0:
            return self.model.k(phi)
        if phi <= 1e-9:
            return self.model.k_t
        m = self.model
        k = m.intercept * (1 + self.intercept_pct / 100) + m.slope * (1 + self.slope_pct / 100) * phi
        return max(k, 1e-3 * m.k_t)


def _deriv(x, cmd, coef, mix, params_tuple):
    m, ixx, iyy, izz, g, inv_tau = params_tuple
    roll_arm, pitch_arm, yaw_arm = mix
    qw, qx, qy, qz = x[6], x[7], x[8], x[9]
    wx, wy, wz = x[10], x[11], x[12]
    m1, m2, m3, m4 = x[13], x[14], x[15], x[16]
    t1 = coef[0] * m1 * m1
    t2 = coef[1] * m2 * m2
    t3 = coef[2] * m3 * m3
    t4 = coef[3] * m4 * m4
    f = (t1 + t2 + t3 + t4) / m
    tx = roll_arm[0] * t1 + roll_arm[1] * t2 + roll_arm[2] * t3 + roll_arm[3] * t4
    ty = pitch_arm[0] * t1 + pitch_arm[1] * t2 + pitch_arm[2] * t3 + pitch_arm[3] * t4
    tz = yaw_arm[0] * t1 + yaw_arm[1] * t2 + yaw_arm[2] * t3 + yaw_arm[3] * t4
    return (
        x[3],
        x[4],
        x[5],
        f * 2.0 * (qx * qz + qw * qy),
        f * 2.0 * (qy * qz - qw * qx),
        f * (1.0 - 2.0 * (qx * qx + qy * qy)) - g,
        0.5 * (-qx * wx - qy * wy - qz * wz),
        0.5 * (qw * wx + qy * wz - qz * wy),
        0.5 * (qw * wy - qx * wz + qz * wx),
        0.5 * (qw * wz + qx * wy - qy * wx),
        (tx - (izz - iyy) * wy * wz) / ixx,
        (ty - (ixx - izz) * wz * wx) / iyy,
        (tz - (iyy - ixx) * wx * wy) / izz,
        (cmd[0] - m1) * inv_tau,
        (cmd[1] - m2) * inv_tau,
        (cmd[2] - m3) * inv_tau,
        (cmd[3] - m4) * inv_tau,
    )


def rk4_step(x, cmd, coef, mix, params_tuple, dt):
    k1 = _deriv(x, cmd, coef, mix, params_tuple)
    h = 0.5 * dt
    k2 = _deriv([a + h * b for a, b in zip(x, k1)], cmd, coef, mix, params_tuple)
    k3 = _deriv([a + h * b for a, b in zip(x, k2)], cmd, coef, mix, params_tuple)
    k4 = _deriv([a + dt * b for a, b in zip(x, k3)], cmd, coef, mix, params_tuple)
    s = dt / 6.0
    out = [a + s * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(x, k1, k2, k3, k4)]
    n = math.sqrt(out[6] ** 2 + out[7] ** 2 + out[8] ** 2 + out[9] ** 2)
    if not math.isfinite(n) or not all(math.isfinite(v) for v in out):
        raise SimulationError(f"non-finite state after step: {out}")
    out[6] /= n
    out[7] /= n
    out[8] /= n
    out[9] /= n
    return out


def mixer_rows(positions: np.ndarray, c_q: float):
    """Per-rotor lever arms (roll, pitch, yaw) from planar propeller positions."""
    return (
        tuple(float(v) for v in positions[:, 1]),
        tuple(float(-v) for v in positions[:, 0]),
        tuple(float(c_q * s) for s in SPIN),
    )


def params_tuple(params: VehicleParams):
    return (params.mass, *params.inertia, params.g, 1.0 / params.tau_motor)


def step(
    state: VehicleState,
    setpoints: Sequence[float],
    morphology: MorphologyState,
    plant: Plant,
    dt: float,
    params: VehicleParams = VehicleParams(),
) -> VehicleState:
    """Advance the plant by ``dt`` with constant motor setpoints and arm angles."""
    if not 0 < dt <= 0.01:
        raise ValueError(f"dt must lie in (0, 0.01] s, got {dt}")
    phi = occlusion_angle(plant.geometry, morphology).phi
    coef = tuple(plant.coefficient(p) for p in phi)
    mix = mixer_rows(prop_centers(plant.geometry, morphology), params.c_q)
    x = rk4_step(state.pack(), tuple(map(float, setpoints)), coef, mix, params_tuple(params), dt)
    return VehicleState.unpack(x)


def hover_speed(k_t: float, params: VehicleParams = VehicleParams()) -> float:
    return math.sqrt(params.mass * params.g / (4.0 * k_t))
