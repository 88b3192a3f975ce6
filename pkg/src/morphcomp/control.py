"""Cascaded flight controller and morphology-dependent control allocation.

Position loop: PD (optionally PID) on position/velocity error with
reference-acceleration and gravity feed-forward. Attitude loop: PD on the
SO(3) rotation error. Allocation: exact 4x4 inverse of the mixer built from
the current propeller positions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import MorphologyState, VehicleGeometry, prop_centers
from .rotation import quat_to_rot, vee

log = logging.getLogger(__name__)

GRAVITY = 9.81
E3 = np.array([0.0, 0.0, 1.0])
# reaction torque sign per rotor; diagonal pairs share a spin direction
SPIN = np.array([1.0, -1.0, 1.0, -1.0])
MAX_CONDITION = 1e8


class AllocationError(RuntimeError):
    """Mixer matrix is singular for the current morphology."""


@dataclass(frozen=True)
class ControllerGains:
    k_p: float = 8.0
    k_d: float = 4.0
    k_i: float = 0.0
    att_kp: float = 100.0
    att_kd: float = 20.0
    yaw_kp: float = 20.0
    yaw_kd: float = 8.0

    def __post_init__(self):
        for name in ("k_p", "k_d", "att_kp", "att_kd", "yaw_kp", "yaw_kd"):
            if not getattr(self, name) > 0:
                raise ValueError(f"gain {name} must be positive")
        if self.k_i < 0:
            raise ValueError("k_i must be >= 0")


@dataclass(frozen=True)
class AllocationMatrix:
    """Rotor thrusts -> (collective thrust, roll, pitch, yaw torque)."""

    matrix: np.ndarray
    inverse: np.ndarray
    condition: float
    positions: np.ndarray = field(repr=False)


def allocation_matrix(geom: VehicleGeometry, theta: MorphologyState, c_q: float = 0.016) -> AllocationMatrix:
    pos = prop_centers(geom, theta)
    M = np.vstack([np.ones(4), pos[:, 1], -pos[:, 0], c_q * SPIN])
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise AllocationError(f"allocation matrix singular for theta={theta.theta} (cond={cond:.3g})")
    return AllocationMatrix(M, np.linalg.inv(M), cond, pos)


def allocate(wrench, alloc: AllocationMatrix) -> np.ndarray:
    """Per-propeller thrusts producing ``wrench`` = (thrust, tau_x, tau_y, tau_z)."""
    return alloc.inverse @ np.asarray(wrench, dtype=float)


def position_control(state, ref, gains: ControllerGains, g: float = GRAVITY) -> np.ndarray:
    """Desired acceleration ``a_ref + k_p e + k_d de + g z``."""
    return (
        np.asarray(ref.acceleration)
        + gains.k_p * (np.asarray(ref.position) - state.position)
        + gains.k_d * (np.asarray(ref.velocity) - state.velocity)
        + g * E3
    )


def _cross(a, b) -> np.ndarray:
    # np.cross is slow on 3-vectors
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def desired_rotation(a_des: np.ndarray, yaw: float) -> np.ndarray:
    zb = a_des / math.sqrt(float(a_des @ a_des))
    xc = (math.cos(yaw), math.sin(yaw), 0.0)
    yb = _cross(zb, xc)
    n = math.sqrt(float(yb @ yb))
    if n < 1e-9:
        # thrust axis horizontal along the heading; pick any orthogonal y
        yb = _cross(zb, (0.0, 1.0, 0.0) if abs(zb[1]) < 0.9 else (1.0, 0.0, 0.0))
        n = math.sqrt(float(yb @ yb))
    yb = yb / n
    xb = _cross(yb, zb)
    return np.array([[xb[0], yb[0], zb[0]], [xb[1], yb[1], zb[1]], [xb[2], yb[2], zb[2]]])


def rotation_error(R: np.ndarray, R_des: np.ndarray) -> np.ndarray:
    return 0.5 * vee(R_des.T @ R - R.T @ R_des)


class AttitudeController:
    """Thrust/torque from a desired acceleration; remembers the last attitude.

    The remembered attitude is used when the requested acceleration is close
    to zero (free fall), where the thrust direction is undefined.
    """

    def __init__(self, gains: ControllerGains, mass: float, inertia, eps: float = 1e-6):
        self.gains = gains
        self.mass = mass
        self.J = np.asarray(inertia, dtype=float)
        self.eps = eps
        self.R_des = np.eye(3)
        self.free_fall = False
        self._kR = np.array([gains.att_kp, gains.att_kp, gains.yaw_kp])
        self._kw = np.array([gains.att_kd, gains.att_kd, gains.yaw_kd])

    def __call__(self, quat, omega, a_des, yaw_ref: float) -> tuple[float, np.ndarray]:
        R = quat_to_rot(quat)
        if math.sqrt(float(a_des @ a_des)) <= self.eps:
            self.free_fall = True
        else:
            self.free_fall = False
            self.R_des = desired_rotation(a_des, yaw_ref)
        e_R = rotation_error(R, self.R_des)
        omega = np.asarray(omega, dtype=float)
        torque = self.J @ (-self._kR * e_R - self._kw * omega) + _cross(omega, self.J @ omega)
        thrust = self.mass * float(a_des @ R[:, 2])
        return max(thrust, 0.0), torque


def attitude_control(state, a_des, yaw_ref: float, gains: ControllerGains, mass: float, inertia):
    """Stateless variant of :class:`AttitudeController` (no free-fall memory)."""
    ctl = AttitudeController(gains, mass, inertia)
    thrust, torque = ctl(state.attitude, state.angular_rate, np.asarray(a_des, dtype=float), yaw_ref)
    return thrust, torque, ctl.free_fall


class PositionController:
    """Position loop with optional integral action on the position error."""

    def __init__(self, gains: ControllerGains, g: float = GRAVITY, i_limit: float = 5.0):
        self.gains = gains
        self.g = g
        self.i_limit = i_limit
        self.integral = np.zeros(3)

    def __call__(self, state, ref, dt: float) -> np.ndarray:
        a = position_control(state, ref, self.gains, self.g)
        if self.gains.k_i > 0:
            self.integral = np.clip(
                self.integral + (np.asarray(ref.position) - state.position) * dt, -self.i_limit, self.i_limit
            )
            a = a + self.gains.k_i * self.integral
        return a
