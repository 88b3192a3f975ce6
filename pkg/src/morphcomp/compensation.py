"""Geometry-aware feed-forward compensation of occlusion thrust loss.

Per propeller, the desired thrust ``T_i`` is mapped to a motor speed

    w_i = sqrt(T_i / (K_T * k_i)),   k_i = 1 - |K_T - k(phi_i)| / K_T

so that an occluded rotor spins faster by a factor ``sqrt(1 / k_i)``. When
the resulting speeds leave the motor range, :func:`saturate_prioritized`
re-solves the allocation keeping roll/pitch torque, then collective thrust,
and giving up yaw torque first.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .aero import AeroModel, PHI_ZERO_TOL

SCALE_FLOOR = 1e-3


@dataclass(frozen=True)
class MotorLimits:
    omega_min: float = 150.0
    omega_max: float = 2000.0

    def __post_init__(self):
        if not 0 <= self.omega_min < self.omega_max:
            raise ValueError("need 0 <= omega_min < omega_max")


@dataclass
class RotorCommand:
    desired_thrusts: np.ndarray
    corrected_speeds: np.ndarray
    saturated: np.ndarray = field(default_factory=lambda: np.zeros(4, dtype=bool))
    thrust_limited: bool = False
    yaw_limited: bool = False
    infeasible: bool = False


def scaling_factor(model: AeroModel, phi_i: float) -> float:
    """Fraction of nominal effectiveness kept by an occluded rotor.

    ``k(phi)`` is capped at ``K_T`` before use so the factor never exceeds
    one, and the result is floored at ``SCALE_FLOOR``.
    """
    if phi_i < 0:
        raise ValueError(f"occlusion angle must be >= 0, got {phi_i}")
    if phi_i <= PHI_ZERO_TOL:
        return 1.0
    k_t = model.k_t
    k_phi = min(model.k(phi_i), k_t)
    k = 1.0 - abs(k_t - k_phi) / k_t
    return min(max(k, SCALE_FLOOR), 1.0)


def scaling_factors(model: AeroModel, phi: Sequence[float], enabled: bool = True) -> np.ndarray:
    if not enabled:
        return np.ones(len(phi))
    return np.array([scaling_factor(model, p) for p in phi])


def compensated_speed(model: AeroModel, thrust_i: float, k_i: float) -> float:
    if thrust_i < 0:
        raise ValueError(f"desired thrust must be >= 0, got {thrust_i}")
    if not 0 < k_i <= 1:
        raise ValueError(f"scaling factor must lie in (0, 1], got {k_i}")
    return math.sqrt(thrust_i / (model.k_t * k_i))


def speed_increase_percent(k_i: float) -> float:
    """Commanded speed relative to the unoccluded mapping, in percent."""
    return 100.0 * math.sqrt(1.0 / k_i)


def signed_speeds(model: AeroModel, thrusts: Sequence[float], k: Sequence[float]) -> np.ndarray:
    """Compensated speeds for an allocation that may contain negative thrusts.

    Negative thrusts map to negative "speeds" of the same magnitude so that
    the saturation stage can see how far below the limit they are.
    """
    out = np.empty(len(thrusts))
    for i, (t, ki) in enumerate(zip(thrusts, k)):
        w = compensated_speed(model, abs(float(t)), float(ki))
        out[i] = w if t >= 0 else -w
    return out


# -- prioritized saturation ---------------------------------------------------


@dataclass(frozen=True)
class SaturationContext:
    """What the saturation stage needs to re-solve an allocation.

    ``matrix`` maps rotor thrusts to ``(collective, roll, pitch, yaw)``;
    ``coeffs`` are the per-rotor thrust/speed^2 factors the command assumes
    (``K_T * k_i``).
    """

    matrix: np.ndarray
    coeffs: np.ndarray


def _tz_interval(base, u, v, lo, hi, T, eps=1e-12):
    """Range of yaw torque keeping every rotor in bounds at collective ``T``."""
    tz_lo, tz_hi = -math.inf, math.inf
    for i in range(len(base)):
        fixed = base[i] + T * u[i]
        if abs(v[i]) < eps:
            if fixed < lo[i] - 1e-12 * max(1.0, abs(lo[i])) or fixed > hi[i] + 1e-12 * max(1.0, abs(hi[i])):
                return None
            continue
        a = (lo[i] - fixed) / v[i]
        b = (hi[i] - fixed) / v[i]
        if a > b:
            a, b = b, a
        tz_lo, tz_hi = max(tz_lo, a), min(tz_hi, b)
    if tz_lo > tz_hi:
        return None
    return tz_lo, tz_hi


def _thrust_range(base, u, v, lo, hi):
    """Collective-thrust range of the polygon {(T, tz): lo <= base + T u + tz v <= hi}."""
    lines = []
    for i in range(len(base)):
        lines.append((u[i], v[i], lo[i] - base[i]))
        lines.append((u[i], v[i], hi[i] - base[i]))
    scale = max(1.0, float(np.max(np.abs(hi - lo))))
    tol = 1e-9 * scale
    ts = []
    for (a1, b1, c1), (a2, b2, c2) in itertools.combinations(lines, 2):
        det = a1 * b2 - a2 * b1
        if abs(det) < 1e-14:
            continue
        T = (c1 * b2 - c2 * b1) / det
        tz = (a1 * c2 - a2 * c1) / det
        f = base + T * u + tz * v
        if np.all(f >= lo - tol) and np.all(f <= hi + tol):
            ts.append(T)
    if not ts:
        return None
    return min(ts), max(ts)


def _solve_lexicographic(matrix, wrench, lo, hi):
    """Rotor thrusts honouring roll/pitch exactly, then thrust, then yaw.

    Returns ``(thrusts, thrust_changed, yaw_changed)`` or ``None`` when the
    roll/pitch torques alone cannot be met.
    """
    inv = np.linalg.inv(matrix)
    T_des, tx, ty, tz_des = wrench
    base = inv[:, 1] * tx + inv[:, 2] * ty
    u, v = inv[:, 0], inv[:, 3]

    iv = _tz_interval(base, u, v, lo, hi, T_des)
    if iv is not None:
        tz = min(max(tz_des, iv[0]), iv[1])
        return base + T_des * u + tz * v, False, tz != tz_des

    rng = _thrust_range(base, u, v, lo, hi)
    if rng is None:
        return None
    T = min(max(T_des, rng[0]), rng[1])
    iv = _tz_interval(base, u, v, lo, hi, T)
    if iv is None:
        # numerically at a vertex; take its midpoint in yaw
        iv = _tz_interval(base, u, v, lo - 1e-9 * np.abs(lo) - 1e-15, hi + 1e-9 * np.abs(hi), T)
        if iv is None:
            return None
    tz = min(max(tz_des, iv[0]), iv[1])
    return base + T * u + tz * v, True, tz != tz_des


def saturate_prioritized(
    desired_speeds: Sequence[float],
    limits: MotorLimits,
    context: SaturationContext,
) -> RotorCommand:
    """Bring rotor speeds into ``limits`` with a fixed priority order.

    1. roll and pitch torque are kept exactly,
    2. collective thrust is moved as little as possible,
    3. yaw torque absorbs the rest.

    If even roll/pitch cannot be met, they are scaled down uniformly to the
    largest feasible fraction and every rotor is flagged.
    """
    w = np.asarray(desired_speeds, dtype=float)
    coeffs = np.asarray(context.coeffs, dtype=float)
    desired_thrusts = coeffs * w * np.abs(w)
    outside = (w < limits.omega_min) | (w > limits.omega_max)
    if not outside.any():
        return RotorCommand(desired_thrusts, w.copy(), outside)

    A = np.asarray(context.matrix, dtype=float)
    lo = coeffs * limits.omega_min ** 2
    hi = coeffs * limits.omega_max ** 2
    wrench = A @ desired_thrusts

    infeasible = False
    sol = _solve_lexicographic(A, wrench, lo, hi)
    if sol is None:
        infeasible = True
        s_lo, s_hi = 0.0, 1.0
        best = _solve_lexicographic(A, wrench * np.array([1.0, 0.0, 0.0, 1.0]), lo, hi)
        for _ in range(50):
            mid = 0.5 * (s_lo + s_hi)
            trial = _solve_lexicographic(A, wrench * np.array([1.0, mid, mid, 1.0]), lo, hi)
            if trial is None:
                s_hi = mid
            else:
                s_lo, best = mid, trial
        sol = best
    if sol is None:
        # no roll/pitch-free point either: clip each rotor
        thrusts, thrust_changed, yaw_changed = np.clip(desired_thrusts, lo, hi), True, True
    else:
        thrusts, thrust_changed, yaw_changed = sol

    speeds = np.sqrt(np.clip(thrusts, lo, hi) / coeffs)
    speeds = np.clip(speeds, limits.omega_min, limits.omega_max)
    flags = np.ones(4, dtype=bool) if infeasible else outside
    return RotorCommand(
        desired_thrusts=desired_thrusts,
        corrected_speeds=speeds,
        saturated=flags,
        thrust_limited=thrust_changed,
        yaw_limited=yaw_changed,
        infeasible=infeasible,
    )


def command_rotors(
    model: AeroModel,
    thrusts: Sequence[float],
    phi: Sequence[float],
    matrix: np.ndarray,
    limits: MotorLimits = MotorLimits(),
    compensate: bool = True,
) -> RotorCommand:
    """Per-propeller thrusts to saturated, optionally compensated, speed setpoints."""
    k = scaling_factors(model, phi, compensate)
    speeds = signed_speeds(model, thrusts, k)
    cmd = saturate_prioritized(speeds, limits, SaturationContext(matrix, model.k_t * k))
    cmd.desired_thrusts = np.asarray(thrusts, dtype=float)
    return cmd
