"""Reference trajectories: hover point and (optionally height-varying) circles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Union

import numpy as np


class Reference(NamedTuple):
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    yaw: float


@dataclass(frozen=True)
class Hover:
    position: tuple[float, float, float] = (0.0, 0.0, 1.5)
    yaw: float = 0.0


@dataclass(frozen=True)
class Circle:
    radius: float = 1.5
    speed: float = 0.6
    height: float = 1.5
    center: tuple[float, float] = (0.0, 0.0)
    yaw: float = 0.0


@dataclass(frozen=True)
class CircleVarying:
    """Circle whose height oscillates once per lap between ``z_min`` and ``z_max``."""

    radius: float = 1.5
    speed: float = 0.6
    z_min: float = 1.25
    z_max: float = 1.75
    center: tuple[float, float] = (0.0, 0.0)
    yaw: float = 0.0


TrajectorySpec = Union[Hover, Circle, CircleVarying]


def trajectory_sample(spec: TrajectorySpec, t: float) -> Reference:
    if t < 0:
        raise ValueError("t must be >= 0")
    if isinstance(spec, Hover):
        return Reference(np.array(spec.position, float), np.zeros(3), np.zeros(3), spec.yaw)

    w = spec.speed / spec.radius
    r = spec.radius
    c, s = math.cos(w * t), math.sin(w * t)
    cx, cy = spec.center
    if isinstance(spec, Circle):
        z, vz, az = spec.height, 0.0, 0.0
    else:
        zc = 0.5 * (spec.z_min + spec.z_max)
        amp = 0.5 * (spec.z_max - spec.z_min)
        z, vz, az = zc + amp * s, amp * w * c, -amp * w * w * s
    return Reference(
        np.array([cx + r * c, cy + r * s, z]),
        np.array([-r * w * s, r * w * c, vz]),
        np.array([-r * w * w * c, -r * w * w * s, az]),
        spec.yaw,
    )


def lap_time(spec: TrajectorySpec) -> float:
    if isinstance(spec, Hover):
        return math.inf
    return 2.0 * math.pi * spec.radius / spec.speed


def trajectory_from_dict(data: Mapping) -> TrajectorySpec:
    kind = data.get("type", "hover")
    fields = {k: v for k, v in data.items() if k != "type"}
    for key in ("position", "center"):
        if key in fields:
            fields[key] = tuple(float(v) for v in fields[key])
    try:
        cls = {"hover": Hover, "circle": Circle, "circle_varying": CircleVarying}[kind]
    except KeyError:
        raise ValueError(f"unknown trajectory type {kind!r}") from None
    return cls(**fields)


def trajectory_to_dict(spec: TrajectorySpec) -> dict:
    kind = {Hover: "hover", Circle: "circle", CircleVarying: "circle_varying"}[type(spec)]
    out = {"type": kind}
    for k, v in spec.__dict__.items():
        out[k] = list(v) if isinstance(v, tuple) else v
    return out
