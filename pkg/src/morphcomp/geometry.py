"""Planar kinematics of the foldable frame and propeller/body occlusion angles.

The central body is a square of half-side ``body_half_side`` centred at the
origin. Each arm is a massless segment hinged at one corner of the square;
at ``theta = 0`` it points along the outward diagonal (X configuration) and a
positive ``theta`` swings it counter-clockwise around the body.

Arms are numbered 1..4 counter-clockwise starting from the front-left
corner; internally they are indexed 0..3. Body frame: x forward, y left.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

THETA_MIN = -math.pi / 2
THETA_MAX = math.pi
TWO_PI = 2.0 * math.pi

# front-left, rear-left, rear-right, front-right
_CORNER_SIGNS = ((1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0))


class MorphologyError(ValueError):
    """Arm angle outside the mechanical range."""


@dataclass(frozen=True)
class VehicleGeometry:
    body_half_side: float = 0.05
    arm_length: float = 0.09
    prop_radius: float = 0.0635

    def __post_init__(self):
        for name in ("body_half_side", "arm_length", "prop_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        # at theta=0 the prop centre sits on the diagonal beyond the corner,
        # so the corner is the closest body point
        if self.arm_length <= self.prop_radius:
            raise ValueError(
                "arm_length must exceed prop_radius so the X configuration is occlusion-free"
            )

    @property
    def pivot_positions(self) -> np.ndarray:
        h = self.body_half_side
        return np.array([(sx * h, sy * h) for sx, sy in _CORNER_SIGNS])

    @property
    def arm_zero_directions(self) -> np.ndarray:
        s = math.sqrt(0.5)
        return np.array([(sx * s, sy * s) for sx, sy in _CORNER_SIGNS])


@dataclass(frozen=True)
class MorphologyState:
    theta: tuple[float, float, float, float]

    def __post_init__(self):
        theta = tuple(float(t) for t in self.theta)
        if len(theta) != 4:
            raise MorphologyError(f"expected 4 arm angles, got {len(theta)}")
        for i, t in enumerate(theta):
            check_theta(t, i)
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class OcclusionProfile:
    phi: np.ndarray = field(repr=True)
    prop_centers: np.ndarray = field(repr=False)


def check_theta(theta_i: float, i: int = 0) -> None:
    if not (THETA_MIN <= theta_i <= THETA_MAX) or math.isnan(theta_i):
        raise MorphologyError(
            f"arm {i + 1}: theta={theta_i:.6g} rad outside [-pi/2, pi]"
        )


def prop_center(geom: VehicleGeometry, theta_i: float, i: int) -> np.ndarray:
    """Planar position of propeller ``i`` (0-based) for arm angle ``theta_i``."""
    check_theta(theta_i, i)
    sx, sy = _CORNER_SIGNS[i]
    h = geom.body_half_side
    d = math.sqrt(0.5)
    dx, dy = sx * d, sy * d
    c, s = math.cos(theta_i), math.sin(theta_i)
    L = geom.arm_length
    return np.array([sx * h + L * (c * dx - s * dy), sy * h + L * (s * dx + c * dy)])


def prop_centers(geom: VehicleGeometry, theta: MorphologyState | Sequence[float]) -> np.ndarray:
    th = theta.theta if isinstance(theta, MorphologyState) else theta
    return np.array([prop_center(geom, th[i], i) for i in range(4)])


def _arc_inside_square(cx: float, cy: float, radius: float, h: float) -> float:
    """Angular measure of the circle lying inside the square [-h, h]^2.

    The square is an intersection of four half-planes. For each one the arc
    falling outside it is a single interval, so the inside arc is the
    complement of the union of those intervals.
    """
    intervals = []
    # (outward normal angle, signed distance of the centre to the edge; >0 inside)
    for normal_angle, slack in (
        (0.0, h - cx),
        (math.pi / 2, h - cy),
        (math.pi, h + cx),
        (-math.pi / 2, h + cy),
    ):
        if slack >= radius:
            continue
        if slack <= -radius:
            return 0.0
        half = math.acos(slack / radius)
        intervals.append((normal_angle - half, normal_angle + half))

    if not intervals:
        return TWO_PI
    return _complement_measure(intervals)


def _complement_measure(intervals: list[tuple[float, float]]) -> float:
    pieces = []
    for lo, hi in intervals:
        width = hi - lo
        start = lo % TWO_PI
        end = start + width
        if end > TWO_PI:
            pieces.append((start, TWO_PI))
            pieces.append((0.0, end - TWO_PI))
        else:
            pieces.append((start, end))
    pieces.sort()
    covered = 0.0
    cur_lo, cur_hi = pieces[0]
    for lo, hi in pieces[1:]:
        if lo > cur_hi:
            covered += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
        elif hi > cur_hi:
            cur_hi = hi
    covered += cur_hi - cur_lo
    return max(0.0, TWO_PI - covered)


def occlusion_angle_at(geom: VehicleGeometry, center: Sequence[float]) -> float:
    """Occlusion angle of a propeller disk centred at ``center``."""
    return _arc_inside_square(float(center[0]), float(center[1]), geom.prop_radius, geom.body_half_side)


def occlusion_angle(geom: VehicleGeometry, theta: MorphologyState) -> OcclusionProfile:
    """Per-propeller occlusion angles for a morphology."""
    centers = prop_centers(geom, theta)
    phi = np.array([occlusion_angle_at(geom, c) for c in centers])
    return OcclusionProfile(phi=phi, prop_centers=centers)


def _overlaps(geom: VehicleGeometry, center: np.ndarray) -> bool:
    # the circle meets the open square iff its radius lies strictly between the
    # nearest and farthest distances from the centre to the square
    h = geom.body_half_side
    cx, cy = center
    nx = max(abs(cx) - h, 0.0)
    ny = max(abs(cy) - h, 0.0)
    near = math.hypot(nx, ny)
    far = math.hypot(abs(cx) + h, abs(cy) + h)
    return near < geom.prop_radius < far


def has_overlap(geom: VehicleGeometry, theta_i: float, i: int) -> bool:
    """Cheap test for whether propeller ``i`` overlaps the body at all."""
    return _overlaps(geom, prop_center(geom, theta_i, i))


def contact_angle(geom: VehicleGeometry, i: int = 0, tol: float = 1e-12) -> float:
    """Smallest positive arm angle at which propeller ``i`` starts to overlap the body."""
    lo, hi = 0.0, THETA_MAX
    if not has_overlap(geom, hi, i):
        # scan for any overlapping angle to bracket the root
        grid = np.linspace(0.0, THETA_MAX, 721)
        hits = [t for t in grid if has_overlap(geom, t, i)]
        if not hits:
            raise ValueError("propeller never overlaps the body for positive theta")
        hi = hits[0]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if has_overlap(geom, mid, i):
            hi = mid
        else:
            lo = mid
    return hi


# -- presets -----------------------------------------------------------------

# folded so that phi is about 61 deg on every arm; the mechanical design keeps
# occlusions below 65 deg
O_THETA = 1.76
# arm 3 folds less (battery clearance), phi about 27 deg
O_ASYM_THETA_3 = 1.60


def default_presets() -> dict[str, tuple[float, float, float, float]]:
    return {
        "X": (0.0, 0.0, 0.0, 0.0),
        "O": (O_THETA,) * 4,
        "O_asym": (O_THETA, O_THETA, O_ASYM_THETA_3, O_THETA),
    }


@dataclass(frozen=True)
class GeometryConfig:
    geometry: VehicleGeometry = field(default_factory=VehicleGeometry)
    presets: Mapping[str, tuple[float, float, float, float]] = field(default_factory=default_presets)

    def preset(self, name: str) -> MorphologyState:
        try:
            return MorphologyState(self.presets[name])
        except KeyError:
            raise KeyError(f"unknown morphology preset {name!r}; have {sorted(self.presets)}") from None

    @classmethod
    def from_dict(cls, data: Mapping) -> "GeometryConfig":
        defaults = VehicleGeometry()
        geom = VehicleGeometry(
            body_half_side=float(data.get("body_half_side", defaults.body_half_side)),
            arm_length=float(data.get("arm_length", defaults.arm_length)),
            prop_radius=float(data.get("prop_radius", defaults.prop_radius)),
        )
        presets = default_presets()
        for name, values in (data.get("presets") or {}).items():
            presets[name] = MorphologyState(values).theta
        return cls(geometry=geom, presets=presets)

    def to_dict(self) -> dict:
        return {
            "body_half_side": self.geometry.body_half_side,
            "arm_length": self.geometry.arm_length,
            "prop_radius": self.geometry.prop_radius,
            "presets": {k: list(v) for k, v in self.presets.items()},
        }


def load_geometry_config(path: str | Path) -> GeometryConfig:
    with open(path) as f:
        return GeometryConfig.from_dict(json.load(f))
