"""Occlusion-dependent thrust model and its identification from bench sweeps.

Thrust of a single rotor is ``T = k(phi) * omega**2`` where ``k`` falls
linearly with the occlusion angle ``phi`` and ``k(0)`` is the nominal
coefficient ``K_T``. All internal quantities are SI (rad, rad/s, N).
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
import warnings
from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

RPM_TO_RAD_S = 2.0 * math.pi / 60.0
BENCH_HEADER = ("phi_deg", "rpm", "thrust_n", "rep", "propeller_id")
# lower bound on k(phi) relative to K_T
K_FLOOR = 1e-3
# angles below this are treated as unoccluded
PHI_ZERO_TOL = 1e-9


class IdentificationError(ValueError):
    """Not enough data to identify a coefficient."""


class ModelValidityError(IdentificationError):
    """Identified parameters contradict the physical trend."""


class BenchDataError(ValueError):
    """Malformed bench CSV."""


class ExtrapolationWarning(UserWarning):
    """Thrust evaluated at an occlusion angle outside the fitted range."""


@dataclass(frozen=True)
class BenchSample:
    phi: float
    omega: float
    thrust: float
    repetition: int = 1
    propeller_id: str = "5in-3blade"
    n_averaged: int = 1

    def __post_init__(self):
        if not self.omega >= 0:
            raise BenchDataError(f"omega must be >= 0, got {self.omega}")
        if not self.thrust >= 0:
            raise BenchDataError(f"thrust must be >= 0, got {self.thrust}")
        if self.repetition not in (1, 2, 3):
            raise BenchDataError(f"repetition must be in 1..3, got {self.repetition}")


@dataclass(frozen=True)
class AeroModel:
    """Linear angle-dependent thrust coefficient.

    ``k_t`` is the unoccluded coefficient [N s^2/rad^2]; ``slope`` is in
    [N s^2/rad^3] and ``intercept`` is the fitted ``k`` at zero occlusion.
    """

    k_t: float
    slope: float
    intercept: float
    phi_valid: tuple[float, float] = (0.0, 1.5 * math.pi)
    propeller_id: str = "5in-3blade"

    def __post_init__(self):
        if not self.k_t > 0:
            raise ModelValidityError(f"K_T must be positive, got {self.k_t}")
        if not self.slope < 0:
            raise ModelValidityError(
                f"slope must be negative (thrust falls with occlusion), got {self.slope}"
            )
        if abs(self.intercept - self.k_t) > 0.05 * self.k_t:
            raise ModelValidityError(
                f"fitted k(0)={self.intercept:.4g} differs from K_T={self.k_t:.4g} by more than 5%"
            )
        lo, hi = self.phi_valid
        if self.intercept + self.slope * hi <= 0:
            raise ModelValidityError(f"k(phi) is not positive over {self.phi_valid}")

    def k(self, phi: float) -> float:
        """Angle-dependent coefficient, ``K_T`` exactly at zero occlusion."""
        if phi <= PHI_ZERO_TOL:
            return self.k_t
        return max(self.intercept + self.slope * phi, K_FLOOR * self.k_t)

    def is_valid(self, phi: float) -> bool:
        lo, hi = self.phi_valid
        return phi <= PHI_ZERO_TOL or lo <= phi <= hi

    def to_dict(self) -> dict:
        return {
            "propeller_id": self.propeller_id,
            "k_t": self.k_t,
            "slope_per_rad": self.slope,
            "intercept": self.intercept,
            "phi_valid_deg": [math.degrees(self.phi_valid[0]), math.degrees(self.phi_valid[1])],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "AeroModel":
        lo, hi = data.get("phi_valid_deg", (0.0, 270.0))
        return cls(
            k_t=float(data["k_t"]),
            slope=float(data["slope_per_rad"]),
            intercept=float(data["intercept"]),
            phi_valid=(math.radians(lo), math.radians(hi)),
            propeller_id=str(data.get("propeller_id", "unknown")),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "AeroModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def paper_shaped_model(k_t: float = 1.0e-8, propeller_id: str = "5in-3blade") -> AeroModel:
    """Linear law with ``k(0) = K_T`` and ``k(270 deg) = 0.25 K_T``.

    This puts ``k(45 deg)`` at 0.875 K_T, the "almost 90%" observed for the
    5 inch three-blade propeller.
    """
    phi_max = math.radians(270.0)
    return AeroModel(
        k_t=k_t,
        slope=-0.75 * k_t / phi_max,
        intercept=k_t,
        phi_valid=(0.0, phi_max),
        propeller_id=propeller_id,
    )


# measured thrust fractions of the 5 inch three-blade propeller
ANCHORS_DEG = {45.0: 0.90, 270.0: 0.25}


def anchor_coefficients(
    k_t: float = 1.0e-8, phi_deg: Sequence[float] = (0.0, 45.0, 90.0, 180.0, 270.0)
) -> dict[float, float]:
    """``{phi_deg: k}`` on the line through the two measured anchors; ``k(0) = K_T``."""
    (a0, f0), (a1, f1) = sorted(ANCHORS_DEG.items())
    out = {}
    for d in phi_deg:
        frac = 1.0 if d == 0 else f0 + (f1 - f0) * (d - a0) / (a1 - a0)
        out[float(d)] = k_t * frac
    return out


def thrust(model: AeroModel, phi: float, omega: float) -> float:
    """Rotor thrust ``k(phi) * omega**2``.

    Emits :class:`ExtrapolationWarning` when ``phi`` lies outside the model's
    validity range; the value is still returned.
    """
    if omega < 0:
        raise ValueError(f"rotor speed must be >= 0, got {omega}")
    if not model.is_valid(phi):
        warnings.warn(
            f"phi={math.degrees(phi):.2f} deg outside fitted range "
            f"[{math.degrees(model.phi_valid[0]):.1f}, {math.degrees(model.phi_valid[1]):.1f}] deg",
            ExtrapolationWarning,
            stacklevel=2,
        )
    return model.k(phi) * omega * omega


# -- bench data ----------------------------------------------------------------


def ingest_bench_csv(path: str | Path) -> list[BenchSample]:
    """Read a load-cell sweep CSV (``phi_deg,rpm,thrust_n,rep,propeller_id``)."""
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        warnings.warn(f"{path}: empty bench file", UserWarning, stacklevel=2)
        return []
    reader = csv.reader(text.splitlines())
    header = tuple(h.strip() for h in next(reader))
    if header != BENCH_HEADER:
        raise BenchDataError(f"{path}:1: expected header {','.join(BENCH_HEADER)}, got {','.join(header)}")
    samples = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(BENCH_HEADER):
            raise BenchDataError(f"{path}:{lineno}: expected {len(BENCH_HEADER)} fields, got {len(row)}")
        try:
            phi_deg, rpm, thrust_n, rep = float(row[0]), float(row[1]), float(row[2]), int(row[3])
        except ValueError as exc:
            raise BenchDataError(f"{path}:{lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in (phi_deg, rpm, thrust_n)):
            raise BenchDataError(f"{path}:{lineno}: non-finite value")
        try:
            samples.append(
                BenchSample(
                    phi=math.radians(phi_deg),
                    omega=rpm * RPM_TO_RAD_S,
                    thrust=thrust_n,
                    repetition=rep,
                    propeller_id=row[4].strip(),
                )
            )
        except BenchDataError as exc:
            raise BenchDataError(f"{path}:{lineno}: {exc}") from None
    if not samples:
        warnings.warn(f"{path}: no bench samples", UserWarning, stacklevel=2)
    return samples


def write_bench_csv(samples: Iterable[BenchSample], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(BENCH_HEADER)
        for s in samples:
            w.writerow(
                [repr(math.degrees(s.phi)), repr(s.omega / RPM_TO_RAD_S), repr(s.thrust), s.repetition, s.propeller_id]
            )


def _key(s: BenchSample) -> tuple[str, float, float]:
    # bench angles and speeds come from a finite setpoint list; round away
    # conversion noise before grouping
    return (s.propeller_id, round(s.phi, 9), round(s.omega, 6))


def average_repetitions(samples: Iterable[BenchSample]) -> list[BenchSample]:
    """Collapse repeated measurements of the same setpoint into their mean."""
    groups: dict[tuple, list[BenchSample]] = defaultdict(list)
    for s in samples:
        groups[_key(s)].append(s)
    out = []
    for key, group in groups.items():
        if len(group) < 3:
            warnings.warn(
                f"{key[0]} phi={math.degrees(key[1]):.1f} deg omega={key[2]:.1f} rad/s: "
                f"only {len(group)} repetition(s)",
                UserWarning,
                stacklevel=2,
            )
        first = group[0]
        out.append(
            BenchSample(
                phi=first.phi,
                omega=first.omega,
                thrust=math.fsum(s.thrust for s in group) / len(group),
                repetition=1,
                propeller_id=first.propeller_id,
                n_averaged=len(group),
            )
        )
    return out


# -- identification ------------------------------------------------------------


def _through_origin(samples: Sequence[BenchSample]) -> tuple[float, float]:
    """Least-squares ``T = c * omega**2``; returns ``(c, standard error)``."""
    w2 = np.array([s.omega ** 2 for s in samples])
    t = np.array([s.thrust for s in samples])
    sxx = float(np.dot(w2, w2))
    if sxx == 0:
        raise IdentificationError("all rotor speeds are zero")
    c = float(np.dot(t, w2)) / sxx
    dof = len(samples) - 1
    resid = t - c * w2
    se = math.sqrt(float(np.dot(resid, resid)) / dof / sxx) if dof > 0 else math.nan
    return c, se


def _split_by_phi(samples: Iterable[BenchSample]) -> dict[float, list[BenchSample]]:
    by_phi: dict[float, list[BenchSample]] = defaultdict(list)
    for s in samples:
        by_phi[0.0 if s.phi <= PHI_ZERO_TOL else round(s.phi, 9)].append(s)
    return dict(by_phi)


def fit_nominal(samples: Iterable[BenchSample], min_speeds: int = 5) -> float:
    """Nominal coefficient ``K_T = sum(T w^2) / sum(w^4)`` from the unoccluded sweep."""
    nominal = _split_by_phi(samples).get(0.0, [])
    distinct = {round(s.omega, 6) for s in nominal}
    if len(distinct) < min_speeds:
        raise IdentificationError(
            f"need at least {min_speeds} distinct rotor speeds at phi=0, got {len(distinct)}"
        )
    return _through_origin(nominal)[0]


@dataclass(frozen=True)
class AngleFit:
    """Intermediate results of :func:`fit_angle_coefficient`."""

    model: AeroModel
    phi: np.ndarray
    k: np.ndarray
    k_se: np.ndarray
    slope_se: float
    intercept_se: float


def fit_angle_line(phi: Sequence[float], k: Sequence[float], k_se: Sequence[float] | None = None):
    """OLS line through ``(phi, k)``; returns ``slope, intercept, slope_se, intercept_se``.

    Standard errors propagate the per-point uncertainties ``k_se`` through
    the (linear) least-squares estimator.
    """
    x = np.asarray(phi, float)
    y = np.asarray(k, float)
    X = np.column_stack([x, np.ones_like(x)])
    pinv = np.linalg.pinv(X)
    slope, intercept = pinv @ y
    if k_se is None:
        return float(slope), float(intercept), math.nan, math.nan
    var = np.asarray(k_se, float) ** 2
    slope_se = math.sqrt(float(np.sum(pinv[0] ** 2 * var)))
    intercept_se = math.sqrt(float(np.sum(pinv[1] ** 2 * var)))
    return float(slope), float(intercept), slope_se, intercept_se


def fit_angle_coefficient_detailed(
    samples: Iterable[BenchSample], k_t: float, propeller_id: str | None = None
) -> AngleFit:
    samples = list(samples)
    by_phi = _split_by_phi(samples)
    occluded = sorted(p for p in by_phi if p > 0)
    if len(occluded) < 2:
        raise IdentificationError(f"need at least 2 occlusion angles, got {len(occluded)}")

    phis, ks, ses = [0.0], [k_t], []
    if 0.0 in by_phi and len(by_phi[0.0]) > 1:
        ses.append(_through_origin(by_phi[0.0])[1])
    else:
        ses.append(0.0)
    for p in occluded:
        c, se = _through_origin(by_phi[p])
        phis.append(by_phi[p][0].phi)
        ks.append(c)
        ses.append(0.0 if math.isnan(se) else se)

    slope, intercept, slope_se, intercept_se = fit_angle_line(phis, ks, ses)
    if slope >= 0:
        raise ModelValidityError(
            f"fitted slope {slope:.4g} is not negative; thrust should fall with occlusion"
        )
    pid = propeller_id or (samples[0].propeller_id if samples else "unknown")
    model = AeroModel(
        k_t=k_t,
        slope=slope,
        intercept=intercept,
        phi_valid=(0.0, max(phis)),
        propeller_id=pid,
    )
    return AngleFit(model, np.array(phis), np.array(ks), np.array(ses), slope_se, intercept_se)


def fit_angle_coefficient(samples: Iterable[BenchSample], k_t: float, propeller_id: str | None = None) -> AeroModel:
    """Fit the linear ``k(phi)`` law to per-angle sweeps.

    Each occluded sweep yields a through-origin estimate of ``k``; a line is
    then fitted through those estimates together with the ``(0, K_T)`` point.
    """
    return fit_angle_coefficient_detailed(samples, k_t, propeller_id).model


def fit_report(samples: Sequence[BenchSample], model: AeroModel) -> dict:
    """Residual statistics of ``model`` against (averaged) bench samples."""
    if not samples:
        return {"n": 0}
    t = np.array([s.thrust for s in samples])
    pred = np.array([model.k(s.phi) * s.omega ** 2 for s in samples])
    resid = t - pred
    ss_res = float(np.dot(resid, resid))
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    return {
        "n": len(samples),
        "residual_max_abs": float(np.max(np.abs(resid))),
        "residual_rms": math.sqrt(ss_res / len(samples)),
        "r_squared": 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0,
    }


# -- comparison across propellers ---------------------------------------------

_PROP_ID = re.compile(r"(?P<diam>\d+(?:\.\d+)?)\s*in.*?(?P<blades>\d+)\s*blade", re.IGNORECASE)


def parse_propeller_id(pid: str) -> tuple[float | None, int | None]:
    """``"5in-3blade"`` -> ``(5.0, 3)``; unknown fields are ``None``."""
    m = _PROP_ID.search(pid)
    if not m:
        return None, None
    return float(m.group("diam")), int(m.group("blades"))


@dataclass
class PropellerPair:
    a: str
    b: str
    slope_ratio: float
    intercept_offset: float
    intercept_ratio: float
    doubling_rule: str  # "pass", "fail" or "n/a"


def cross_propeller_report(models: Sequence[AeroModel], tolerance: float = 0.25) -> list[PropellerPair]:
    """Pairwise comparison of fitted coefficients.

    ``intercept_offset`` is ``b.intercept - a.intercept``. For pairs with the
    same blade count whose diameters differ by one inch, the coefficient of
    the larger propeller should be about twice that of the smaller; pairs off
    by more than ``tolerance`` from a ratio of 2 are marked ``"fail"``.
    """
    rows = []
    for a, b in combinations(models, 2):
        da, ba = parse_propeller_id(a.propeller_id)
        db, bb = parse_propeller_id(b.propeller_id)
        rule = "n/a"
        ratio = b.intercept / a.intercept
        if None not in (da, db) and ba == bb and abs(abs(da - db) - 1.0) < 1e-9:
            big, small = (b, a) if db > da else (a, b)
            r = big.intercept / small.intercept
            rule = "pass" if abs(r - 2.0) <= tolerance * 2.0 else "fail"
        rows.append(
            PropellerPair(
                a=a.propeller_id,
                b=b.propeller_id,
                slope_ratio=b.slope / a.slope,
                intercept_offset=b.intercept - a.intercept,
                intercept_ratio=ratio,
                doubling_rule=rule,
            )
        )
    return rows


# -- synthetic bench -----------------------------------------------------------


@dataclass(frozen=True)
class BenchProtocol:
    phi_deg: tuple[float, ...] = (0.0, 45.0, 90.0, 180.0, 270.0)
    rpm_min: float = 100.0
    rpm_max: float = 19100.0
    steps: int = 40
    # noise standard deviation as a fraction of the largest nominal thrust
    noise_frac: float = 0.0
    repetitions: int = 3

    def rpm_grid(self) -> np.ndarray:
        return np.linspace(self.rpm_min, self.rpm_max, self.steps)


def generate_synthetic_bench(
    true_model: AeroModel | Mapping[float, float] | Callable[[float], float],
    protocol: BenchProtocol = BenchProtocol(),
    seed: int = 0,
    k_t: float | None = None,
    propeller_id: str | None = None,
) -> list[BenchSample]:
    """Simulate a load-cell sweep ``T = k(phi) w^2 + N(0, sigma^2)``.

    ``true_model`` is an :class:`AeroModel`, a ``{phi_deg: k}`` table, or a
    callable of ``phi`` in radians. Noisy readings are clipped at zero like a
    load cell under a pushing propeller.
    """
    if isinstance(true_model, AeroModel):
        coef = true_model.k
        k_t = true_model.k_t if k_t is None else k_t
        propeller_id = propeller_id or true_model.propeller_id
    elif isinstance(true_model, Mapping):
        table = {round(float(k_), 9): v for k_, v in true_model.items()}
        coef = lambda phi: table[round(math.degrees(phi), 9)]  # noqa: E731
        k_t = table.get(0.0, k_t)
    else:
        coef = true_model
    if k_t is None:
        k_t = coef(0.0)
    propeller_id = propeller_id or "synthetic"
    if not 1 <= protocol.repetitions <= 3:
        raise ValueError("repetitions must be in 1..3")

    rng = np.random.default_rng(seed)
    rpm = protocol.rpm_grid()
    omega = rpm * RPM_TO_RAD_S
    sigma = protocol.noise_frac * k_t * float(omega.max()) ** 2
    out = []
    for deg in protocol.phi_deg:
        phi = math.radians(deg)
        k = coef(phi)
        for rep in range(1, protocol.repetitions + 1):
            noise = rng.normal(0.0, sigma, size=omega.size) if sigma > 0 else np.zeros(omega.size)
            t = np.maximum(k * omega ** 2 + noise, 0.0)
            out.extend(
                BenchSample(phi=phi, omega=float(w), thrust=float(tt), repetition=rep, propeller_id=propeller_id)
                for w, tt in zip(omega, t)
            )
    return out


def identify(samples: Sequence[BenchSample]) -> tuple[AeroModel, dict]:
    """Full pipeline: average, nominal fit, angle fit, residual report."""
    averaged = average_repetitions(samples)
    k_t = fit_nominal(averaged)
    model = fit_angle_coefficient(averaged, k_t)
    return model, fit_report(averaged, model)
