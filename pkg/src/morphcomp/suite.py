"""The nine hover/forward-flight experiments and their relative checks.

Hover: X -> O_asym -> X without and with compensation, and hovering in the
symmetric O configuration while compensation is switched off and on again.
Forward flight: the same three kinds of run on a constant-height circle and
on a circle with varying height.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import occlusion_angle, prop_centers
from .sim.scenario import CompensationSchedule, MorphEvent, Scenario, ScenarioResult, run_scenario
from .sim.summary import SegmentSummary, summarize
from .sim.trajectory import Circle, CircleVarying, Hover

HOVER_POINT = (0.0, 0.0, 1.5)

# relative thresholds of the checks
CLOSED_FORM_RTOL = 0.05
COMPENSATED_MAX_ERROR = 0.01
DRIFT_MIN = 0.02
HALVING_RATIO = 0.6


def paper_scenarios(base: Scenario | None = None) -> list[Scenario]:
    base = base or Scenario()

    def make(name, trajectory, initial, events, comp, duration):
        sc = Scenario(**{**base.__dict__})
        sc.name = name
        sc.trajectory = trajectory
        sc.morph_initial = initial
        sc.morph_events = events
        sc.compensation = comp
        sc.duration = duration
        return sc

    hover = Hover(HOVER_POINT)
    x_o_x = [MorphEvent(8.0, "O_asym"), MorphEvent(20.0, "X")]
    out = [
        make("hover_x_o_nc", hover, "X", x_o_x, CompensationSchedule(False), 30.0),
        make("hover_x_o_c", hover, "X", x_o_x, CompensationSchedule(True), 30.0),
        make(
            "hover_o_toggle", hover, "O", [],
            CompensationSchedule(True, ((10.0, False), (20.0, True))), 30.0,
        ),
    ]
    for tag, traj in (("circle", Circle()), ("circle_vz", CircleVarying())):
        x_o = [MorphEvent(12.0, "O_asym")]
        out += [
            make(f"{tag}_x_o_nc", traj, "X", x_o, CompensationSchedule(False), 36.0),
            make(f"{tag}_o_toggle", traj, "O_asym", [], CompensationSchedule(False, ((18.0, True),)), 36.0),
            make(f"{tag}_x_o_c", traj, "X", x_o, CompensationSchedule(True), 36.0),
        ]
    return out


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass
class SuiteReport:
    results: dict[str, ScenarioResult]
    summaries: dict[str, list[SegmentSummary]]
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _seg(summaries, label, last=True) -> SegmentSummary | None:
    hits = [s for s in summaries if s.label == label]
    if not hits:
        return None
    return hits[-1] if last else hits[0]


def check_hover_closed_form(sc: Scenario, summaries) -> CheckResult:
    """Symmetric O without compensation sags by g(1-k)/(k k_p); with it, it holds height."""
    geom = sc.geometry
    phi = occlusion_angle(geom.geometry, geom.preset("O")).phi
    k_bar = float(np.mean([sc.model.k(p) / sc.model.k_t for p in phi]))
    expected = sc.vehicle.g * (1.0 - k_bar) / (k_bar * sc.gains.k_p)
    nc = _seg(summaries, "O_nc")
    c = _seg(summaries, "O_c")
    if nc is None or c is None:
        return CheckResult("C5 hover closed form", False, "missing O_nc or O_c segment")
    sag = -nc.offset[2]
    ok_nc = abs(sag - expected) <= CLOSED_FORM_RTOL * expected
    ok_c = c.abs_error[2] < COMPENSATED_MAX_ERROR
    return CheckResult(
        "C5 hover closed form",
        ok_nc and ok_c,
        f"n.c. sag {sag:.4f} m vs closed form {expected:.4f} m (k={k_bar:.4f}); "
        f"c. |z err| {c.abs_error[2]:.2e} m",
    )


def lateral_drift(seg: SegmentSummary) -> np.ndarray:
    return np.array(seg.offset[:2])


def check_asymmetric_drift(sc: Scenario, nc_summ, c_summ) -> CheckResult:
    """Less-occluded propeller 3 pushes the vehicle away from its side."""
    nc = _seg(nc_summ, "O_asym_nc")
    c = _seg(c_summ, "O_asym_c")
    if nc is None or c is None:
        return CheckResult("C6 asymmetric drift", False, "missing O_asym_nc or O_asym_c segment")
    p3 = prop_centers(sc.geometry.geometry, sc.geometry.preset("O_asym"))[2]
    d_nc = lateral_drift(nc)
    d_c = lateral_drift(c)
    away = float(d_nc @ -p3) > 0
    ok = np.linalg.norm(d_nc) > DRIFT_MIN and away and np.linalg.norm(d_c) < COMPENSATED_MAX_ERROR
    return CheckResult(
        "C6 asymmetric drift",
        bool(ok),
        f"n.c. drift {np.linalg.norm(d_nc):.4f} m ({'away from' if away else 'toward'} prop 3); "
        f"c. drift {np.linalg.norm(d_c):.2e} m",
    )


def check_halving(tag: str, summaries: dict[str, list[SegmentSummary]]) -> CheckResult:
    name = f"C7 tracking halving ({tag})"
    nc = _seg(summaries[f"{tag}_x_o_nc"], "O_asym_nc")
    c = _seg(summaries[f"{tag}_x_o_c"], "O_asym_c")
    t_nc = _seg(summaries[f"{tag}_o_toggle"], "O_asym_nc")
    t_c = _seg(summaries[f"{tag}_o_toggle"], "O_asym_c")
    if None in (nc, c, t_nc, t_c):
        return CheckResult(name, False, "missing O segments")
    r1 = c.eucl_mu / nc.eucl_mu
    r2 = t_c.eucl_mu / t_nc.eucl_mu
    return CheckResult(
        name,
        r1 < HALVING_RATIO and r2 < HALVING_RATIO,
        f"X->O runs: mu_c/mu_nc = {c.eucl_mu:.4f}/{nc.eucl_mu:.4f} = {r1:.3f}; "
        f"toggle: {t_c.eucl_mu:.4f}/{t_nc.eucl_mu:.4f} = {r2:.3f}",
    )


def unoccluded_prefix(result: ScenarioResult) -> int:
    """Number of leading ticks before any propeller overlaps the body."""
    hit = np.flatnonzero(np.any(result.phi > 0, axis=1))
    return int(hit[0]) if hit.size else len(result.t)


def check_gate(pairs: list[tuple[ScenarioResult, ScenarioResult]]) -> CheckResult:
    details = []
    ok = True
    for a, b in pairs:
        n = min(unoccluded_prefix(a), unoccluded_prefix(b))
        same = np.array_equal(a.omega_cmd[:n], b.omega_cmd[:n])
        ok &= bool(same) and n > 0
        details.append(f"{a.name}/{b.name}: {n} X ticks {'identical' if same else 'DIFFER'}")
    return CheckResult("C8 gate invariance", ok, "; ".join(details))


def _run(args):
    sc, override = args
    return run_scenario(sc, compensation_override=override)


def run_paper_suite(
    base: Scenario | None = None, compensation_override: bool | None = None, jobs: int = 1
) -> SuiteReport:
    scenarios = paper_scenarios(base)
    work = [(sc, compensation_override) for sc in scenarios]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run, work))
    else:
        results = [_run(w) for w in work]
    by_name = {r.name: r for r in results}
    summaries = {name: summarize(r) for name, r in by_name.items()}
    sc0 = scenarios[0]
    report = SuiteReport(by_name, summaries)
    report.checks = [
        check_hover_closed_form(sc0, summaries["hover_o_toggle"]),
        check_asymmetric_drift(sc0, summaries["hover_x_o_nc"], summaries["hover_x_o_c"]),
        check_halving("circle", summaries),
        check_halving("circle_vz", summaries),
        check_gate(
            [
                (by_name[f"{tag}_x_o_nc"], by_name[f"{tag}_x_o_c"])
                for tag in ("hover", "circle", "circle_vz")
            ]
        ),
    ]
    return report


def transition_rows(report: SuiteReport):
    rows = []
    for name, segs in report.summaries.items():
        for prev, cur in zip(segs, segs[1:]):
            rows.append((name, prev, cur))
    return rows
