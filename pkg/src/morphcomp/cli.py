"""Command-line entry point.

    morphcomp identify --bench sweep.csv --out model.json
    morphcomp run --scenario hover.json --out runs/hover [--compensation on|off] [--seed N]
    morphcomp paper-suite --out runs/suite [--jobs N]
    morphcomp bench --out sweep.csv [--noise 0.01] [--seed N] [--shape anchors|linear]

Exit codes: 0 success, 1 suite checks failed, 2 input error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .aero import (
    BenchDataError,
    BenchProtocol,
    anchor_coefficients,
    paper_shaped_model,
    IdentificationError,
    generate_synthetic_bench,
    identify,
    ingest_bench_csv,
    write_bench_csv,
)
from .control import AllocationError
from .sim.dynamics import SimulationError
from .sim.scenario import Scenario, ScenarioConfigError, load_scenario, run_scenario
from .sim.summary import format_euclidean_table, format_transition_table, summarize, summary_dict
from .suite import run_paper_suite, transition_rows

log = logging.getLogger("morphcomp")

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_INPUT = 2
EXIT_RUNTIME = 3


@dataclass
class RunManifest:
    command: str
    config_paths: list[str]
    seed: int | None
    output_dir: str
    tool_version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    argv: list[str] = field(default_factory=list)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2) + "\n")


def _on_off(value: str) -> bool:
    v = value.lower()
    if v in ("on", "true", "1"):
        return True
    if v in ("off", "false", "0"):
        return False
    raise argparse.ArgumentTypeError("expected on|off")


def write_scenario_outputs(result, out_dir: Path, name: str | None = None) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    result.write_csv(out_dir / "timeseries.csv")
    summary = summary_dict(name or result.name, summarize(result))
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def cmd_identify(args) -> int:
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            samples = ingest_bench_csv(args.bench)
        for w in caught:
            log.warning("%s", w.message)
        if not samples:
            log.error("%s: no bench samples", args.bench)
            return EXIT_INPUT
        model, report = identify(samples)
    except (OSError, BenchDataError, IdentificationError) as exc:
        log.error("identification failed: %s", exc)
        return EXIT_INPUT

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    report["k_ratio_45deg"] = model.k(0.7853981633974483) / model.k_t
    out.with_suffix(".fit.json").write_text(json.dumps(report, indent=2) + "\n")
    RunManifest("identify", [str(args.bench)], None, str(out.parent), argv=sys.argv[1:]).write(
        out.with_suffix(".manifest.json")
    )
    print(
        f"{model.propeller_id}: K_T={model.k_t:.6g} slope={model.slope:.6g}/rad "
        f"intercept={model.intercept:.6g} R^2={report['r_squared']:.6f}"
    )
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except (OSError, ScenarioConfigError) as exc:
        log.error("bad scenario: %s", exc)
        return EXIT_INPUT
    if args.seed is not None:
        scenario.seed = args.seed
    if args.compensation is not None:
        scenario = scenario.with_compensation(args.compensation)

    out = Path(args.out)
    try:
        result = run_scenario(scenario)
    except (SimulationError, AllocationError) as exc:
        log.error("simulation aborted: %s", exc)
        return EXIT_RUNTIME
    summary = write_scenario_outputs(result, out)
    (out / "scenario.json").write_text(json.dumps(scenario.to_dict(), indent=2) + "\n")
    RunManifest("run", [str(args.scenario)], scenario.seed, str(out), argv=sys.argv[1:]).write(
        out / "manifest.json"
    )
    for seg in summary["segments"]:
        ex, ey, ez = seg["abs_error"]
        print(f"{seg['label']:<12} |e|=({ex:.4f}, {ey:.4f}, {ez:.4f}) mu={seg['eucl_mu']:.4f} sigma={seg['eucl_sigma']:.4f}")
    return EXIT_OK


def cmd_paper_suite(args) -> int:
    out = Path(args.out)
    base = Scenario(seed=args.seed)
    t0 = time.perf_counter()
    try:
        report = run_paper_suite(base, compensation_override=args.compensation, jobs=args.jobs)
    except (SimulationError, AllocationError) as exc:
        log.error("simulation aborted: %s", exc)
        return EXIT_RUNTIME
    elapsed = time.perf_counter() - t0

    out.mkdir(parents=True, exist_ok=True)
    for name, result in report.results.items():
        write_scenario_outputs(result, out / name)
    tables = (
        "Position errors in the final configuration [m]\n"
        + format_transition_table(transition_rows(report))
        + "\n\nEuclidean tracking error per segment [m]\n"
        + format_euclidean_table(list(report.summaries.items()))
        + "\n"
    )
    checks = "\n".join(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}" for c in report.checks)
    (out / "tables.txt").write_text(tables + "\n" + checks + "\n")
    (out / "suite.json").write_text(
        json.dumps(
            {
                "elapsed_s": elapsed,
                "passed": report.passed,
                "checks": [asdict(c) for c in report.checks],
            },
            indent=2,
        )
        + "\n"
    )
    RunManifest("paper-suite", [], args.seed, str(out), argv=sys.argv[1:]).write(out / "manifest.json")
    print(tables)
    print(checks)
    print(f"suite finished in {elapsed:.1f} s")
    if not report.passed:
        failed = ", ".join(c.name for c in report.checks if not c.passed)
        log.error("failed checks: %s", failed)
        return EXIT_CHECKS_FAILED
    return EXIT_OK


def cmd_bench(args) -> int:
    protocol = BenchProtocol(noise_frac=args.noise)
    if args.shape == "linear":
        truth = paper_shaped_model(args.k_t, args.propeller_id)
    else:
        truth = anchor_coefficients(args.k_t, protocol.phi_deg)
    samples = generate_synthetic_bench(truth, protocol, seed=args.seed, propeller_id=args.propeller_id)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_bench_csv(samples, args.out)
    print(f"wrote {len(samples)} samples to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="morphcomp", description=__doc__.split("\n")[0] if __doc__ else None)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("identify", help="fit K_T and k(phi) from a bench CSV")
    s.add_argument("--bench", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_identify)

    s = sub.add_parser("run", help="fly one scenario")
    s.add_argument("--scenario", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--compensation", type=_on_off, default=None, metavar="on|off")
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("paper-suite", help="run the nine hover/forward-flight experiments")
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--compensation", type=_on_off, default=None, metavar="on|off",
                   help="force compensation for every run (off = negative control)")
    s.set_defaults(func=cmd_paper_suite)

    s = sub.add_parser("bench", help="write a synthetic bench sweep CSV")
    s.add_argument("--out", required=True)
    s.add_argument("--noise", type=float, default=0.0, help="sigma as a fraction of max thrust")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--k-t", type=float, default=1.0e-8)
    s.add_argument("--propeller-id", default="5in-3blade")
    s.add_argument("--shape", choices=("anchors", "linear"), default="anchors",
                   help="anchors: measured 45/270 deg fractions; linear: exact k(0)=K_T line")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    level = os.environ.get("MORPHCOMP_LOG", "WARNING").upper()
    logging.basicConfig(
        level=level if isinstance(logging.getLevelName(level), int) else "WARNING",
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
