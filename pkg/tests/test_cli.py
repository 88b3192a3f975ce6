import hashlib
import json
import math
import subprocess
import sys

import pytest

from morphcomp import cli
from morphcomp.aero import AeroModel
from morphcomp.sim.dynamics import SimulationError

HOVER = {
    "name": "cli_hover",
    "duration": 4.0,
    "trajectory": {"type": "hover", "position": [0.0, 0.0, 1.5]},
    "morphology": {"initial": "X", "events": [{"t": 1.0, "preset": "O"}]},
    "compensation": True,
    "sensor_noise": {"position": 0.001, "velocity": 0.001},
}


@pytest.fixture
def scenario_file(tmp_path):
    p = tmp_path / "hover.json"
    p.write_text(json.dumps(HOVER))
    return p


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_identify_anchor_bench(tmp_path):
    bench, out = tmp_path / "b.csv", tmp_path / "model.json"
    assert cli.main(["bench", "--out", str(bench)]) == 0
    assert cli.main(["identify", "--bench", str(bench), "--out", str(out)]) == 0
    model = AeroModel.load(out)
    assert model.k(math.radians(45)) / model.k_t == pytest.approx(0.90, abs=0.02)
    report = json.loads(out.with_suffix(".fit.json").read_text())
    assert {"residual_max_abs", "residual_rms", "r_squared"} <= set(report)
    manifest = json.loads(out.with_suffix(".manifest.json").read_text())
    assert manifest["command"] == "identify" and manifest["config_paths"] == [str(bench)]


def test_identify_noiseless_linear_bench(tmp_path):
    bench, out = tmp_path / "b.csv", tmp_path / "m.json"
    cli.main(["bench", "--out", str(bench), "--shape", "linear"])
    assert cli.main(["identify", "--bench", str(bench), "--out", str(out)]) == 0
    report = json.loads(out.with_suffix(".fit.json").read_text())
    assert report["residual_max_abs"] < 1e-9


def test_identify_input_errors(tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    assert cli.main(["identify", "--bench", str(empty), "--out", str(tmp_path / "m.json")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("phi_deg,rpm,thrust_n,rep,propeller_id\n0,100,-1,1,p\n")
    assert cli.main(["identify", "--bench", str(bad), "--out", str(tmp_path / "m.json")]) == 2
    assert cli.main(["identify", "--bench", str(tmp_path / "missing.csv"), "--out", "x"]) == 2


def test_run_writes_outputs(tmp_path, scenario_file):
    out = tmp_path / "run"
    assert cli.main(["run", "--scenario", str(scenario_file), "--out", str(out)]) == 0
    for name in ("timeseries.csv", "summary.json", "scenario.json", "manifest.json"):
        assert (out / name).exists()
    summary = json.loads((out / "summary.json").read_text())
    assert [s["label"] for s in summary["segments"]] == ["X", "O_c"]
    assert summary["transitions"][0]["start"] == "X" and summary["transitions"][0]["final"] == "O_c"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 0 and manifest["tool_version"]


def test_compensation_override_flips_the_toggle(tmp_path, scenario_file):
    out = tmp_path / "off"
    assert cli.main(["run", "--scenario", str(scenario_file), "--out", str(out), "--compensation=off"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert [s["label"] for s in summary["segments"]] == ["X", "O_nc"]
    assert json.loads((out / "scenario.json").read_text())["compensation"]["initial"] is False


def test_manifest_reproduces_the_run(tmp_path, scenario_file):
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["run", "--scenario", str(scenario_file), "--out", str(a), "--seed", "3"])
    # rerun from the resolved scenario recorded next to the outputs
    cli.main(["run", "--scenario", str(a / "scenario.json"), "--out", str(b)])
    assert _digest(a / "timeseries.csv") == _digest(b / "timeseries.csv")


def test_run_input_and_runtime_errors(tmp_path, scenario_file, monkeypatch):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**HOVER, "colour": "red"}))
    assert cli.main(["run", "--scenario", str(bad), "--out", str(tmp_path / "x")]) == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert cli.main(["run", "--scenario", str(broken), "--out", str(tmp_path / "x")]) == 2
    assert cli.main(["run", "--scenario", str(scenario_file), "--out", "x", "--compensation", "maybe"]) == 2

    def explode(*a, **k):
        raise SimulationError("non-finite state")

    monkeypatch.setattr(cli, "run_scenario", explode)
    assert cli.main(["run", "--scenario", str(scenario_file), "--out", str(tmp_path / "y")]) == 3


def test_no_command_is_an_input_error():
    assert cli.main([]) == 2


def test_console_entry_and_log_level(tmp_path, scenario_file):
    env = {"MORPHCOMP_LOG": "debug", "PATH": ""}
    proc = subprocess.run(
        [sys.executable, "-m", "morphcomp.cli", "identify", "--bench", str(tmp_path / "none.csv"), "--out", "m"],
        capture_output=True,
        text=True,
        env=env,
    )
    assert proc.returncode == 2
    assert "ERROR morphcomp" in proc.stderr


@pytest.mark.slow
def test_paper_suite_negative_control(tmp_path):
    out = tmp_path / "neg"
    code = cli.main(["paper-suite", "--out", str(out), "--compensation", "off", "--jobs", "2"])
    assert code == 1
    checks = {c["name"]: c["passed"] for c in json.loads((out / "suite.json").read_text())["checks"]}
    assert not checks["C5 hover closed form"]
    assert not checks["C6 asymmetric drift"]
    assert not checks["C7 tracking halving (circle)"]
    assert not checks["C7 tracking halving (circle_vz)"]
