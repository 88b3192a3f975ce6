import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from morphcomp.aero import (
    AeroModel,
    BenchDataError,
    BenchProtocol,
    BenchSample,
    ExtrapolationWarning,
    IdentificationError,
    ModelValidityError,
    anchor_coefficients,
    average_repetitions,
    cross_propeller_report,
    fit_angle_coefficient,
    fit_angle_coefficient_detailed,
    fit_nominal,
    generate_synthetic_bench,
    identify,
    ingest_bench_csv,
    paper_shaped_model,
    thrust,
    write_bench_csv,
)

KT = 1.0e-8
MODEL = paper_shaped_model(KT)
HEADER = "phi_deg,rpm,thrust_n,rep,propeller_id\n"


def test_thrust_examples():
    assert thrust(MODEL, 0.0, 0.0) == 0.0
    assert thrust(MODEL, 0.0, 2000.0) == pytest.approx(4.0e-2, rel=1e-15)
    ratio = thrust(MODEL, math.radians(270), 2000.0) / thrust(MODEL, 0.0, 2000.0)
    assert ratio == pytest.approx(0.25, rel=1e-12)
    assert MODEL.k(math.radians(45)) / KT == pytest.approx(0.875)


def test_thrust_rejects_negative_speed():
    with pytest.raises(ValueError):
        thrust(MODEL, 0.0, -1.0)


def test_extrapolation_warns_but_returns():
    with pytest.warns(ExtrapolationWarning):
        t = thrust(MODEL, math.radians(300), 1000.0)
    assert t == pytest.approx(MODEL.k(math.radians(300)) * 1e6)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        thrust(MODEL, math.radians(200), 1000.0)


def test_k_at_zero_is_nominal_and_floor_applies():
    m = AeroModel(k_t=KT, slope=-0.3e-8, intercept=1.02e-8, phi_valid=(0.0, 2.0))
    assert m.k(0.0) == KT
    assert m.k(100.0) == pytest.approx(1e-3 * KT)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(k_t=0.0, slope=-1e-9, intercept=0.0),
        dict(k_t=KT, slope=1e-9, intercept=KT),
        dict(k_t=KT, slope=-1e-9, intercept=1.06 * KT),
        dict(k_t=KT, slope=-1e-8, intercept=KT, phi_valid=(0.0, 2.0)),
    ],
)
def test_model_invariants(kwargs):
    with pytest.raises(ModelValidityError):
        AeroModel(**kwargs)


def test_model_json_roundtrip(tmp_path):
    p = tmp_path / "m.json"
    MODEL.save(p)
    back = AeroModel.load(p)
    assert back.k_t == MODEL.k_t and back.slope == MODEL.slope and back.intercept == MODEL.intercept
    assert back.phi_valid == pytest.approx(MODEL.phi_valid)
    assert set(MODEL.to_dict()) == {"propeller_id", "k_t", "slope_per_rad", "intercept", "phi_valid_deg"}


@given(
    phi=st.floats(min_value=0.0, max_value=math.radians(270)),
    dphi=st.floats(min_value=0.0, max_value=1.0),
    omega=st.floats(min_value=0.0, max_value=5000.0),
)
def test_thrust_monotone_in_phi_and_quadratic_in_omega(phi, dphi, omega):
    phi2 = min(phi + dphi, math.radians(270))
    assert thrust(MODEL, phi2, omega) <= thrust(MODEL, phi, omega)
    assert thrust(MODEL, phi, 2 * omega) == pytest.approx(4 * thrust(MODEL, phi, omega), rel=1e-14)


# -- CSV -----------------------------------------------------------------------


def test_ingest_converts_rpm(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text(HEADER + "45,19100,0.35,1,5in-3blade\n")
    (s,) = ingest_bench_csv(p)
    assert s.omega == pytest.approx(19100 * 2 * math.pi / 60)
    assert s.phi == pytest.approx(math.pi / 4)
    assert s.thrust == 0.35 and s.repetition == 1 and s.propeller_id == "5in-3blade"


def test_ingest_empty_file_warns(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("")
    with pytest.warns(UserWarning):
        assert ingest_bench_csv(p) == []


@pytest.mark.parametrize(
    "row, line",
    [
        ("45,19100,-0.1,1,5in-3blade", 3),
        ("45,19100,0.1,4,5in-3blade", 3),
        ("45,abc,0.1,1,5in-3blade", 3),
        ("45,19100,0.1,1", 3),
    ],
)
def test_ingest_reports_line_number(tmp_path, row, line):
    p = tmp_path / "bad.csv"
    p.write_text(HEADER + "0,100,0.0,1,5in-3blade\n" + row + "\n")
    with pytest.raises(BenchDataError, match=rf":{line}:"):
        ingest_bench_csv(p)


def test_ingest_rejects_wrong_header(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(BenchDataError, match=":1:"):
        ingest_bench_csv(p)


def test_csv_roundtrip(tmp_path):
    samples = generate_synthetic_bench(MODEL, BenchProtocol(noise_frac=0.01), seed=1)
    p = tmp_path / "s.csv"
    write_bench_csv(samples, p)
    back = ingest_bench_csv(p)
    assert len(back) == len(samples)
    for a, b in zip(samples, back):
        assert b.thrust == a.thrust
        assert b.omega == pytest.approx(a.omega, rel=1e-15)
        assert b.phi == pytest.approx(a.phi, rel=1e-15)


# -- averaging -----------------------------------------------------------------


def test_average_of_three():
    s = [BenchSample(0.5, 100.0, t, r) for r, t in enumerate((0.30, 0.32, 0.34), start=1)]
    (avg,) = average_repetitions(s)
    assert avg.thrust == pytest.approx(0.32)
    assert avg.n_averaged == 3


def test_single_repetition_passes_through_with_warning():
    s = [BenchSample(0.5, 100.0, 0.3, 1)]
    with pytest.warns(UserWarning, match="1 repetition"):
        (avg,) = average_repetitions(s)
    assert avg.thrust == 0.3


def test_averaging_divides_variance_by_three():
    rng = np.random.default_rng(7)
    n = 20000
    raw = rng.normal(1.0, 0.1, size=(n, 3))
    samples = [
        BenchSample(0.0, float(i), float(raw[i, r]), r + 1) for i in range(n) for r in range(3)
    ]
    avg = np.array([s.thrust for s in average_repetitions(samples)])
    ratio = raw[:, 0].var() / avg.var()
    assert ratio == pytest.approx(3.0, rel=0.05)


# -- identification ------------------------------------------------------------


def test_nominal_fit_noiseless_exact():
    samples = generate_synthetic_bench(MODEL, BenchProtocol(phi_deg=(0.0,)))
    assert fit_nominal(samples) == pytest.approx(KT, rel=1e-12)


def test_protocol_has_forty_steps_and_nominal_fit_uses_them():
    protocol = BenchProtocol()
    grid = protocol.rpm_grid()
    assert len(grid) == 40 and grid[0] == 100 and grid[-1] == 19100
    samples = average_repetitions(generate_synthetic_bench(MODEL, protocol))
    nominal = [s for s in samples if s.phi == 0.0]
    assert len(nominal) == 40
    with pytest.raises(IdentificationError):
        fit_nominal(nominal[:4])


def test_nominal_fit_noisy_within_one_percent():
    protocol = BenchProtocol(phi_deg=(0.0,), noise_frac=0.01)
    errs = [
        abs(fit_nominal(average_repetitions(generate_synthetic_bench(MODEL, protocol, seed=s))) / KT - 1)
        for s in range(100)
    ]
    assert max(errs) < 0.01


def test_linear_law_recovered_noiseless():
    # k = K_T (1 - 0.001 phi_deg 0.65/0.75)
    slope = -KT * 0.001 * (0.65 / 0.75) * (180 / math.pi)
    truth = AeroModel(KT, slope, KT, (0.0, math.radians(270)))
    model = fit_angle_coefficient(average_repetitions(generate_synthetic_bench(truth)), KT)
    assert model.slope == pytest.approx(truth.slope, rel=1e-6)
    assert model.intercept == pytest.approx(truth.intercept, rel=1e-6)


def test_anchor_line_interpolation():
    table = anchor_coefficients(KT)
    assert table[90.0] / KT == pytest.approx(0.77, abs=1e-12)
    model, _ = identify(generate_synthetic_bench(table))
    for deg in (45, 90, 135, 180, 225, 270):
        line = 0.90 + (0.25 - 0.90) * (deg - 45) / 225
        assert abs(model.k(math.radians(deg)) / KT - line) <= 0.02


def test_noisy_slope_within_three_standard_errors():
    inside = 0
    for seed in range(100):
        samples = average_repetitions(
            generate_synthetic_bench(MODEL, BenchProtocol(noise_frac=0.01), seed=seed)
        )
        fit = fit_angle_coefficient_detailed(samples, fit_nominal(samples))
        inside += abs(fit.model.slope - MODEL.slope) <= 3 * fit.slope_se
    assert inside == 100


def test_needs_two_occlusion_angles():
    samples = generate_synthetic_bench(MODEL, BenchProtocol(phi_deg=(0.0, 90.0)))
    with pytest.raises(IdentificationError):
        fit_angle_coefficient(samples, KT)


def test_rising_coefficient_is_rejected():
    table = {0.0: KT, 45.0: 1.01 * KT, 90.0: 1.02 * KT}
    samples = generate_synthetic_bench(table, BenchProtocol(phi_deg=(0.0, 45.0, 90.0)))
    with pytest.raises(ModelValidityError):
        fit_angle_coefficient(samples, KT)


def test_identify_report_is_clean_for_noiseless_data():
    model, report = identify(generate_synthetic_bench(MODEL))
    assert report["residual_max_abs"] < 1e-9
    assert report["r_squared"] == pytest.approx(1.0)
    assert report["n"] == 200


def test_generator_is_deterministic_and_clips_at_zero():
    protocol = BenchProtocol(noise_frac=0.05)
    a = generate_synthetic_bench(MODEL, protocol, seed=3)
    b = generate_synthetic_bench(MODEL, protocol, seed=3)
    assert a == b
    assert all(s.thrust >= 0 for s in a)
    assert len(a) == 5 * 40 * 3


# -- cross-propeller -----------------------------------------------------------


def _model(pid, intercept, slope=-0.2e-8):
    return AeroModel(intercept, slope, intercept, (0.0, 1.0), pid)


def test_cross_report_offset():
    rows = cross_propeller_report([_model("5in-2blade", 1.0e-8), _model("5in-3blade", 1.4e-8)])
    (row,) = rows
    assert row.intercept_offset == pytest.approx(0.4e-8)
    assert row.slope_ratio == pytest.approx(1.0)
    assert row.doubling_rule == "n/a"


def test_cross_report_single_model():
    assert cross_propeller_report([MODEL]) == []


def test_doubling_rule():
    (ok,) = cross_propeller_report([_model("5in-3blade", 1.0e-8), _model("6in-3blade", 2.0e-8)])
    assert ok.doubling_rule == "pass"
    (bad,) = cross_propeller_report([_model("5in-3blade", 1.0e-8), _model("6in-3blade", 1.2e-8)])
    assert bad.doubling_rule == "fail"
