import json
import os

import numpy as np
import pandas as pd
import pytest

from app.errors import ConfigInvalid
from app.harness.runner import prepare_scenario, run_detect_sir, run_detect_skr, run_estimate, run_simulate
from app.harness.scenarios import generate_data, load_scenario, make_rng, validate_scenario, window_bounds
from app.harness.verify import _projection_plant_checks, detection_trials, run_verify
from app.models.divergence import Verdict


def _scenario(**overrides):
    document = {"name": "unit", "grid": {"dt": 0.01, "steps": 2001}, "M": 200}
    document.update(overrides)
    return document


SENSOR_BIAS = {"kind": "sensor_bias", "t_on": 5.0, "vector": [0.5]}


# ==================== SCENARIOS ====================
@pytest.mark.parametrize("document", [
    {"fault": {"kind": "sensor_bias", "t_on": 50.0, "vector": [0.5]}},
    {"fault": {"kind": "actuator_gain", "t_on": 1.0}},
    {"fault": {"kind": "actuator_bias", "t_on": 1.0}},
    {"M": 5000},
    {"gamma": "high"},
    {"burn_in": 1.0},
    {"seed": -1},
    {"input": {"kind": "file"}},
])
def test_invalid_scenarios_are_rejected(document):
    with pytest.raises(ConfigInvalid):
        validate_scenario(_scenario(**document))


def test_load_scenario_from_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(_scenario(fault=SENSOR_BIAS)), encoding="utf-8")
    scenario = load_scenario(str(path))
    assert scenario.fault.vector == [0.5]
    assert scenario.grid.t1 == pytest.approx(20.0)


def test_load_scenario_reports_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigInvalid):
        load_scenario(str(path))
    with pytest.raises(ConfigInvalid):
        load_scenario(str(tmp_path / "missing.json"))


def test_overrides_are_revalidated():
    scenario = prepare_scenario(_scenario(), seed=42, burn_in=0.2)
    assert scenario.seed == 42 and scenario.burn_in == 0.2
    with pytest.raises(ConfigInvalid):
        prepare_scenario(_scenario(), burn_in=1.5)


def test_window_bounds():
    assert window_bounds(1000, 0.1, 200) == [(100, 300), (300, 500), (500, 700), (700, 900)]
    assert window_bounds(1000, 0.0, None) == [(0, 1000)]
    with pytest.raises(ConfigInvalid):
        window_bounds(1000, 0.9, 200)


def test_sensor_bias_starts_at_t_on(lti_bundle):
    nominal = generate_data(validate_scenario(_scenario()), lti_bundle)
    faulty = generate_data(validate_scenario(_scenario(fault=SENSOR_BIAS)), lti_bundle)
    offset = faulty.y[:, 0] - nominal.y[:, 0]
    assert np.allclose(offset[:500], 0.0)
    assert np.allclose(offset[500:], 0.5)
    assert np.array_equal(faulty.u, nominal.u)


def test_actuator_gain_changes_the_outputs_only(lti_bundle):
    fault = {"kind": "actuator_gain", "t_on": 5.0, "factor": 0.0}
    nominal = generate_data(validate_scenario(_scenario()), lti_bundle)
    faulty = generate_data(validate_scenario(_scenario(fault=fault)), lti_bundle)
    assert np.array_equal(faulty.u, nominal.u)
    assert np.allclose(faulty.y[:490], nominal.y[:490])
    assert not np.allclose(faulty.y[600:], nominal.y[600:])


def test_noise_is_reproducible(lti_bundle):
    scenario = validate_scenario(_scenario(noise={"amplitude": [0.1]}, seed=5))
    first = generate_data(scenario, lti_bundle, make_rng(5))
    second = generate_data(scenario, lti_bundle, make_rng(5))
    clean = generate_data(validate_scenario(_scenario()), lti_bundle)
    assert np.array_equal(first.z, second.z)
    assert 0.0 < np.max(np.abs(first.z - clean.z)) <= 0.1


def test_recorded_file_rejects_actuator_faults(tmp_path, lti_bundle):
    path = tmp_path / "data.csv"
    path.write_text("t,u_1,y_1\n0,0,0\n0.01,0,0\n0.02,0,0\n", encoding="utf-8")
    scenario = validate_scenario({
        "input": {"kind": "file", "path": str(path), "recorded": True},
        "fault": {"kind": "actuator_bias", "t_on": 0.0, "vector": [1.0]},
    })
    with pytest.raises(ConfigInvalid):
        generate_data(scenario, lti_bundle)


# ==================== RUNNERS ====================
def test_simulate_writes_data(output_root):
    report = run_simulate(_scenario())
    directory = output_root / "unit"
    frame = pd.read_csv(directory / "data.csv")
    assert list(frame.columns) == ["t", "u_1", "y_1"]
    assert len(frame) == 2001
    assert report.exit_status == 0
    assert json.loads((directory / "report.txt").read_text())["command"] == "simulate"


def test_nominal_detect_sir_is_fault_free(output_root):
    report = run_detect_sir(_scenario())
    assert report.verdict is Verdict.FAULT_FREE
    assert report.exit_status == 0
    assert len(report.windows) == 9
    for window in report.windows:
        assert window.J / window.energy < 1e-6
    assert set(report.files) == {"data", "zhat", "divergence", "report"}


def test_sensor_bias_is_detected_by_sir(output_root):
    report = run_detect_sir(_scenario(fault=SENSOR_BIAS))
    assert report.verdict is Verdict.FAULTY
    assert report.exit_status == 2
    assert report.windows[0].verdict is Verdict.FAULT_FREE
    assert report.windows[-1].verdict is Verdict.FAULTY


def test_sensor_bias_is_detected_by_skr(output_root):
    report = run_detect_skr(_scenario(fault=SENSOR_BIAS))
    assert report.verdict is Verdict.FAULTY
    assert report.zdelta_energy_ratio > 0.0
    assert (output_root / "unit" / "residual.csv").exists()


def test_estimate_writes_estimates(output_root):
    report = run_estimate(_scenario(fault=SENSOR_BIAS, M=None))
    directory = output_root / "unit"
    frame = pd.read_csv(directory / "zdelta.csv")
    assert list(frame.columns) == ["t", "du_1", "dy_1"]
    assert report.consistency_defect is not None
    assert report.windows == []
    assert report.exit_status == 0


def test_explicit_output_directory_must_exist(tmp_path):
    with pytest.raises(ConfigInvalid):
        run_simulate(_scenario(), out_dir=os.path.join(tmp_path, "missing"))


def test_unknown_plant(output_root):
    with pytest.raises(ConfigInvalid):
        run_simulate(_scenario(plant={"name": "pendulum"}))


# ==================== VERIFY ====================
def test_lti_oracle_suite_passes():
    report = run_verify("lti_oracle")
    assert report.passed, [check for check in report.checks if not check.passed]
    assert {check.name for check in report.checks} >= {"scalar_lti:inner", "symmetric:duality"}


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_verify("everything")


@pytest.mark.slow
@pytest.mark.parametrize("suite", ["factorization", "projection", "divergence", "estimation", "detection"])
def test_numerical_suites_pass(suite):
    report = run_verify(suite)
    assert report.passed, [check for check in report.checks if not check.passed]


@pytest.mark.slow
def test_detection_rates_over_seeded_trials():
    false_alarms, detections = detection_trials(trials=100, M=500, gamma=0.95, bias=0.5)
    assert false_alarms == 0
    assert detections == 100


@pytest.mark.slow
def test_projection_checks_cover_twenty_windows(cubic_bundle):
    records = {check.name: check for check in _projection_plant_checks(cubic_bundle)}
    assert records["scalar_cubic:fixed_point"].detail.startswith("20 windows")
    for name in ("fixed_point", "idempotency", "skr_hamiltonian_identity", "skr_idempotency"):
        assert records[f"scalar_cubic:{name}"].passed, records[f"scalar_cubic:{name}"]
