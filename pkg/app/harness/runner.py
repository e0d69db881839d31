"""End-to-end pipelines: simulate, detect with the SIR or the SKR, estimate."""
import logging
import os
from typing import Optional, Union

import numpy as np

from app.config import settings
from app.core.divergence import pointwise_divergence, sir_detection_report, skr_detection_report
from app.core.estimation import estimate_uncertainty
from app.core.plants import get_plant, normalized_pair
from app.core.projection import sir_project, skr_costate, skr_estimate, skr_forward
from app.core.signals import save_columns_csv, save_csv, save_series_csv
from app.errors import ProjectionError
from app.harness.scenarios import generate_data, load_scenario, validate_scenario, window_bounds
from app.models.divergence import Verdict
from app.models.results import SkrProjectionResult
from app.schemas.report import DetectionReport, RunReport
from app.schemas.scenario import Scenario
from app.utils.file import ensure_output_dir, write_text_atomic

logger = logging.getLogger(__name__)

ScenarioSource = Union[str, dict, Scenario]


def _log_block(title: str, fields: dict, level: int = logging.INFO):
    logger.log(level, "=" * 50)
    logger.log(level, title)
    logger.log(level, "=" * 50)
    for key, value in fields.items():
        logger.log(level, f"{key}: {value}")
    logger.log(level, "=" * 50)


def prepare_scenario(
    source: ScenarioSource, seed: Optional[int] = None, burn_in: Optional[float] = None
) -> Scenario:
    """Load a scenario and apply command-line overrides, re-validating the result."""
    if isinstance(source, Scenario):
        document = source.model_dump(mode="json")
    elif isinstance(source, dict):
        document = dict(source)
    else:
        document = load_scenario(source).model_dump(mode="json")
    if seed is not None:
        document["seed"] = seed
    if burn_in is not None:
        document["burn_in"] = burn_in
    return validate_scenario(document)


def _output_dir(scenario: Scenario, out_dir: Optional[str]) -> str:
    if out_dir is not None:
        return ensure_output_dir(out_dir, create=False)
    return ensure_output_dir(os.path.join(settings.OUTPUT_DIR, scenario.name))


def _finish(
    command: str,
    scenario: Scenario,
    directory: str,
    files: dict,
    windows: Optional[list[DetectionReport]] = None,
    **extra,
) -> RunReport:
    windows = windows or []
    faulty = any(window.verdict is Verdict.FAULTY for window in windows)
    report = RunReport(
        command=command,
        scenario=scenario.model_dump(mode="json"),
        windows=windows,
        files={**files, "report": "report.txt"},
        verdict=Verdict.FAULTY if faulty else Verdict.FAULT_FREE,
        exit_status=2 if faulty else 0,
        **extra,
    )
    write_text_atomic(os.path.join(directory, "report.txt"), report.model_dump_json(indent=2) + "\n")

    logger.info("=" * 50)
    logger.info(f"{command.upper()} FINISHED")
    logger.info("=" * 50)
    logger.info(f"Windows: {len(windows)}")
    logger.info(f"Verdict: {report.verdict.value}")
    logger.info(f"Output: {directory}")
    logger.info("=" * 50 + "\n")
    return report


def _scenario_fields(scenario: Scenario) -> dict:
    return {
        "Name": scenario.name,
        "Plant": scenario.plant.name,
        "Grid": f"t0={scenario.grid.t0} dt={scenario.grid.dt} steps={scenario.grid.steps}",
        "Fault": scenario.fault.kind.value,
        "Window M": scenario.M if scenario.M is not None else "whole record",
        "Seed": scenario.seed,
        "Burn-in": scenario.burn_in,
    }


def _log_failure(command: str, exc: Exception):
    logger.error("=" * 50)
    logger.error(f"ERROR IN {command.upper()}")
    logger.error("=" * 50)
    logger.error(f"Exception: {str(exc)}")
    logger.error("=" * 50 + "\n")


# ==================== SIMULATE ====================
def run_simulate(
    source: ScenarioSource,
    out_dir: Optional[str] = None,
    seed: Optional[int] = None,
    burn_in: Optional[float] = None,
) -> RunReport:
    scenario = prepare_scenario(source, seed, burn_in)
    _log_block("SIMULATE - Scenario", _scenario_fields(scenario))
    try:
        directory = _output_dir(scenario, out_dir)
        data = generate_data(scenario, get_plant(scenario.plant.name, scenario.plant.matrices))
        save_csv(data, os.path.join(directory, "data.csv"))
        return _finish("simulate", scenario, directory, {"data": "data.csv"})
    except ProjectionError as e:
        _log_failure("simulate", e)
        raise


# ==================== DETECT SIR ====================
def run_detect_sir(
    source: ScenarioSource,
    out_dir: Optional[str] = None,
    seed: Optional[int] = None,
    burn_in: Optional[float] = None,
) -> RunReport:
    """Project the record onto the image manifold and evaluate J per window against the gamma threshold."""
    scenario = prepare_scenario(source, seed, burn_in)
    _log_block("DETECT SIR - Scenario", {**_scenario_fields(scenario), "Gamma": scenario.gamma})
    try:
        directory = _output_dir(scenario, out_dir)
        bundle = get_plant(scenario.plant.name, scenario.plant.matrices)
        sir, _ = normalized_pair(bundle)
        data = generate_data(scenario, bundle)
        result = sir_project(sir, data, hold=scenario.hold)

        windows = []
        for index, (start, stop) in enumerate(window_bounds(data.M, scenario.burn_in, scenario.M)):
            windows.append(sir_detection_report(
                data.slice(start, stop), result.slice(start, stop), scenario.gamma, window_index=index
            ))

        save_csv(data, os.path.join(directory, "data.csv"))
        save_series_csv(os.path.join(directory, "zhat.csv"), data.times, result.zhat, "zhat")
        save_columns_csv(os.path.join(directory, "divergence.csv"), data.times, {
            "D": pointwise_divergence(data.z, result.zhat, result.H),
            "H": result.H,
            "Hdual": result.Hdual,
        })
        files = {"data": "data.csv", "zhat": "zhat.csv", "divergence": "divergence.csv"}
        return _finish("detect-sir", scenario, directory, files, windows)
    except ProjectionError as e:
        _log_failure("detect-sir", e)
        raise


# ==================== DETECT SKR ====================
def run_detect_skr(
    source: ScenarioSource,
    out_dir: Optional[str] = None,
    seed: Optional[int] = None,
    burn_in: Optional[float] = None,
) -> RunReport:
    """Residual generator over the whole record, adjoint pass per window with lam(t1) = 0."""
    scenario = prepare_scenario(source, seed, burn_in)
    _log_block("DETECT SKR - Scenario", {
        **_scenario_fields(scenario), "Alpha": scenario.alpha, "Co-state": scenario.skr_costate.value,
    })
    try:
        directory = _output_dir(scenario, out_dir)
        bundle = get_plant(scenario.plant.name, scenario.plant.matrices)
        _, skr = normalized_pair(bundle)
        data = generate_data(scenario, bundle)
        residual, states = skr_forward(skr, data, hold=scenario.hold)

        bounds = window_bounds(data.M, scenario.burn_in, scenario.M)
        windows, times, estimates = [], [], []
        for index, (start, stop) in enumerate(bounds):
            window = data.slice(start, stop)
            r = residual.samples[start:stop]
            xhat = states[start:stop]
            lam = skr_costate(skr, r, xhat, window, costate=scenario.skr_costate, hold=scenario.hold)
            result = SkrProjectionResult(
                t0=window.t0,
                dt=window.dt,
                p=skr.p,
                zdelta=skr_estimate(skr, xhat, lam, r),
                residual_r=r,
                costate=lam,
                state_xhat=xhat,
                mode=scenario.skr_costate,
            )
            windows.append(skr_detection_report(window, result, scenario.alpha, window_index=index))
            times.append(window.times)
            estimates.append(result.zdelta)

        times, estimates = np.concatenate(times), np.vstack(estimates)
        evaluated = np.concatenate([data.z[start:stop] for start, stop in bounds])
        ratio = float(np.sum(estimates ** 2) / max(np.sum(evaluated ** 2), settings.ENERGY_FLOOR))

        save_csv(data, os.path.join(directory, "data.csv"))
        save_series_csv(os.path.join(directory, "zdelta.csv"), times, estimates, "zdelta")
        save_series_csv(os.path.join(directory, "residual.csv"), data.times, residual.samples, "r")
        save_columns_csv(os.path.join(directory, "divergence.csv"), times, {
            "D": 0.5 * np.sum(estimates * estimates, axis=1),
        })
        files = {
            "data": "data.csv", "zdelta": "zdelta.csv", "residual": "residual.csv", "divergence": "divergence.csv",
        }
        return _finish("detect-skr", scenario, directory, files, windows, zdelta_energy_ratio=ratio)
    except ProjectionError as e:
        _log_failure("detect-skr", e)
        raise


# ==================== ESTIMATE ====================
def run_estimate(
    source: ScenarioSource,
    out_dir: Optional[str] = None,
    seed: Optional[int] = None,
    burn_in: Optional[float] = None,
) -> RunReport:
    scenario = prepare_scenario(source, seed, burn_in)
    _log_block("ESTIMATE - Scenario", {**_scenario_fields(scenario), "Co-state": scenario.skr_costate.value})
    try:
        directory = _output_dir(scenario, out_dir)
        bundle = get_plant(scenario.plant.name, scenario.plant.matrices)
        _, skr = normalized_pair(bundle)
        data = generate_data(scenario, bundle)
        estimate = estimate_uncertainty(skr, data, costate=scenario.skr_costate, hold=scenario.hold)

        columns = {f"du_{i + 1}": estimate.du[:, i] for i in range(skr.p)}
        columns.update({f"dy_{i + 1}": estimate.dy[:, i] for i in range(skr.m)})
        residuals = {f"r_{i + 1}": estimate.residual_r[:, i] for i in range(skr.m)}
        residuals.update({f"replay_{i + 1}": estimate.replay_r[:, i] for i in range(skr.m)})
        save_csv(data, os.path.join(directory, "data.csv"))
        save_columns_csv(os.path.join(directory, "zdelta.csv"), data.times, columns)
        save_columns_csv(os.path.join(directory, "residual.csv"), data.times, residuals)

        ratio = float(np.sum(estimate.zdelta ** 2) / max(np.sum(data.z ** 2), settings.ENERGY_FLOOR))
        logger.info(f"Consistency defect: {estimate.consistency_defect:.3e}")
        files = {"data": "data.csv", "zdelta": "zdelta.csv", "residual": "residual.csv"}
        return _finish(
            "estimate", scenario, directory, files,
            consistency_defect=estimate.consistency_defect, zdelta_energy_ratio=ratio,
        )
    except ProjectionError as e:
        _log_failure("estimate", e)
        raise
