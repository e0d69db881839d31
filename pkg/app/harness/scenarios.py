"""Scenario loading, excitation, fault injection and evaluation windows."""
import json
import logging
import math
from typing import Optional

import numpy as np
from pydantic import ValidationError

from app.core.plants import PlantBundle
from app.core.signals import load_csv
from app.core.systems import simulate
from app.errors import ConfigInvalid
from app.models.signals import LatentWindow, SignalWindow
from app.schemas.scenario import FaultKind, InputKind, Scenario

logger = logging.getLogger(__name__)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config: {exc}", {"path": str(path)}) from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config is not valid JSON: {exc.msg}", {"line": exc.lineno}) from exc
    return validate_scenario(document)


def validate_scenario(document: dict) -> Scenario:
    try:
        return Scenario.model_validate(document)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first["loc"])
        raise ConfigInvalid(f"invalid scenario: {where}: {first['msg']}", {"errors": exc.error_count()}) from exc


def _channel_vector(values, size: int, label: str) -> np.ndarray:
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 1:
        return np.full(size, values[0])
    if values.size != size:
        raise ConfigInvalid(f"{label} needs 1 or {size} entries", {"given": values.size})
    return values


# ==================== EXCITATION ====================
def build_inputs(scenario: Scenario, p: int, rng: np.random.Generator) -> np.ndarray:
    """Commanded input samples (steps x p) on the scenario grid."""
    grid = scenario.grid
    times = grid.t0 + grid.dt * np.arange(grid.steps)
    excitation = scenario.input
    u = np.zeros((grid.steps, p))

    if excitation.kind is InputKind.SINUSOIDS:
        for tone in excitation.sinusoids:
            if tone.channel >= p:
                raise ConfigInvalid(f"sinusoid channel {tone.channel} but the plant has {p} inputs")
            phase = rng.uniform(0.0, 2.0 * np.pi) if excitation.random_phase else tone.phase
            u[:, tone.channel] += tone.amplitude * np.sin(tone.frequency * times + phase)
    elif excitation.kind is InputKind.STEP:
        level = _channel_vector(excitation.level, p, "step level")
        u[times >= excitation.step_time - 1e-9 * grid.dt] = level
    return u


def _fault_mask(times: np.ndarray, t_on: float, dt: float) -> np.ndarray:
    return times >= t_on - 1e-9 * dt


def generate_data(
    scenario: Scenario, bundle: PlantBundle, rng: Optional[np.random.Generator] = None
) -> SignalWindow:
    """Recorded (u, y) of the scenario: commanded input, faulty plant, then sensor effects and noise."""
    rng = make_rng(scenario.seed) if rng is None else rng
    system = bundle.system
    fault = scenario.fault

    if scenario.input.kind is InputKind.FILE:
        loaded = load_csv(scenario.input.path)
        if loaded.p != system.p:
            raise ConfigInvalid(f"input file has {loaded.p} inputs, plant {system.name} takes {system.p}")
        t0, dt, u_cmd = loaded.t0, loaded.dt, np.array(loaded.u)
        recorded_y = np.array(loaded.y) if scenario.input.recorded else None
    else:
        t0, dt = scenario.grid.t0, scenario.grid.dt
        u_cmd = build_inputs(scenario, system.p, rng)
        recorded_y = None
    times = t0 + dt * np.arange(u_cmd.shape[0])
    active = _fault_mask(times, fault.t_on, dt) if fault.kind is not FaultKind.NONE else np.zeros(times.size, bool)

    if recorded_y is not None:
        if fault.kind in (FaultKind.ACTUATOR_BIAS, FaultKind.ACTUATOR_GAIN):
            raise ConfigInvalid("actuator faults cannot be injected into recorded outputs")
        if recorded_y.shape[1] != system.m:
            raise ConfigInvalid(f"input file has {recorded_y.shape[1]} outputs, plant takes {system.m}")
        y = recorded_y
    else:
        u_applied = u_cmd.copy()
        if fault.kind is FaultKind.ACTUATOR_BIAS:
            u_applied[active] += _channel_vector(fault.vector, system.p, "actuator bias")
        elif fault.kind is FaultKind.ACTUATOR_GAIN:
            u_applied[active] *= fault.factor
        x0 = None if scenario.x0 is None else _channel_vector(scenario.x0, system.n, "x0")
        inputs = LatentWindow(t0=t0, dt=dt, samples=u_applied, kind="input")
        _, out = simulate(system, inputs, x0, hold=scenario.hold)
        y = np.array(out.y)

    if fault.kind is FaultKind.SENSOR_BIAS:
        y[active] += _channel_vector(fault.vector, system.m, "sensor bias")

    u_rec = u_cmd.copy()
    if scenario.noise.amplitude:
        amplitude = _channel_vector(scenario.noise.amplitude, system.p + system.m, "noise amplitude")
        noise = rng.uniform(-1.0, 1.0, size=(times.size, system.p + system.m)) * amplitude
        u_rec += noise[:, : system.p]
        y = y + noise[:, system.p :]
    return SignalWindow(t0=t0, dt=dt, u=u_rec, y=y)


# ==================== WINDOWS ====================
def window_bounds(total: int, burn_in: float, M: Optional[int]) -> list[tuple[int, int]]:
    """Consecutive non-overlapping windows of M samples after the burn-in.

    Without M the whole post-burn-in record forms one window; a trailing
    partial window is dropped.
    """
    start = int(math.ceil(burn_in * total))
    if start >= total:
        raise ConfigInvalid("burn-in leaves no samples to evaluate", {"burn_in": burn_in, "samples": total})
    if M is None:
        return [(start, total)]
    bounds = [(k, k + M) for k in range(start, total - M + 1, M)]
    if not bounds:
        raise ConfigInvalid(
            f"window M={M} does not fit after the burn-in", {"available": total - start}
        )
    dropped = total - bounds[-1][1]
    if dropped:
        logger.debug("dropping %d trailing samples that do not fill a window", dropped)
    return bounds
