"""Sampled-signal ingestion, window stacking and energy helpers."""
import logging
import re
from typing import Mapping

import numpy as np
import pandas as pd

from app.errors import EmptyWindow, MalformedHeader, NonFiniteValue, NonUniformGrid
from app.models.signals import SignalWindow, StackedVector
from app.utils.file import write_frame_csv

logger = logging.getLogger(__name__)

GRID_TOLERANCE = 1e-9
_U_COLUMN = re.compile(r"^u_(\d+)$")
_Y_COLUMN = re.compile(r"^y_(\d+)$")


def _parse_header(columns: list[str]) -> tuple[int, int]:
    if not columns or columns[0] != "t":
        raise MalformedHeader("first column must be 't'", {"header": ",".join(columns)})
    p = m = 0
    for position, name in enumerate(columns[1:], start=1):
        u_match = _U_COLUMN.match(name)
        y_match = _Y_COLUMN.match(name)
        if u_match and m == 0 and int(u_match.group(1)) == p + 1:
            p += 1
        elif y_match and int(y_match.group(1)) == m + 1:
            m += 1
        else:
            raise MalformedHeader(
                "expected header t,u_1..u_p,y_1..y_m", {"column": position, "name": name}
            )
    if p == 0 or m == 0:
        raise MalformedHeader("header needs at least one u and one y column", {"p": p, "m": m})
    return p, m


def load_csv(path: str) -> SignalWindow:
    """Read a `t,u_1..u_p,y_1..y_m` file into a SignalWindow"""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as exc:
        raise MalformedHeader("file is empty", {"path": str(path)}) from exc

    p, m = _parse_header([str(name).strip() for name in frame.columns])
    values = frame.apply(lambda column: pd.to_numeric(column.str.strip(), errors="coerce"))
    data = values.to_numpy(dtype=float)
    if data.shape[0] == 0:
        raise EmptyWindow("file has a header but no samples", {"path": str(path)})
    if not np.all(np.isfinite(data)):
        row, col = np.argwhere(~np.isfinite(data))[0]
        raise NonFiniteValue(
            "non-finite or non-numeric entry", {"row": int(row) + 1, "column": frame.columns[col]}
        )

    t = data[:, 0]
    if t.size < 2:
        raise NonUniformGrid("at least two rows are needed to infer the step", {"path": str(path)})
    steps = np.diff(t)
    dt = steps[0]
    if dt <= 0 or np.any(steps <= 0):
        raise NonUniformGrid("t column must be strictly increasing", {"path": str(path)})
    worst = np.max(np.abs(steps - dt))
    if worst > GRID_TOLERANCE * dt:
        raise NonUniformGrid(
            "t column is not uniformly spaced",
            {"row": int(np.argmax(np.abs(steps - dt))) + 2, "deviation": float(worst)},
        )

    logger.debug("loaded %s: M=%d p=%d m=%d dt=%g", path, t.size, p, m, dt)
    return SignalWindow(t0=t[0], dt=dt, u=data[:, 1 : 1 + p], y=data[:, 1 + p :])


def save_csv(window: SignalWindow, path: str):
    columns = {"t": window.times}
    columns.update({f"u_{i + 1}": window.u[:, i] for i in range(window.p)})
    columns.update({f"y_{i + 1}": window.y[:, i] for i in range(window.m)})
    write_frame_csv(path, pd.DataFrame(columns))


def save_series_csv(path: str, times: np.ndarray, samples: np.ndarray, prefix: str):
    """Emit `t,<prefix>_1..<prefix>_k` for plotting."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples.reshape(-1, 1)
    columns = {"t": np.asarray(times, dtype=float)}
    columns.update({f"{prefix}_{i + 1}": samples[:, i] for i in range(samples.shape[1])})
    write_frame_csv(path, pd.DataFrame(columns))


def save_columns_csv(path: str, times: np.ndarray, named: Mapping[str, np.ndarray]):
    columns = {"t": np.asarray(times, dtype=float)}
    columns.update({name: np.asarray(values, dtype=float) for name, values in named.items()})
    write_frame_csv(path, pd.DataFrame(columns))


def stack_samples(samples: np.ndarray, source: str = "samples") -> StackedVector:
    """Stack M sample vectors into blocks scaled by 1/sqrt(M), in sample order."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples.reshape(-1, 1)
    count = samples.shape[0]
    if count < 1:
        raise EmptyWindow("cannot stack an empty window")
    return StackedVector(
        entries=(samples / np.sqrt(count)).ravel(),
        blocks=count,
        block_dim=samples.shape[1],
        source=source,
    )


def stack(window: SignalWindow) -> StackedVector:
    return stack_samples(window.z, source="z")


def half_energy(v: StackedVector) -> float:
    return 0.5 * v.norm_squared
