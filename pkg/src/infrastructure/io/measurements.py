# src/infrastructure/io/measurements.py

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from src.domain.exceptions import DataError
from src.infrastructure.io.units import Dimension, unit_factor

FLOW_COLUMNS = ("block", "value", "relative_error")
PROBE_COLUMNS = ("t", "x")
TRAVEL_TIME_COLUMNS = ("t0", "tf")


def _read(path: str | Path, columns: Sequence[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError:
        raise DataError(f"{path}: measurement file not found") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")
    frame = frame[list(columns)]
    if frame.isna().any().any():
        row = int(frame.isna().any(axis=1).to_numpy().nonzero()[0][0])
        raise DataError(f"{path}: empty value in data row {row + 1}")
    return frame


def _strictly_increasing(values: np.ndarray, path: str | Path, column: str) -> None:
    bad = np.nonzero(np.diff(values) <= 0)[0]
    if bad.size:
        raise DataError(f"{path}: column {column!r} not strictly increasing at data row {bad[0] + 2}")


def read_flow_csv(path: str | Path, unit: str) -> list[tuple[int, float, float]]:
    """Rows (block, value in veh/s, relative error)."""
    frame = _read(path, FLOW_COLUMNS)
    blocks = frame["block"].to_numpy()
    if not np.all(np.equal(np.mod(blocks, 1), 0)):
        raise DataError(f"{path}: block indices must be integers")
    _strictly_increasing(blocks, path, "block")
    factor = unit_factor(unit, Dimension.FLOW)
    return [
        (int(block), float(value) * factor, float(error))
        for block, value, error in frame.itertuples(index=False)
    ]


def read_probe_csv(
    path: str | Path, time_unit: str = "s", position_unit: str = "m"
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    frame = _read(path, PROBE_COLUMNS)
    times = frame["t"].to_numpy(dtype=float) * unit_factor(time_unit, Dimension.TIME)
    positions = frame["x"].to_numpy(dtype=float) * unit_factor(position_unit, Dimension.LENGTH)
    _strictly_increasing(times, path, "t")
    return tuple(times.tolist()), tuple(positions.tolist())


def read_travel_time_csv(path: str | Path) -> list[tuple[float, float]]:
    frame = _read(path, TRAVEL_TIME_COLUMNS)
    rows = [(float(t0), float(tf)) for t0, tf in frame.itertuples(index=False)]
    for i, (t0, tf) in enumerate(rows, start=2):
        if not t0 < tf:
            raise DataError(f"{path}: travel time needs t0 < tf at data row {i}")
    return rows


def write_flow_csv(path: str | Path, rows: Sequence[tuple[int, float, float]]) -> None:
    pd.DataFrame(list(rows), columns=list(FLOW_COLUMNS)).to_csv(path, index=False)


def write_probe_csv(path: str | Path, times: Sequence[float], positions: Sequence[float]) -> None:
    pd.DataFrame({"t": list(times), "x": list(positions)}).to_csv(path, index=False)


def write_travel_time_csv(path: str | Path, rows: Sequence[tuple[float, float]]) -> None:
    pd.DataFrame(list(rows), columns=list(TRAVEL_TIME_COLUMNS)).to_csv(path, index=False)
