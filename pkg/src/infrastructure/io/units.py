# src/infrastructure/io/units.py

from __future__ import annotations

import re
from enum import Enum

METERS_PER_MILE = 1609.344
MPS_PER_MPH = 0.44704


class Dimension(str, Enum):
    LENGTH = "length"
    TIME = "time"
    SPEED = "speed"
    DENSITY = "density"
    FLOW = "flow"
    VEHICLES = "vehicles"


# unit -> (dimension, factor to SI, per lane)
_UNITS: dict[str, tuple[Dimension, float, bool]] = {
    "m": (Dimension.LENGTH, 1.0, False),
    "km": (Dimension.LENGTH, 1000.0, False),
    "mi": (Dimension.LENGTH, METERS_PER_MILE, False),
    "s": (Dimension.TIME, 1.0, False),
    "min": (Dimension.TIME, 60.0, False),
    "h": (Dimension.TIME, 3600.0, False),
    "m/s": (Dimension.SPEED, 1.0, False),
    "km/h": (Dimension.SPEED, 1000.0 / 3600.0, False),
    "mph": (Dimension.SPEED, MPS_PER_MPH, False),
    "veh/m": (Dimension.DENSITY, 1.0, False),
    "veh/km": (Dimension.DENSITY, 1e-3, False),
    "veh/mi": (Dimension.DENSITY, 1.0 / METERS_PER_MILE, False),
    "veh/lane/m": (Dimension.DENSITY, 1.0, True),
    "veh/lane/km": (Dimension.DENSITY, 1e-3, True),
    "veh/lane/mi": (Dimension.DENSITY, 1.0 / METERS_PER_MILE, True),
    "veh/s": (Dimension.FLOW, 1.0, False),
    "veh/min": (Dimension.FLOW, 1.0 / 60.0, False),
    "veh/h": (Dimension.FLOW, 1.0 / 3600.0, False),
    "veh": (Dimension.VEHICLES, 1.0, False),
}

SI_UNITS = {
    Dimension.LENGTH: "m",
    Dimension.TIME: "s",
    Dimension.SPEED: "m/s",
    Dimension.DENSITY: "veh/m",
    Dimension.FLOW: "veh/s",
    Dimension.VEHICLES: "veh",
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s+(\S+)\s*$")


class UnitError(ValueError):
    """Quantity text without a number, without a unit, or with the wrong dimension."""


def unit_factor(unit: str, dimension: Dimension, lanes: int = 1) -> float:
    """Factor converting `unit` to SI; per-lane densities are scaled by `lanes`."""
    try:
        found, factor, per_lane = _UNITS[unit]
    except KeyError:
        raise UnitError(f"unknown unit {unit!r}") from None
    if found is not dimension:
        raise UnitError(f"unit {unit!r} is a {found.value}, expected a {dimension.value}")
    return factor * lanes if per_lane else factor


def parse_quantity(text: str, dimension: Dimension, lanes: int = 1) -> float:
    """'65 mph' -> 29.0576 (SI). A bare number is rejected."""
    if not isinstance(text, str):
        raise UnitError(f"expected '<number> <unit>', got {text!r}")
    match = _QUANTITY.match(text)
    if not match:
        raise UnitError(f"expected '<number> <unit>', got {text!r}")
    value, unit = match.groups()
    return float(value) * unit_factor(unit, dimension, lanes)


def format_quantity(value: float, dimension: Dimension) -> str:
    """SI text form, read back exactly by `parse_quantity`."""
    return f"{float(value)!r} {SI_UNITS[dimension]}"


def mph(value: float) -> float:
    return value * MPS_PER_MPH


def per_mile(value: float) -> float:
    return value / METERS_PER_MILE
