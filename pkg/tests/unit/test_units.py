# tests/unit/test_units.py

import pytest

from src.infrastructure.io.units import (
    Dimension,
    UnitError,
    format_quantity,
    mph,
    parse_quantity,
    per_mile,
    unit_factor,
)


# ---------------------
# PARSING
# ---------------------

@pytest.mark.parametrize(
    "text, dimension, expected",
    [
        ("65 mph", Dimension.SPEED, 29.0576),
        ("-10 mph", Dimension.SPEED, -4.4704),
        ("1.2 km", Dimension.LENGTH, 1200.0),
        ("10 min", Dimension.TIME, 600.0),
        ("1800 veh/h", Dimension.FLOW, 0.5),
        ("30 veh/mi", Dimension.DENSITY, 30 / 1609.344),
        ("2.5e-2 veh/m", Dimension.DENSITY, 0.025),
        ("5000 veh", Dimension.VEHICLES, 5000.0),
    ],
)
def test_parse_quantity(text, dimension, expected):
    assert parse_quantity(text, dimension) == pytest.approx(expected)


def test_per_lane_density_scales_with_lanes():
    assert parse_quantity("30 veh/lane/mi", Dimension.DENSITY, lanes=3) == pytest.approx(per_mile(90.0))
    assert unit_factor("veh/mi", Dimension.DENSITY, lanes=3) == pytest.approx(per_mile(1.0))


@pytest.mark.parametrize("text", ["65", "mph", "65 parsecs", "", "fast mph"])
def test_malformed_quantities(text):
    with pytest.raises(UnitError):
        parse_quantity(text, Dimension.SPEED)


def test_wrong_dimension():
    with pytest.raises(UnitError, match="speed"):
        parse_quantity("3 km", Dimension.SPEED)


def test_non_text_quantity():
    with pytest.raises(UnitError):
        parse_quantity(65, Dimension.SPEED)  # invalid type


# ---------------------
# FORMATTING
# ---------------------

def test_format_reads_back_exactly():
    value = mph(65.0) / 3.0
    text = format_quantity(value, Dimension.SPEED)
    assert text.endswith(" m/s")
    assert parse_quantity(text, Dimension.SPEED) == value
