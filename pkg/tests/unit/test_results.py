# tests/unit/test_results.py

import json

import numpy as np
import pandas as pd

from src.domain.estimates import DensityMap, TravelTimeEstimate
from src.infrastructure.io.results import (
    write_density_csv,
    write_density_matrix,
    write_travel_time_reports,
)


def _density_map():
    times = np.array([0.0, 30.0])
    positions = np.array([0.0, 50.0, 100.0])
    rho = np.array([[0.01, 0.02, 0.03], [0.04, 0.05, 0.06]])
    return DensityMap("main", times, positions, rho)


# ---------------------
# DENSITY MAPS
# ---------------------

def test_density_long_format(tmp_path):
    density = _density_map()
    assert density.resolution == (2, 3)
    lines = write_density_csv(density, tmp_path / "d.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# generated ")
    assert lines[1] == "t,x,rho"
    assert lines[2] == "0,0,0.01"
    assert len(lines) == 2 + 6


def test_density_matrix(tmp_path):
    path = write_density_matrix(_density_map(), tmp_path / "m.csv")
    frame = pd.read_csv(path, skiprows=1, index_col=0)
    assert frame.index.name == "t"
    np.testing.assert_allclose(frame.columns.astype(float), [0.0, 50.0, 100.0])
    np.testing.assert_allclose(frame.to_numpy(), _density_map().rho)


# ---------------------
# TRAVEL TIMES
# ---------------------

def test_travel_time_reports(tmp_path):
    estimates = [
        TravelTimeEstimate(0.0, 120.5, ("a", "b")),
        TravelTimeEstimate(60.0, None, ("a", "b"), censored=True),
    ]
    text, machine = write_travel_time_reports(estimates, tmp_path / "tt.txt", tmp_path / "tt.json")

    lines = text.read_text(encoding="utf-8").splitlines()
    assert "travel_time=120.500 s" in lines[1]
    assert "route=a>b" in lines[1]
    assert "censored" in lines[2]

    payload = json.loads(machine.read_text(encoding="utf-8"))
    assert payload["travel_times"][0]["duration"] == 120.5
    assert payload["travel_times"][1]["tf"] is None
    assert payload["travel_times"][1]["censored"] is True
    assert "generated" in payload
