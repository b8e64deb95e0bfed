# tests/unit/test_scenario_loader.py

import textwrap
from dataclasses import replace

import pytest

from src.domain.exceptions import DataError, ScenarioFileError
from src.domain.scenario import Boundary
from src.infrastructure.io.measurements import read_flow_csv, read_probe_csv, read_travel_time_csv
from src.infrastructure.io.scenario_loader import SCENARIO_FILE, load_scenario, write_scenario
from src.infrastructure.io.units import per_mile
from src.infrastructure.simulation.godunov import density_snapshot, oracle_scenario, sensor_series

BASE = """
[scenario]
name = "unit"
horizon = "2 min"
time_blocks = 4

[[links]]
id = "main"
upstream = "0 m"
downstream = "1 km"
space_blocks = 4
lanes = 2
free_flow_speed = "65 mph"
congestion_wave_speed = "-10 mph"
critical_density = "30 veh/lane/mi"
"""


def _write(tmp_path, text, files=None):
    for name, content in (files or {}).items():
        (tmp_path / name).write_text(textwrap.dedent(content).lstrip(), encoding="utf-8")
    path = tmp_path / SCENARIO_FILE
    path.write_text(textwrap.dedent(text), encoding="utf-8")
    return path


# ---------------------
# LOADING
# ---------------------

def test_minimal_scenario_in_si(tmp_path):
    scenario = load_scenario(_write(tmp_path, BASE))
    link = scenario.topology.link("main")
    assert scenario.horizon == 120.0
    assert link.geometry.chi == 1000.0
    assert link.geometry.k_max == 3
    assert link.flux.rho_c == pytest.approx(per_mile(60.0))
    assert scenario.measurements.flows == ()


def test_flow_files_and_solver_table(tmp_path):
    text = BASE + """
[[measurements.flows]]
link = "main"
boundary = "upstream"
file = "up.csv"
unit = "veh/h"

[solver]
max_binaries = 8
big_m = "5000 veh"
big_m_flow = "3600 veh/h"

[output]
density_resolution = [10, 20]
travel_time_entries = ["30 s"]
"""
    files = {"up.csv": "block,value,relative_error\n0,1800,0.01\n1,900,0.02\n"}
    scenario = load_scenario(_write(tmp_path, text, files))
    flows = scenario.measurements.flows
    assert [(m.block, m.boundary) for m in flows] == [(0, Boundary.UPSTREAM), (1, Boundary.UPSTREAM)]
    assert flows[0].value == pytest.approx(0.5)
    assert scenario.big_m == 5000.0
    assert scenario.big_m_flow == pytest.approx(1.0)
    assert scenario.solver_options == (("max_binaries", 8),)
    assert scenario.density_resolution == (10, 20)
    assert scenario.travel_time_entries == (30.0,)


def test_round_trip(tmp_path, free_flow_run):
    original = oracle_scenario(
        free_flow_run,
        sensors=[sensor_series(free_flow_run, edge=1)],
        snapshots=[density_snapshot(free_flow_run, n=1, k=2, absolute_error=0.05)],
    )
    loaded = load_scenario(write_scenario(original, tmp_path))
    assert loaded.topology == original.topology
    assert loaded.measurements == original.measurements
    assert loaded == original


# ---------------------
# ERRORS
# ---------------------

def test_missing_file(tmp_path):
    with pytest.raises(ScenarioFileError, match="cannot read"):
        load_scenario(tmp_path / "absent.toml")


def test_toml_syntax_error(tmp_path):
    with pytest.raises(ScenarioFileError):
        load_scenario(_write(tmp_path, "[scenario\nname = 1\n"))


def test_unknown_key(tmp_path):
    with pytest.raises(ScenarioFileError) as info:
        load_scenario(_write(tmp_path, BASE.replace('name = "unit"', 'name = "unit"\nowner = "x"')))
    assert info.value.location == "scenario.owner"


def test_bad_unit_names_the_field(tmp_path):
    with pytest.raises(ScenarioFileError) as info:
        load_scenario(_write(tmp_path, BASE.replace("65 mph", "65 parsecs")))
    assert info.value.location == "links.0.free_flow_speed"


@pytest.mark.parametrize(
    "line, location",
    [
        ("big_m = 5000.0", "solver.big_m"),
        ('big_m = "5000"', "solver.big_m"),
        ('big_m = "5000 veh/h"', "solver.big_m"),
        ('big_m = "0 veh"', "solver.big_m"),
        ('big_m_flow = "40 veh"', "solver.big_m_flow"),
    ],
)
def test_big_m_needs_a_positive_quantity(tmp_path, line, location):
    with pytest.raises(ScenarioFileError) as info:
        load_scenario(_write(tmp_path, BASE + f"\n[solver]\n{line}\n"))
    assert info.value.location.startswith(location)


def test_big_m_round_trip(tmp_path, free_flow_run):
    original = replace(oracle_scenario(free_flow_run), big_m=1234.5, big_m_flow=2.5)
    loaded = load_scenario(write_scenario(original, tmp_path))
    assert loaded.big_m == 1234.5
    assert loaded.big_m_flow == 2.5


def test_split_junction_needs_allocation(tmp_path):
    text = BASE + """
[[links]]
id = "b"
upstream = "1 km"
downstream = "2 km"
space_blocks = 4
free_flow_speed = "65 mph"
congestion_wave_speed = "-10 mph"
critical_density = "30 veh/mi"

[[links]]
id = "c"
upstream = "1 km"
downstream = "2 km"
space_blocks = 4
free_flow_speed = "65 mph"
congestion_wave_speed = "-10 mph"
critical_density = "30 veh/mi"

[[junctions]]
id = "split"
incoming = ["main"]
outgoing = ["b", "c"]
"""
    with pytest.raises(ScenarioFileError) as info:
        load_scenario(_write(tmp_path, text))
    assert info.value.location == "junctions.0.allocation"


# ---------------------
# MEASUREMENT FILES
# ---------------------

def test_flow_csv_errors(tmp_path):
    missing = tmp_path / "missing.csv"
    missing.write_text("block,value\n0,1\n", encoding="utf-8")
    with pytest.raises(DataError, match="missing columns"):
        read_flow_csv(missing, "veh/s")

    unordered = tmp_path / "unordered.csv"
    unordered.write_text("block,value,relative_error\n1,1,0.1\n0,1,0.1\n", encoding="utf-8")
    with pytest.raises(DataError, match="strictly increasing"):
        read_flow_csv(unordered, "veh/s")

    empty = tmp_path / "empty.csv"
    empty.write_text("block,value,relative_error\n0,,0.1\n", encoding="utf-8")
    with pytest.raises(DataError, match="empty value"):
        read_flow_csv(empty, "veh/s")

    with pytest.raises(DataError, match="not found"):
        read_flow_csv(tmp_path / "nope.csv", "veh/s")


def test_probe_and_travel_time_csv(tmp_path):
    probe = tmp_path / "probe.csv"
    probe.write_text("t,x\n0,0\n1,0.5\n", encoding="utf-8")
    times, positions = read_probe_csv(probe, "min", "km")
    assert times == (0.0, 60.0)
    assert positions == (0.0, 500.0)

    travel = tmp_path / "travel.csv"
    travel.write_text("t0,tf\n10,5\n", encoding="utf-8")
    with pytest.raises(DataError):
        read_travel_time_csv(travel)
