# tests/unit/test_scenario.py

import pytest

from src.domain.exceptions import DataError, TopologyError
from src.domain.network import LinkDefinition, NetworkTopology
from src.domain.scenario import (
    Boundary,
    DensitySnapshot,
    FlowMeasurement,
    Measurements,
    ProbeTrace,
    Scenario,
    SensorSeries,
    TravelTimeMeasurement,
)


def _scenario(geometry, flux, **measurements):
    topology = NetworkTopology(links=(LinkDefinition("main", geometry, flux),))
    return Scenario(name="t", topology=topology, measurements=Measurements(**measurements))


# ---------------------
# SEGMENTS
# ---------------------

def test_probe_segments_chain_after_clamping(highway_flux):
    probe = ProbeTrace(
        link="main",
        trace_id="p",
        times=(0.0, 10.0, 20.0),
        positions=(0.0, 20.0 * highway_flux.v, 25.0 * highway_flux.v),
    )
    first, second = probe.segments(highway_flux)
    assert first.v_meas < highway_flux.v
    assert second.x_min == first.x_max
    assert (first.trace, first.segment, second.segment) == ("probe:p", 0, 1)


def test_sensor_segments_restart_after_gaps():
    sensor = SensorSeries("main", "s", 100.0, ((0, 0.1, 0.01), (1, 0.1, 0.01), (3, 0.1, 0.01)))
    segments = sensor.segments((0.0, 30.0, 60.0, 90.0, 120.0))
    assert [s.segment for s in segments] == [0, 1, 0]
    assert segments[2].t_min == 90.0
    assert all(s.v_meas == 0.0 for s in segments)


def test_segments_for_orders_probes_before_sensors(highway_flux, small_geometry):
    data = Measurements(
        probes=(ProbeTrace("main", "p", (0.0, 10.0), (0.0, 50.0)),),
        sensors=(SensorSeries("main", "s", 100.0, ((0, 0.1, 0.01),)),),
    )
    segments = data.segments_for("main", highway_flux, (0.0, 30.0, 60.0, 90.0, 120.0))
    assert [s.trace for s in segments] == ["probe:p", "sensor:s"]
    assert data.segments_for("other", highway_flux, (0.0, 30.0)) == ()


# ---------------------
# VALIDATION
# ---------------------

def test_valid_scenario(small_geometry, highway_flux):
    scenario = _scenario(
        small_geometry,
        highway_flux,
        flows=(FlowMeasurement("main", Boundary.UPSTREAM, 0, 0.3, 0.01),),
        snapshots=(DensitySnapshot("main", 30.0, 0.0, 100.0, 0.01, 0.0),),
    )
    assert scenario.horizon == small_geometry.t_max
    assert scenario.link_ids == ("main",)


@pytest.mark.parametrize(
    "measurements",
    [
        {"flows": (FlowMeasurement("main", Boundary.UPSTREAM, 9, 0.3, 0.01),)},
        {"flows": (FlowMeasurement("main", Boundary.UPSTREAM, 0, float("nan"), 0.01),)},
        {"flows": (FlowMeasurement("main", Boundary.DOWNSTREAM, 0, 0.3, -0.01),)},
        {"probes": (ProbeTrace("main", "p", (0.0,), (0.0,)),)},
        {"probes": (ProbeTrace("main", "p", (10.0, 5.0), (0.0, 10.0)),)},
        {"sensors": (SensorSeries("main", "s", 0.0, ((0, 0.1, 0.01),)),)},
        {"snapshots": (DensitySnapshot("main", 30.0, 100.0, 50.0, 0.01, 0.0),)},
        {"travel_times": (TravelTimeMeasurement("main", "main", 60.0, 30.0),)},
        {"flows": (FlowMeasurement("elsewhere", Boundary.UPSTREAM, 0, 0.3, 0.01),)},
    ],
)
def test_invalid_measurements(small_geometry, highway_flux, measurements):
    with pytest.raises((DataError, TopologyError)):
        _scenario(small_geometry, highway_flux, **measurements)


def test_travel_time_entry_outside_horizon(small_geometry, highway_flux):
    topology = NetworkTopology(links=(LinkDefinition("main", small_geometry, highway_flux),))
    with pytest.raises(DataError):
        Scenario(name="t", topology=topology, travel_time_entries=(small_geometry.t_max + 1.0,))
