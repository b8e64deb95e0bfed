# tests/unit/test_godunov.py

import numpy as np
import pytest

from src.domain.exceptions import ConfigurationError, DensityDomainError
from src.domain.geometry import LinkGeometry
from src.infrastructure.simulation.godunov import (
    SimState,
    aligned_geometry,
    bottleneck_run,
    density_snapshot,
    extract_conditions,
    initial_densities,
    oracle_scenario,
    probe_trace,
    sensor_series,
    simulate,
    step,
    write_run_csv,
)


# ---------------------
# STEPPING
# ---------------------

def test_steady_free_flow_is_preserved(highway_flux):
    geometry = aligned_geometry(highway_flux, k_max=2, n_max=2)
    rho = 0.5 * highway_flux.rho_c
    run = simulate(
        highway_flux,
        geometry,
        np.full(geometry.space_blocks, rho),
        np.full(geometry.time_blocks, highway_flux.v * rho),
        np.full(geometry.time_blocks, highway_flux.q_max),
    )
    np.testing.assert_allclose(run.rho_history, rho, rtol=1e-12)
    np.testing.assert_allclose(run.outflow, highway_flux.v * rho, rtol=1e-12)


def test_closed_link_conserves_vehicles(highway_flux):
    geometry = aligned_geometry(highway_flux, k_max=3, n_max=3)
    rng = np.random.default_rng(5)
    rho0 = rng.uniform(0.0, highway_flux.rho_m, geometry.space_blocks * 3)
    zeros = np.zeros(geometry.time_blocks)
    run = simulate(highway_flux, geometry, rho0, zeros, zeros, cells_per_block=3)
    mass = run.rho_history.sum(axis=1) * run.dx
    np.testing.assert_allclose(mass, mass[0], rtol=1e-10)


def test_shock_moves_at_rankine_hugoniot_speed(highway_flux):
    geometry = LinkGeometry(xi=0.0, chi=2000.0, t_max=60.0, k_max=9, n_max=1)
    cells = 100
    left = 0.5 * highway_flux.rho_c
    rho0 = np.where(np.arange(cells) < cells // 2, left, highway_flux.rho_m)
    run = simulate(
        highway_flux,
        geometry,
        rho0,
        np.full(2, highway_flux.v * left),
        np.zeros(2),
        cells_per_block=10,
    )
    speed = -highway_flux.v * left / (highway_flux.rho_m - left)
    final = run.rho_history[-1]
    front = np.argmax(final > 0.5 * (left + highway_flux.rho_m)) * run.dx
    assert front == pytest.approx(1000.0 + speed * geometry.t_max, abs=3 * run.dx)


def test_jam_release_is_a_rarefaction(highway_flux):
    # X = v T and 10 cells per block give a free-flow Courant number of 1
    geometry = aligned_geometry(highway_flux, k_max=9, n_max=1)
    cells, middle = 100, 50
    rho0 = np.where(np.arange(cells) < middle, highway_flux.rho_m, 0.0)
    run = simulate(
        highway_flux,
        geometry,
        rho0,
        np.zeros(geometry.time_blocks),
        np.full(geometry.time_blocks, highway_flux.q_max),
        cells_per_block=10,
    )
    final = run.rho_history[-1]
    reach = int(round(highway_flux.v * geometry.t_max / run.dx))

    # discharge at capacity, critical density behind the free-flow front
    np.testing.assert_allclose(final[middle : middle + reach], highway_flux.rho_c, rtol=1e-9)
    np.testing.assert_allclose(final[middle + reach :], 0.0, atol=1e-12)
    queue = final[:middle]
    assert np.all(np.diff(queue) <= 1e-12)
    assert queue.min() >= highway_flux.rho_c * (1 - 1e-9)
    assert queue.max() <= highway_flux.rho_m * (1 + 1e-12)
    mass = queue.sum() * run.dx
    expected = highway_flux.rho_m * middle * run.dx - highway_flux.q_max * geometry.t_max
    assert mass == pytest.approx(expected, rel=1e-9)


def _congested_bump(flux, x):
    base, height, center, half_width = 3.0 * flux.rho_c, 2.0 * flux.rho_c, 1000.0, 300.0
    inside = np.abs(x - center) < half_width
    return base + height * np.where(inside, np.cos(0.5 * np.pi * (x - center) / half_width) ** 2, 0.0)


def test_godunov_converges_at_first_order(highway_flux):
    geometry = LinkGeometry(xi=0.0, chi=2000.0, t_max=60.0, k_max=0, n_max=0)
    boundary = highway_flux.w * (3.0 * highway_flux.rho_c - highway_flux.rho_m)
    errors = []
    for cells in (50, 100, 200, 400):
        dx = geometry.length / cells
        centers = (np.arange(cells) + 0.5) * dx
        run = simulate(
            highway_flux,
            geometry,
            _congested_bump(highway_flux, centers),
            [boundary],
            [boundary],
            cells_per_block=cells,
        )
        exact = _congested_bump(highway_flux, centers - highway_flux.w * geometry.t_max)
        errors.append(np.abs(run.rho_history[-1] - exact).sum() * dx)

    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(np.diff(errors) < 0)
    assert orders.mean() > 0.8


def test_cfl_violation(highway_flux):
    state = SimState(rho=np.zeros(4), dx=10.0, dt=10.0)
    with pytest.raises(ConfigurationError):
        step(highway_flux, state, 0.0, 0.0)


def test_simulate_validates_inputs(highway_flux, small_geometry):
    zeros = np.zeros(small_geometry.time_blocks)
    with pytest.raises(ConfigurationError):
        simulate(highway_flux, small_geometry, np.zeros(5), zeros, zeros)
    with pytest.raises(DensityDomainError):
        simulate(highway_flux, small_geometry, np.full(4, 2 * highway_flux.rho_m), zeros, zeros)
    with pytest.raises(ConfigurationError):
        simulate(highway_flux, small_geometry, np.zeros(4), zeros[:2], zeros)


# ---------------------
# GROUND TRUTH
# ---------------------

def test_block_averages(free_flow_run):
    geometry = free_flow_run.geometry
    assert free_flow_run.rho_ini_blocks().shape == (geometry.space_blocks,)
    assert free_flow_run.q_in_blocks().shape == (geometry.time_blocks,)
    assert np.all(free_flow_run.rho_ini_blocks() <= 0.9 * free_flow_run.flux.rho_c)


def test_moskowitz_counts_initial_vehicles(free_flow_run):
    geometry = free_flow_run.geometry
    initial = free_flow_run.rho_ini_blocks().sum() * geometry.X
    assert free_flow_run.moskowitz(0.0, geometry.xi) == pytest.approx(0.0)
    assert free_flow_run.moskowitz(0.0, geometry.chi) == pytest.approx(-initial)


def test_probe_on_empty_road_moves_at_free_flow_speed(empty_road_run):
    flux = empty_road_run.flux
    trace = probe_trace(empty_road_run, 0.0, 0.0, [30.0, 60.0])
    assert trace.times == pytest.approx((0.0, 30.0, 60.0))
    assert trace.positions == pytest.approx((0.0, 30.0 * flux.v, 60.0 * flux.v))


def test_probe_is_truncated_at_link_exit(empty_road_run):
    geometry = empty_road_run.geometry
    trace = probe_trace(empty_road_run, 0.0, 0.0, [geometry.t_max])
    assert trace.positions[-1] == pytest.approx(geometry.chi)
    assert trace.times[-1] == pytest.approx(geometry.length / empty_road_run.flux.v)


def test_sensor_and_snapshot_readings(free_flow_run):
    sensor = sensor_series(free_flow_run, edge=1, relative_error=0.02)
    assert sensor.sensor_id == "edge1"
    assert len(sensor.rows) == free_flow_run.geometry.time_blocks
    assert all(error == 0.02 for _, _, error in sensor.rows)

    snapshot = density_snapshot(free_flow_run, n=0, k=2)
    assert snapshot.value == pytest.approx(free_flow_run.rho_ini_blocks()[2])
    with pytest.raises(ConfigurationError):
        sensor_series(free_flow_run, edge=0)


def test_extraction_fills_every_variable(free_flow_run):
    extraction = extract_conditions(
        free_flow_run,
        sensors=[sensor_series(free_flow_run, edge=2)],
        snapshots=[density_snapshot(free_flow_run, n=1, k=1)],
    )
    assert extraction.truth.shape == (len(extraction.index),)
    assert np.all(extraction.truth >= extraction.index.lower - 1e-12)
    assert np.all(extraction.truth <= extraction.index.upper + 1e-12)


def test_oracle_scenario_boxes(free_flow_run):
    scenario = oracle_scenario(free_flow_run, relative_error=0.05)
    flows = scenario.measurements.flows
    assert len(flows) == 2 * free_flow_run.geometry.time_blocks
    assert {m.relative_error for m in flows} == {0.05}


def test_run_dump(tmp_path, empty_road_run):
    path = write_run_csv(empty_road_run, tmp_path / "run.csv")
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == "step,cell,rho"


# ---------------------
# CONGESTED ORACLE
# ---------------------

def test_bottleneck_boundary_flows_are_constant(highway_flux):
    run = bottleneck_run()
    np.testing.assert_allclose(run.q_in_blocks(), 0.8 * highway_flux.q_max, rtol=1e-12)
    np.testing.assert_allclose(run.q_out_blocks(), 0.2 * highway_flux.q_max, rtol=1e-12)
    queue = highway_flux.rho_m + 0.2 * highway_flux.q_max / highway_flux.w
    assert run.rho_history[-1][-1] == pytest.approx(queue, rel=1e-3)
    assert run.rho_history[-1][0] == pytest.approx(0.8 * highway_flux.rho_c)


def test_bottleneck_rejects_queues_that_leave_the_link():
    with pytest.raises(ConfigurationError):
        bottleneck_run(supply_share=0.9)
    with pytest.raises(ConfigurationError):
        bottleneck_run(k_max=0, n_max=39, supply_share=0.0)


def test_initial_density_measurements(free_flow_run):
    densities = initial_densities(free_flow_run, absolute_error=0.01)
    assert [m.block for m in densities] == list(range(free_flow_run.geometry.space_blocks))
    assert densities[2].value == pytest.approx(free_flow_run.rho_ini_blocks()[2])
    scenario = oracle_scenario(free_flow_run, densities=densities)
    assert scenario.measurements.densities == densities
