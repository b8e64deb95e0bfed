# src/infrastructure/simulation/godunov.py

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from src.domain.conditions import InternalDensity, InternalTrajectory
from src.domain.decision import DecisionIndex
from src.domain.exceptions import ConfigurationError, DensityDomainError
from src.domain.flux import FluxParams, make_flux_params, receiving, sending
from src.domain.geometry import LinkGeometry
from src.domain.network import LinkDefinition, LinkModel, NetworkTopology
from src.domain.scenario import (
    Boundary,
    DensityMeasurement,
    DensitySnapshot,
    FlowMeasurement,
    Measurements,
    ProbeTrace,
    Scenario,
    SensorSeries,
)
from src.infrastructure.io.units import mph, per_mile

logger = logging.getLogger(__name__)

# Relative slack on the CFL condition.
CFL_TOL = 1e-9

HIGHWAY_FLUX = make_flux_params(mph(65.0), mph(-10.0), per_mile(30.0))
HIGHWAY_BLOCK_TIME = 30.0


@dataclass(frozen=True)
class SimState:
    rho: np.ndarray
    dx: float
    dt: float
    time: float = 0.0
    inflow_count: float = 0.0
    outflow_count: float = 0.0


def step(flux: FluxParams, state: SimState, inflow_demand: float, outflow_supply: float) -> SimState:
    """
    One Godunov step. Interface flux is min(sending upstream, receiving
    downstream); the boundaries see the given demand and supply rates.
    """
    limit = state.dx / max(flux.v, abs(flux.w))
    if state.dt > limit * (1.0 + CFL_TOL):
        raise ConfigurationError(f"CFL violated: dt={state.dt} exceeds dx/max(v, |w|)={limit}")

    rho = state.rho
    send = sending(flux, rho)
    receive = receiving(flux, rho)
    fluxes = np.empty(rho.size + 1)
    fluxes[0] = min(max(inflow_demand, 0.0), receive[0])
    fluxes[1:-1] = np.minimum(send[:-1], receive[1:])
    fluxes[-1] = min(send[-1], max(outflow_supply, 0.0))

    updated = np.clip(rho - state.dt / state.dx * np.diff(fluxes), 0.0, flux.rho_m)
    return SimState(
        rho=updated,
        dx=state.dx,
        dt=state.dt,
        time=state.time + state.dt,
        inflow_count=state.inflow_count + state.dt * fluxes[0],
        outflow_count=state.outflow_count + state.dt * fluxes[-1],
    )


def probe_velocity(flux: FluxParams, rho):
    """v in free flow, flow over density in congestion, 0 at jam density."""
    rho = np.asarray(rho, dtype=float)
    congested = flux.w * (rho - flux.rho_m) / np.maximum(rho, 1e-300)
    return np.where(rho <= flux.rho_c, flux.v, congested)


# -----------------------------
# Simulation run
# -----------------------------
@dataclass(frozen=True)
class SimulationRun:
    flux: FluxParams
    geometry: LinkGeometry
    cells_per_block: int
    dx: float
    dt: float
    steps_per_block: int
    rho_history: np.ndarray
    inflow: np.ndarray
    outflow: np.ndarray

    @property
    def cells(self) -> int:
        return self.rho_history.shape[1]

    @property
    def steps(self) -> int:
        return self.inflow.size

    @property
    def inflow_counts(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.inflow * self.dt)])

    @property
    def outflow_counts(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.outflow * self.dt)])

    def rho_ini_blocks(self) -> np.ndarray:
        return self.rho_history[0].reshape(self.geometry.space_blocks, -1).mean(axis=1)

    def q_in_blocks(self) -> np.ndarray:
        return self.inflow.reshape(self.geometry.time_blocks, -1).mean(axis=1)

    def q_out_blocks(self) -> np.ndarray:
        return self.outflow.reshape(self.geometry.time_blocks, -1).mean(axis=1)

    def _mass_upstream_of(self, s: int, x: float) -> float:
        rho = self.rho_history[s]
        offset = min(max((x - self.geometry.xi) / self.dx, 0.0), float(self.cells))
        full = int(math.floor(offset))
        mass = float(rho[:full].sum()) * self.dx
        if full < self.cells:
            mass += float(rho[full]) * (offset - full) * self.dx
        return mass

    def moskowitz(self, t: float, x: float) -> float:
        """Label of the vehicle at (t, x): entered count minus vehicles between xi and x."""
        position = min(max(t / self.dt, 0.0), float(self.steps))
        s0 = int(math.floor(position))
        frac = position - s0
        counts = self.inflow_counts

        def at(s: int) -> float:
            return counts[s] - self._mass_upstream_of(s, x)

        if frac <= 1e-12 or s0 == self.steps:
            return at(s0)
        return (1.0 - frac) * at(s0) + frac * at(s0 + 1)

    def density(self, t: float, x: float) -> float:
        s = min(max(int(round(t / self.dt)), 0), self.steps)
        cell = min(max(int((x - self.geometry.xi) // self.dx), 0), self.cells - 1)
        return float(self.rho_history[s, cell])

    def trace_probe(self, t0: float, x0: float, fix_times: Sequence[float]) -> tuple[tuple[float, ...], tuple[float, ...]]:
        """
        Integrates dx/dt = probe velocity, piecewise constant per cell and
        step, and samples the position at `fix_times`. A probe leaving the
        link is truncated at its exit time.
        """
        geometry = self.geometry
        times, positions = [t0], [x0]
        t, x = t0, x0
        for target in sorted(ft for ft in fix_times if ft > t0):
            target = min(target, geometry.t_max)
            while t < target - 1e-12:
                s = min(int(t / self.dt + 1e-9), self.steps - 1)
                cell = min(max(int((x - geometry.xi) // self.dx), 0), self.cells - 1)
                speed = float(probe_velocity(self.flux, self.rho_history[s, cell]))
                until = min((s + 1) * self.dt, target)
                if until <= t:
                    until = target
                reach = x + speed * (until - t)
                if reach >= geometry.chi:
                    exit_time = t + (geometry.chi - x) / speed
                    if exit_time - times[-1] > 1e-9:
                        times.append(exit_time)
                        positions.append(geometry.chi)
                    return tuple(times), tuple(positions)
                t, x = until, reach
            if t - times[-1] > 1e-9:
                times.append(t)
                positions.append(x)
        return tuple(times), tuple(positions)

    def to_frame(self) -> pd.DataFrame:
        steps, cells = np.meshgrid(
            np.arange(self.rho_history.shape[0]), np.arange(self.cells), indexing="ij"
        )
        return pd.DataFrame(
            {"step": steps.ravel(), "cell": cells.ravel(), "rho": self.rho_history.ravel()}
        )


def write_run_csv(run: SimulationRun, path: str | Path) -> Path:
    path = Path(path)
    run.to_frame().to_csv(path, index=False, float_format="%.12g")
    logger.info("Wrote run dump %s (%d steps x %d cells)", path, run.rho_history.shape[0], run.cells)
    return path


def simulate(
    flux: FluxParams,
    geometry: LinkGeometry,
    initial_density: Sequence[float],
    inflow: Sequence[float],
    outflow_supply: Sequence[float],
    cells_per_block: int = 4,
) -> SimulationRun:
    """
    Runs the link over its horizon. `initial_density` is given per space
    block or per cell; `inflow` (demand) and `outflow_supply` per time block.
    """
    if cells_per_block < 1:
        raise ConfigurationError(f"cells_per_block must be positive, got {cells_per_block}")
    cells = geometry.space_blocks * cells_per_block
    rho0 = np.asarray(initial_density, dtype=float)
    if rho0.size == geometry.space_blocks:
        rho0 = np.repeat(rho0, cells_per_block)
    if rho0.size != cells:
        raise ConfigurationError(
            f"Initial density needs {geometry.space_blocks} blocks or {cells} cells, got {rho0.size}"
        )
    if np.any(rho0 < 0) or np.any(rho0 > flux.rho_m):
        raise DensityDomainError(f"Initial density outside [0, {flux.rho_m}]")
    inflow = np.asarray(inflow, dtype=float)
    outflow_supply = np.asarray(outflow_supply, dtype=float)
    if inflow.size != geometry.time_blocks or outflow_supply.size != geometry.time_blocks:
        raise ConfigurationError(f"Boundary series need {geometry.time_blocks} blocks")

    dx = geometry.X / cells_per_block
    steps_per_block = math.ceil(geometry.T * max(flux.v, abs(flux.w)) / dx - CFL_TOL)
    dt = geometry.T / steps_per_block

    state = SimState(rho=rho0, dx=dx, dt=dt)
    history = [rho0]
    inflows, outflows = [], []
    for n in range(geometry.time_blocks):
        for _ in range(steps_per_block):
            updated = step(flux, state, inflow[n], outflow_supply[n])
            inflows.append((updated.inflow_count - state.inflow_count) / dt)
            outflows.append((updated.outflow_count - state.outflow_count) / dt)
            state = updated
            history.append(state.rho)

    logger.debug(
        "Simulated %d cells x %d steps (dx=%.6g, dt=%.6g)", cells, len(inflows), dx, dt
    )
    return SimulationRun(
        flux=flux,
        geometry=geometry,
        cells_per_block=cells_per_block,
        dx=dx,
        dt=dt,
        steps_per_block=steps_per_block,
        rho_history=np.vstack(history),
        inflow=np.asarray(inflows),
        outflow=np.asarray(outflows),
    )


def aligned_geometry(
    flux: FluxParams, k_max: int, n_max: int, block_time: float = HIGHWAY_BLOCK_TIME
) -> LinkGeometry:
    """Geometry with X = v T, on which free-flow Godunov runs are exact."""
    return LinkGeometry(
        xi=0.0,
        chi=(k_max + 1) * flux.v * block_time,
        t_max=(n_max + 1) * block_time,
        k_max=k_max,
        n_max=n_max,
    )


def random_free_flow_run(
    seed: int,
    k_max: int = 8,
    n_max: int = 19,
    cells_per_block: int = 4,
    flux: FluxParams = HIGHWAY_FLUX,
) -> SimulationRun:
    """Random initial densities up to 0.9 rho_c and inflows up to 0.9 q_max."""
    rng = np.random.default_rng(seed)
    geometry = aligned_geometry(flux, k_max, n_max)
    rho0 = rng.uniform(0.0, 0.9 * flux.rho_c, geometry.space_blocks)
    inflow = rng.uniform(0.0, 0.9 * flux.q_max, geometry.time_blocks)
    supply = np.full(geometry.time_blocks, flux.q_max)
    return simulate(flux, geometry, rho0, inflow, supply, cells_per_block)


def bottleneck_run(
    k_max: int = 3,
    n_max: int = 19,
    upstream_share: float = 0.8,
    supply_share: float = 0.2,
    cells_per_block: int = 4,
    flux: FluxParams = HIGHWAY_FLUX,
) -> SimulationRun:
    """
    Uniform free-flow traffic at upstream_share * rho_c meeting a downstream
    bottleneck that accepts supply_share * q_max. A queue forms at the exit
    and one shock travels upstream; boundary flows stay constant, so the
    block averages are the exact ground truth.
    """
    if not 0.0 <= supply_share < upstream_share <= 1.0:
        raise ConfigurationError(
            f"A queue needs 0 <= supply_share < upstream_share <= 1, got {supply_share}, {upstream_share}"
        )
    geometry = aligned_geometry(flux, k_max, n_max)
    rho_free = upstream_share * flux.rho_c
    q_free = flux.v * rho_free
    supply = supply_share * flux.q_max
    rho_queue = flux.rho_m + supply / flux.w
    shock = (supply - q_free) / (rho_queue - rho_free)
    if -shock * geometry.t_max >= geometry.length:
        raise ConfigurationError(
            f"Queue reaches the entrance before t={geometry.t_max}; shorten the horizon or raise the supply"
        )
    logger.debug("Bottleneck run: queue density %.6g veh/m, shock speed %.6g m/s", rho_queue, shock)
    return simulate(
        flux,
        geometry,
        np.full(geometry.space_blocks, rho_free),
        np.full(geometry.time_blocks, q_free),
        np.full(geometry.time_blocks, supply),
        cells_per_block,
    )


# -----------------------------
# Measurements and ground truth
# -----------------------------
def sensor_series(
    run: SimulationRun, edge: int, relative_error: float = 0.01, link: str = "main"
) -> SensorSeries:
    """Stationary sensor on space-block edge `edge`, reporting the true block flows."""
    geometry = run.geometry
    if not 0 < edge <= geometry.k_max:
        raise ConfigurationError(f"Sensor edge {edge} must be inside (0, {geometry.k_max}]")
    x = geometry.x_edge(edge)
    rows = []
    for n in range(geometry.time_blocks):
        start, end = geometry.t_edge(n), geometry.t_edge(n + 1)
        rate = (run.moskowitz(end, x) - run.moskowitz(start, x)) / (end - start)
        rows.append((n, max(rate, 0.0), relative_error))
    return SensorSeries(link=link, sensor_id=f"edge{edge}", position=x, rows=tuple(rows))


def density_snapshot(
    run: SimulationRun, n: int, k: int, absolute_error: float = 0.0, link: str = "main"
) -> DensitySnapshot:
    """Average density of space block k at time n T."""
    geometry = run.geometry
    t = geometry.t_edge(n)
    x_min, x_max = geometry.x_edge(k), geometry.x_edge(k + 1)
    value = (run.moskowitz(t, x_min) - run.moskowitz(t, x_max)) / (x_max - x_min)
    return DensitySnapshot(
        link=link, time=t, x_min=x_min, x_max=x_max, value=value, absolute_error=absolute_error
    )


def initial_densities(
    run: SimulationRun, absolute_error: float = 0.0, link: str = "main"
) -> tuple[DensityMeasurement, ...]:
    return tuple(
        DensityMeasurement(link, k, float(rho), absolute_error)
        for k, rho in enumerate(run.rho_ini_blocks())
    )


def probe_trace(
    run: SimulationRun,
    t0: float,
    x0: float,
    fix_times: Sequence[float],
    trace_id: str = "p0",
    link: str = "main",
    passing_rate_error: float = 0.01,
) -> ProbeTrace:
    times, positions = run.trace_probe(t0, x0, fix_times)
    return ProbeTrace(
        link=link,
        trace_id=trace_id,
        times=times,
        positions=positions,
        passing_rate_error=passing_rate_error,
    )


@dataclass(frozen=True)
class OracleExtraction:
    definition: LinkDefinition
    index: DecisionIndex
    link: LinkModel
    truth: np.ndarray


def extract_conditions(
    run: SimulationRun,
    link_id: str = "main",
    sensors: Sequence[SensorSeries] = (),
    snapshots: Sequence[DensitySnapshot] = (),
    probes: Sequence[ProbeTrace] = (),
) -> OracleExtraction:
    """
    Builds the link's value conditions and the decision vector the run
    induces: block averages for boundary and initial data, Moskowitz
    readings for internal labels, rates and densities.
    """
    geometry, flux = run.geometry, run.flux
    definition = LinkDefinition(link_id, geometry, flux)
    measurements = Measurements(
        probes=tuple(probes), sensors=tuple(sensors), snapshots=tuple(snapshots)
    )
    block_edges = tuple(geometry.t_edge(n) for n in range(geometry.time_blocks + 1))
    index = DecisionIndex()
    link = LinkModel.build(
        definition,
        index,
        measurements.segments_for(link_id, flux, block_edges),
        measurements.spans_for(link_id),
    )

    truth = np.zeros(len(index))
    truth[list(link.rho_ids)] = run.rho_ini_blocks()
    truth[list(link.q_in_ids)] = run.q_in_blocks()
    truth[list(link.q_out_ids)] = run.q_out_blocks()
    for cond in link.trajectories:
        _fill_trajectory(run, cond, truth)
    for cond in link.densities:
        _fill_density(run, cond, truth)
    return OracleExtraction(definition, index, link, truth)


def _fill_trajectory(run: SimulationRun, cond: InternalTrajectory, truth: np.ndarray) -> None:
    start = run.moskowitz(cond.t_min, cond.x_min)
    end = run.moskowitz(cond.t_max, cond.x_max)
    truth[cond.label_id] = start
    truth[cond.rate_id] = (end - start) / (cond.t_max - cond.t_min)


def _fill_density(run: SimulationRun, cond: InternalDensity, truth: np.ndarray) -> None:
    start = run.moskowitz(cond.t_rho, cond.x_min_rho)
    end = run.moskowitz(cond.t_rho, cond.x_max_rho)
    truth[cond.label_id] = start
    truth[cond.density_id] = (start - end) / (cond.x_max_rho - cond.x_min_rho)


def oracle_scenario(
    run: SimulationRun,
    relative_error: float = 0.01,
    name: str = "oracle",
    link_id: str = "main",
    sensors: Sequence[SensorSeries] = (),
    snapshots: Sequence[DensitySnapshot] = (),
    probes: Sequence[ProbeTrace] = (),
    densities: Sequence[DensityMeasurement] = (),
) -> Scenario:
    """Single-link scenario with boundary flow boxes of the given relative error."""
    flows = [
        FlowMeasurement(link_id, Boundary.UPSTREAM, n, float(q), relative_error)
        for n, q in enumerate(run.q_in_blocks())
    ]
    flows += [
        FlowMeasurement(link_id, Boundary.DOWNSTREAM, n, float(q), relative_error)
        for n, q in enumerate(run.q_out_blocks())
    ]
    topology = NetworkTopology(links=(LinkDefinition(link_id, run.geometry, run.flux),))
    measurements = Measurements(
        flows=tuple(flows),
        densities=tuple(densities),
        probes=tuple(probes),
        sensors=tuple(sensors),
        snapshots=tuple(snapshots),
    )
    return Scenario(name=name, topology=topology, measurements=measurements)
