# src/domain/scenario.py

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from src.domain.conditions import DensitySpan, TrajectorySegment, clamp_probe_speed
from src.domain.decision import VariableKind
from src.domain.exceptions import DataError
from src.domain.flux import FluxParams
from src.domain.network import NetworkTopology
from src.domain.problem import Sense


class Boundary(str, Enum):
    UPSTREAM = "upstream"
    DOWNSTREAM = "downstream"


class ObjectiveKind(str, Enum):
    INITIAL_VEHICLES = "initial-vehicles"
    L1_SMOOTHING = "l1-smoothing"
    L1_ZERO = "l1-zero"
    L1_REFERENCE = "l1-reference"
    LINEAR = "linear"


# -----------------------------
# Measurements
# -----------------------------
@dataclass(frozen=True)
class FlowMeasurement:
    link: str
    boundary: Boundary
    block: int
    value: float
    relative_error: float


@dataclass(frozen=True)
class DensityMeasurement:
    """Initial density of one space block; error is a fraction of rho_m."""

    link: str
    block: int
    value: float
    absolute_error: float


@dataclass(frozen=True)
class ProbeTrace:
    link: str
    trace_id: str
    times: tuple[float, ...]
    positions: tuple[float, ...]
    passing_rate_error: float = 0.01

    def segments(self, flux: FluxParams) -> tuple[TrajectorySegment, ...]:
        """
        One segment per pair of consecutive fixes. Each segment starts where
        the previous one ended, so clamped speeds do not break label chains.
        """
        segments = []
        x_start = self.positions[0]
        for i in range(len(self.times) - 1):
            segment = clamp_probe_speed(
                flux,
                TrajectorySegment(
                    t_min=self.times[i],
                    x_min=x_start,
                    t_max=self.times[i + 1],
                    x_max=self.positions[i + 1],
                    trace=f"probe:{self.trace_id}",
                    segment=i,
                ),
            )
            segments.append(segment)
            x_start = segment.x_max
        return tuple(segments)


@dataclass(frozen=True)
class SensorSeries:
    """Stationary flow sensor inside a link; rows are (block, value, relative_error)."""

    link: str
    sensor_id: str
    position: float
    rows: tuple[tuple[int, float, float], ...]

    def segments(self, block_edges: tuple[float, ...]) -> tuple[TrajectorySegment, ...]:
        segments = []
        run = 0
        previous = None
        for block, _, _ in self.rows:
            run = run + 1 if previous is not None and block == previous + 1 else 0
            segments.append(
                TrajectorySegment(
                    t_min=block_edges[block],
                    x_min=self.position,
                    t_max=block_edges[block + 1],
                    x_max=self.position,
                    trace=f"sensor:{self.sensor_id}",
                    segment=run,
                )
            )
            previous = block
        return tuple(segments)


@dataclass(frozen=True)
class DensitySnapshot:
    link: str
    time: float
    x_min: float
    x_max: float
    value: float
    absolute_error: float

    @property
    def span(self) -> DensitySpan:
        return DensitySpan(t_rho=self.time, x_min=self.x_min, x_max=self.x_max)


@dataclass(frozen=True)
class TravelTimeMeasurement:
    from_link: str
    to_link: str
    t0: float
    tf: float


@dataclass(frozen=True)
class Measurements:
    flows: tuple[FlowMeasurement, ...] = ()
    densities: tuple[DensityMeasurement, ...] = ()
    probes: tuple[ProbeTrace, ...] = ()
    sensors: tuple[SensorSeries, ...] = ()
    snapshots: tuple[DensitySnapshot, ...] = ()
    travel_times: tuple[TravelTimeMeasurement, ...] = ()

    def segments_for(
        self, link_id: str, flux: FluxParams, block_edges: tuple[float, ...]
    ) -> tuple[TrajectorySegment, ...]:
        """Internal trajectory segments of one link: probes first, then sensors."""
        segments: list[TrajectorySegment] = []
        for probe in self.probes:
            if probe.link == link_id:
                segments.extend(probe.segments(flux))
        for sensor in self.sensors:
            if sensor.link == link_id:
                segments.extend(sensor.segments(block_edges))
        return tuple(segments)

    def spans_for(self, link_id: str) -> tuple[DensitySpan, ...]:
        return tuple(s.span for s in self.snapshots if s.link == link_id)


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: ObjectiveKind = ObjectiveKind.INITIAL_VEHICLES
    sense: Sense = Sense.MIN
    group: VariableKind = VariableKind.RHO_INI
    reference: tuple[float, ...] = ()
    coefficients: tuple[tuple[str, float], ...] = ()


@dataclass(frozen=True)
class Scenario:
    name: str
    topology: NetworkTopology
    measurements: Measurements = field(default_factory=Measurements)
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    big_m: float | None = None
    big_m_flow: float | None = None
    solver_options: tuple[tuple[str, object], ...] = ()
    density_resolution: tuple[int, int] | None = None
    travel_time_route: tuple[str, ...] = ()
    travel_time_entries: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        _validate_measurements(self)
        if self.big_m is not None and not self.big_m > 0:
            raise DataError(f"big_m must be positive, got {self.big_m}")
        if self.big_m_flow is not None and not self.big_m_flow > 0:
            raise DataError(f"big_m_flow must be positive, got {self.big_m_flow}")
        if self.travel_time_route:
            self.topology.route(self.travel_time_route)
        for t0 in self.travel_time_entries:
            if not 0.0 <= t0 <= self.horizon:
                raise DataError(f"Travel-time entry {t0} outside [0, {self.horizon}]")

    @property
    def horizon(self) -> float:
        return self.topology.links[0].geometry.t_max

    @property
    def link_ids(self) -> tuple[str, ...]:
        return tuple(link.link_id for link in self.topology.links)


def _finite(value: float, what: str) -> None:
    if value is None or not math.isfinite(value):
        raise DataError(f"{what} has no finite value")


def _validate_measurements(scenario: Scenario) -> None:
    topology = scenario.topology
    data = scenario.measurements

    for m in data.flows:
        geometry = topology.link(m.link).geometry
        _finite(m.value, f"Flow on {m.link} block {m.block}")
        if not 0 <= m.block <= geometry.n_max:
            raise DataError(f"Flow block {m.block} outside [0, {geometry.n_max}] on {m.link}")
        if m.relative_error < 0:
            raise DataError(f"Negative relative error {m.relative_error} on {m.link}")
        if m.value < 0:
            raise DataError(f"Negative flow {m.value} on {m.link} block {m.block}")

    for m in data.densities:
        geometry = topology.link(m.link).geometry
        _finite(m.value, f"Density on {m.link} block {m.block}")
        if not 0 <= m.block <= geometry.k_max:
            raise DataError(f"Density block {m.block} outside [0, {geometry.k_max}] on {m.link}")
        if m.absolute_error < 0:
            raise DataError(f"Negative absolute error {m.absolute_error} on {m.link}")

    for probe in data.probes:
        geometry = topology.link(probe.link).geometry
        if len(probe.times) < 2 or len(probe.times) != len(probe.positions):
            raise DataError(f"Probe {probe.trace_id!r} needs at least two (t, x) fixes")
        if any(b <= a for a, b in zip(probe.times, probe.times[1:])):
            raise DataError(f"Probe {probe.trace_id!r} timestamps must be strictly increasing")
        if probe.times[0] < 0 or probe.times[-1] > geometry.t_max:
            raise DataError(f"Probe {probe.trace_id!r} leaves the horizon")
        if any(not geometry.xi <= x <= geometry.chi for x in probe.positions):
            raise DataError(f"Probe {probe.trace_id!r} leaves link {probe.link!r}")
        if probe.passing_rate_error < 0:
            raise DataError(f"Probe {probe.trace_id!r} has a negative passing-rate error")

    for sensor in data.sensors:
        geometry = topology.link(sensor.link).geometry
        if not sensor.rows:
            raise DataError(f"Sensor {sensor.sensor_id!r} has no rows")
        if not geometry.xi < sensor.position < geometry.chi:
            raise DataError(f"Sensor {sensor.sensor_id!r} must sit strictly inside {sensor.link!r}")
        blocks = [row[0] for row in sensor.rows]
        if any(b <= a for a, b in zip(blocks, blocks[1:])):
            raise DataError(f"Sensor {sensor.sensor_id!r} block indices must be increasing")
        for block, value, error in sensor.rows:
            _finite(value, f"Sensor {sensor.sensor_id!r} block {block}")
            if not 0 <= block <= geometry.n_max or error < 0 or value < 0:
                raise DataError(f"Sensor {sensor.sensor_id!r} row {block} is invalid")

    for snapshot in data.snapshots:
        geometry = topology.link(snapshot.link).geometry
        _finite(snapshot.value, f"Snapshot on {snapshot.link}")
        if not 0 <= snapshot.time <= geometry.t_max:
            raise DataError(f"Snapshot time {snapshot.time} outside the horizon")
        if not geometry.xi <= snapshot.x_min < snapshot.x_max <= geometry.chi:
            raise DataError(f"Snapshot span [{snapshot.x_min}, {snapshot.x_max}] invalid")
        if snapshot.absolute_error < 0:
            raise DataError("Snapshot has a negative absolute error")

    for m in data.travel_times:
        topology.link(m.from_link)
        topology.link(m.to_link)
        if not m.t0 < m.tf:
            raise DataError(f"Travel time needs t0 < tf, got t0={m.t0}, tf={m.tf}")
        if m.t0 < 0 or m.tf > scenario.horizon:
            raise DataError(f"Travel time [{m.t0}, {m.tf}] leaves the horizon")
