# src/infrastructure/io/scenario_loader.py

from __future__ import annotations

import itertools
import logging

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

import tomli_w
from pydantic import ValidationError

from src.domain.decision import VariableKind
from src.domain.exceptions import ScenarioFileError
from src.domain.flux import make_flux_params
from src.domain.geometry import LinkGeometry
from src.domain.network import Junction, LinkDefinition, NetworkTopology, Ramp
from src.domain.problem import Sense
from src.domain.scenario import (
    Boundary,
    DensityMeasurement,
    DensitySnapshot,
    FlowMeasurement,
    Measurements,
    ObjectiveKind,
    ObjectiveSpec,
    ProbeTrace,
    Scenario,
    SensorSeries,
    TravelTimeMeasurement,
)
from src.infrastructure.io.measurements import (
    read_flow_csv,
    read_probe_csv,
    read_travel_time_csv,
    write_flow_csv,
    write_probe_csv,
    write_travel_time_csv,
)
from src.infrastructure.io.schemas import ScenarioFileSchema
from src.infrastructure.io.units import Dimension, UnitError, format_quantity, parse_quantity

logger = logging.getLogger(__name__)

SCENARIO_FILE = "scenario.toml"


class _Reader:
    """Converts a validated document into domain objects, keeping field paths for errors."""

    def __init__(self, path: Path, document: ScenarioFileSchema):
        self.path = path
        self.base = path.parent
        self.document = document
        self.lanes: dict[str, int] = {link.id: link.lanes for link in document.links}

    def fail(self, detail: str, location: str) -> ScenarioFileError:
        return ScenarioFileError(str(self.path), detail, location)

    def quantity(self, text: str, dimension: Dimension, location: str, lanes: int = 1) -> float:
        try:
            return parse_quantity(text, dimension, lanes)
        except UnitError as exc:
            raise self.fail(str(exc), location) from None

    def big_m(self, text: str | None, dimension: Dimension, location: str) -> float | None:
        if text is None:
            return None
        value = self.quantity(text, dimension, location)
        if not value > 0:
            raise self.fail(f"must be positive, got {text!r}", location)
        return value

    def file(self, name: str) -> Path:
        return (self.base / name).resolve()

    def link_lanes(self, link_id: str, location: str) -> int:
        if link_id not in self.lanes:
            raise self.fail(f"unknown link {link_id!r}", location)
        return self.lanes[link_id]

    # -----------------------------
    # Sections
    # -----------------------------
    def topology(self) -> NetworkTopology:
        doc = self.document
        horizon = self.quantity(doc.scenario.horizon, Dimension.TIME, "scenario.horizon")
        links = []
        for i, link in enumerate(doc.links):
            where = f"links.{i}"
            geometry = LinkGeometry(
                xi=self.quantity(link.upstream, Dimension.LENGTH, f"{where}.upstream"),
                chi=self.quantity(link.downstream, Dimension.LENGTH, f"{where}.downstream"),
                t_max=horizon,
                k_max=link.space_blocks - 1,
                n_max=doc.scenario.time_blocks - 1,
            )
            flux = make_flux_params(
                self.quantity(link.free_flow_speed, Dimension.SPEED, f"{where}.free_flow_speed"),
                self.quantity(
                    link.congestion_wave_speed, Dimension.SPEED, f"{where}.congestion_wave_speed"
                ),
                self.quantity(
                    link.critical_density, Dimension.DENSITY, f"{where}.critical_density", link.lanes
                ),
            )
            links.append(LinkDefinition(link.id, geometry, flux))

        ramps = []
        for i, ramp in enumerate(doc.ramps):
            where = f"ramps.{i}"
            capacity = None
            if ramp.capacity is not None:
                capacity = self.quantity(ramp.capacity, Dimension.FLOW, f"{where}.capacity")
            flow_range = None
            if ramp.flow_range is not None:
                low, high = (
                    self.quantity(text, Dimension.FLOW, f"{where}.flow_range")
                    for text in ramp.flow_range
                )
                if low > high:
                    raise self.fail("flow_range lower end above upper end", f"{where}.flow_range")
                flow_range = (low, high)
            ramps.append(Ramp(ramp.id, capacity, flow_range))

        junctions = []
        for i, junction in enumerate(doc.junctions):
            allocation = tuple(tuple(row) for row in junction.allocation)
            exits = len(junction.outgoing) + len(junction.off_ramps)
            if not allocation and exits == 1:
                entries = len(junction.incoming) + len(junction.on_ramps)
                allocation = ((1.0,) * entries,)
            elif not allocation:
                raise self.fail(
                    f"junction {junction.id!r} has {exits} exits and needs an allocation matrix",
                    f"junctions.{i}.allocation",
                )
            junctions.append(
                Junction(
                    junction_id=junction.id,
                    incoming=tuple(junction.incoming),
                    outgoing=tuple(junction.outgoing),
                    on_ramps=tuple(junction.on_ramps),
                    off_ramps=tuple(junction.off_ramps),
                    allocation=allocation,
                )
            )
        return NetworkTopology(tuple(links), tuple(junctions), tuple(ramps))

    def measurements(self) -> Measurements:
        data = self.document.measurements
        flows = []
        for i, series in enumerate(data.flows):
            self.link_lanes(series.link, f"measurements.flows.{i}.link")
            for block, value, error in self._flow_rows(series.file, series.unit, f"measurements.flows.{i}"):
                flows.append(FlowMeasurement(series.link, Boundary(series.boundary), block, value, error))

        densities = []
        for i, item in enumerate(data.densities):
            where = f"measurements.densities.{i}"
            lanes = self.link_lanes(item.link, f"{where}.link")
            value = self.quantity(item.value, Dimension.DENSITY, f"{where}.value", lanes)
            densities.append(DensityMeasurement(item.link, item.block, value, item.absolute_error))

        probes = []
        for i, item in enumerate(data.probes):
            where = f"measurements.probes.{i}"
            self.link_lanes(item.link, f"{where}.link")
            try:
                times, positions = read_probe_csv(self.file(item.file), item.time_unit, item.position_unit)
            except UnitError as exc:
                raise self.fail(str(exc), where) from None
            probes.append(
                ProbeTrace(item.link, item.id or f"p{i}", times, positions, item.passing_rate_error)
            )

        sensors = []
        for i, item in enumerate(data.sensors):
            where = f"measurements.sensors.{i}"
            self.link_lanes(item.link, f"{where}.link")
            position = self.quantity(item.position, Dimension.LENGTH, f"{where}.position")
            rows = tuple(self._flow_rows(item.file, item.unit, where))
            sensors.append(SensorSeries(item.link, item.id or f"s{i}", position, rows))

        snapshots = []
        for i, item in enumerate(data.snapshots):
            where = f"measurements.snapshots.{i}"
            lanes = self.link_lanes(item.link, f"{where}.link")
            snapshots.append(
                DensitySnapshot(
                    link=item.link,
                    time=self.quantity(item.time, Dimension.TIME, f"{where}.time"),
                    x_min=self.quantity(item.start, Dimension.LENGTH, f"{where}.start"),
                    x_max=self.quantity(item.end, Dimension.LENGTH, f"{where}.end"),
                    value=self.quantity(item.value, Dimension.DENSITY, f"{where}.value", lanes),
                    absolute_error=item.absolute_error,
                )
            )

        travel_times = []
        for i, item in enumerate(data.travel_times):
            for t0, tf in read_travel_time_csv(self.file(item.file)):
                travel_times.append(TravelTimeMeasurement(item.from_link, item.to_link, t0, tf))

        return Measurements(
            flows=tuple(flows),
            densities=tuple(densities),
            probes=tuple(probes),
            sensors=tuple(sensors),
            snapshots=tuple(snapshots),
            travel_times=tuple(travel_times),
        )

    def _flow_rows(self, name: str, unit: str, where: str) -> list[tuple[int, float, float]]:
        try:
            return read_flow_csv(self.file(name), unit)
        except UnitError as exc:
            raise self.fail(str(exc), f"{where}.unit") from None

    def objective(self) -> ObjectiveSpec:
        section = self.document.objective
        return ObjectiveSpec(
            kind=ObjectiveKind(section.kind),
            sense=Sense(section.sense),
            group=VariableKind(section.group),
            reference=tuple(section.reference),
            coefficients=tuple(sorted(section.coefficients.items())),
        )

    def scenario(self) -> Scenario:
        doc = self.document
        solver = doc.solver.model_dump(exclude_none=True)
        big_m = self.big_m(solver.pop("big_m", None), Dimension.VEHICLES, "solver.big_m")
        big_m_flow = self.big_m(solver.pop("big_m_flow", None), Dimension.FLOW, "solver.big_m_flow")
        entries = tuple(
            self.quantity(text, Dimension.TIME, f"output.travel_time_entries.{i}")
            for i, text in enumerate(doc.output.travel_time_entries)
        )
        return Scenario(
            name=doc.scenario.name,
            topology=self.topology(),
            measurements=self.measurements(),
            objective=self.objective(),
            big_m=big_m,
            big_m_flow=big_m_flow,
            solver_options=tuple(sorted(solver.items())),
            density_resolution=doc.output.density_resolution,
            travel_time_route=tuple(doc.output.travel_time_route),
            travel_time_entries=entries,
        )


def load_scenario(path: str | Path) -> Scenario:
    """Reads, validates and converts a scenario file; quantities end up in SI."""
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScenarioFileError(str(path), f"cannot read file: {exc.strerror or exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioFileError(str(path), str(exc)) from exc

    try:
        document = ScenarioFileSchema.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ScenarioFileError(str(path), first["msg"], location) from exc

    scenario = _Reader(path, document).scenario()
    logger.info(
        "Loaded scenario %r: %d links, %d junctions", scenario.name, len(scenario.link_ids), len(scenario.topology.junctions)
    )
    return scenario


# -----------------------------
# Writing
# -----------------------------
def _si(value: float, dimension: Dimension) -> str:
    return format_quantity(value, dimension)


def _document(scenario: Scenario, directory: Path) -> dict:
    topology = scenario.topology
    first = topology.links[0].geometry
    doc: dict = {
        "scenario": {
            "name": scenario.name,
            "horizon": _si(first.t_max, Dimension.TIME),
            "time_blocks": first.time_blocks,
        },
        "links": [
            {
                "id": link.link_id,
                "upstream": _si(link.geometry.xi, Dimension.LENGTH),
                "downstream": _si(link.geometry.chi, Dimension.LENGTH),
                "space_blocks": link.geometry.space_blocks,
                "lanes": 1,
                "free_flow_speed": _si(link.flux.v, Dimension.SPEED),
                "congestion_wave_speed": _si(link.flux.w, Dimension.SPEED),
                "critical_density": _si(link.flux.rho_c, Dimension.DENSITY),
            }
            for link in topology.links
        ],
    }

    data = scenario.measurements
    measurements: dict = {}

    flows = []
    runs = itertools.groupby(data.flows, key=lambda m: (m.link, m.boundary))
    for i, ((link, boundary), group) in enumerate(runs):
        name = f"flow_{i}_{link}_{boundary.value}.csv"
        write_flow_csv(directory / name, [(m.block, m.value, m.relative_error) for m in group])
        flows.append({"link": link, "boundary": boundary.value, "file": name, "unit": "veh/s"})
    if flows:
        measurements["flows"] = flows

    if data.densities:
        measurements["densities"] = [
            {
                "link": m.link,
                "block": m.block,
                "value": _si(m.value, Dimension.DENSITY),
                "absolute_error": m.absolute_error,
            }
            for m in data.densities
        ]

    probes = []
    for i, probe in enumerate(data.probes):
        name = f"probe_{i}.csv"
        write_probe_csv(directory / name, probe.times, probe.positions)
        probes.append(
            {
                "link": probe.link,
                "file": name,
                "id": probe.trace_id,
                "passing_rate_error": probe.passing_rate_error,
            }
        )
    if probes:
        measurements["probes"] = probes

    sensors = []
    for i, sensor in enumerate(data.sensors):
        name = f"sensor_{i}.csv"
        write_flow_csv(directory / name, sensor.rows)
        sensors.append(
            {
                "link": sensor.link,
                "position": _si(sensor.position, Dimension.LENGTH),
                "file": name,
                "unit": "veh/s",
                "id": sensor.sensor_id,
            }
        )
    if sensors:
        measurements["sensors"] = sensors

    if data.snapshots:
        measurements["snapshots"] = [
            {
                "link": s.link,
                "time": _si(s.time, Dimension.TIME),
                "start": _si(s.x_min, Dimension.LENGTH),
                "end": _si(s.x_max, Dimension.LENGTH),
                "value": _si(s.value, Dimension.DENSITY),
                "absolute_error": s.absolute_error,
            }
            for s in data.snapshots
        ]

    travel = []
    runs = itertools.groupby(data.travel_times, key=lambda m: (m.from_link, m.to_link))
    for i, ((from_link, to_link), group) in enumerate(runs):
        name = f"travel_{i}.csv"
        write_travel_time_csv(directory / name, [(m.t0, m.tf) for m in group])
        travel.append({"from_link": from_link, "to_link": to_link, "file": name})
    if travel:
        measurements["travel_times"] = travel

    if measurements:
        doc["measurements"] = measurements

    if topology.junctions:
        doc["junctions"] = [
            {
                "id": j.junction_id,
                "incoming": list(j.incoming),
                "outgoing": list(j.outgoing),
                "on_ramps": list(j.on_ramps),
                "off_ramps": list(j.off_ramps),
                "allocation": [list(row) for row in j.allocation],
            }
            for j in topology.junctions
        ]
    if topology.ramps:
        ramps = []
        for ramp in topology.ramps:
            entry: dict = {"id": ramp.ramp_id}
            if ramp.capacity is not None:
                entry["capacity"] = _si(ramp.capacity, Dimension.FLOW)
            if ramp.flow_range is not None:
                entry["flow_range"] = [_si(value, Dimension.FLOW) for value in ramp.flow_range]
            ramps.append(entry)
        doc["ramps"] = ramps

    objective = scenario.objective
    doc["objective"] = {
        "kind": objective.kind.value,
        "sense": objective.sense.value,
        "group": objective.group.value,
        "reference": list(objective.reference),
        "coefficients": dict(objective.coefficients),
    }

    solver = dict(scenario.solver_options)
    if scenario.big_m is not None:
        solver["big_m"] = _si(scenario.big_m, Dimension.VEHICLES)
    if scenario.big_m_flow is not None:
        solver["big_m_flow"] = _si(scenario.big_m_flow, Dimension.FLOW)
    if solver:
        doc["solver"] = solver

    output: dict = {}
    if scenario.density_resolution is not None:
        output["density_resolution"] = list(scenario.density_resolution)
    if scenario.travel_time_route:
        output["travel_time_route"] = list(scenario.travel_time_route)
    if scenario.travel_time_entries:
        output["travel_time_entries"] = [_si(t, Dimension.TIME) for t in scenario.travel_time_entries]
    if output:
        doc["output"] = output
    return doc


def write_scenario(scenario: Scenario, directory: str | Path) -> Path:
    """Writes scenario.toml plus measurement CSVs into `directory`, every quantity in SI."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / SCENARIO_FILE
    path.write_text(tomli_w.dumps(_document(scenario, directory)), encoding="utf-8")
    logger.info("Wrote scenario %r to %s", scenario.name, path)
    return path
