# src/infrastructure/io/schemas.py

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ScenarioSection(StrictModel):
    name: str
    horizon: str
    time_blocks: int = Field(gt=0)


class LinkSchema(StrictModel):
    id: str
    upstream: str
    downstream: str
    space_blocks: int = Field(gt=0)
    lanes: int = Field(default=1, gt=0)
    free_flow_speed: str
    congestion_wave_speed: str
    critical_density: str


class FlowSeriesSchema(StrictModel):
    link: str
    boundary: Literal["upstream", "downstream"]
    file: str
    unit: str


class DensitySchema(StrictModel):
    link: str
    block: int = Field(ge=0)
    value: str
    absolute_error: float = Field(ge=0)


class ProbeSchema(StrictModel):
    link: str
    file: str
    id: str | None = None
    time_unit: str = "s"
    position_unit: str = "m"
    passing_rate_error: float = Field(default=0.01, ge=0)


class SensorSchema(StrictModel):
    link: str
    position: str
    file: str
    unit: str
    id: str | None = None


class SnapshotSchema(StrictModel):
    link: str
    time: str
    start: str
    end: str
    value: str
    absolute_error: float = Field(default=0.0, ge=0)


class TravelTimeSchema(StrictModel):
    from_link: str
    to_link: str
    file: str


class MeasurementsSchema(StrictModel):
    flows: list[FlowSeriesSchema] = []
    densities: list[DensitySchema] = []
    probes: list[ProbeSchema] = []
    sensors: list[SensorSchema] = []
    snapshots: list[SnapshotSchema] = []
    travel_times: list[TravelTimeSchema] = []


class JunctionSchema(StrictModel):
    id: str
    incoming: list[str] = Field(min_length=1)
    outgoing: list[str] = []
    on_ramps: list[str] = []
    off_ramps: list[str] = []
    allocation: list[list[float]] = []


class RampSchema(StrictModel):
    id: str
    capacity: str | None = None
    flow_range: tuple[str, str] | None = None


class ObjectiveSchema(StrictModel):
    kind: Literal["initial-vehicles", "l1-smoothing", "l1-zero", "l1-reference", "linear"] = (
        "initial-vehicles"
    )
    sense: Literal["min", "max"] = "min"
    group: Literal["rho_ini", "q_in", "q_out"] = "rho_ini"
    reference: list[float] = []
    coefficients: dict[str, float] = {}


class SolverSchema(StrictModel):
    backend: Literal["auto", "branch-and-bound", "highs"] | None = None
    max_binaries: int | None = Field(default=None, ge=0)
    node_limit: int | None = Field(default=None, gt=0)
    iteration_limit: int | None = Field(default=None, gt=0)
    feasibility_tol: float | None = Field(default=None, gt=0)
    integrality_tol: float | None = Field(default=None, gt=0)
    big_m: str | None = None
    big_m_flow: str | None = None


class OutputSchema(StrictModel):
    density_resolution: tuple[int, int] | None = None
    travel_time_route: list[str] = []
    travel_time_entries: list[str] = []


class ScenarioFileSchema(StrictModel):
    scenario: ScenarioSection
    links: list[LinkSchema] = Field(min_length=1)
    measurements: MeasurementsSchema = MeasurementsSchema()
    junctions: list[JunctionSchema] = []
    ramps: list[RampSchema] = []
    objective: ObjectiveSchema = ObjectiveSchema()
    solver: SolverSchema = SolverSchema()
    output: OutputSchema = OutputSchema()
