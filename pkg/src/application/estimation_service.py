# src/application/estimation_service.py

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from src.application.constraints import (
    BoxMeasurement,
    gen_continuity_constraints,
    gen_data_constraints,
    gen_model_constraints,
    gen_trace_chain_constraints,
    gen_travel_time_constraints,
)
from src.application.junctions import (
    JunctionModel,
    build_junction_models,
    gen_junction_constraints,
    gen_ramp_data_constraints,
)
from src.domain.affine import AffineExpr
from src.domain.decision import DecisionIndex, VariableKind
from src.domain.estimates import DensityMap, TravelTimeEstimate
from src.domain.exceptions import ConfigurationError, DataError, InfeasibleScenarioError
from src.domain.laxhopf import full_solution_values
from src.domain.network import LinkModel
from src.domain.problem import LinearConstraint, MilpProblem, MilpSolution, Sense, SolveStatus
from src.domain.scenario import Boundary, ObjectiveKind, ObjectiveSpec, Scenario
from src.infrastructure.settings import SolverSettings, load_solver_settings
from src.infrastructure.solver.branch_and_bound import solve_milp

logger = logging.getLogger(__name__)

# Bisection stops once the bracket is narrower than this (seconds).
TRAVEL_TIME_TOL = 1e-4
# Densities further than this fraction of rho_m outside [0, rho_m] count as clamped.
CLAMP_TOL = 1e-9
DENSITY_ROW_CHUNK = 25


@dataclass(frozen=True)
class EstimationProblem:
    """An assembled problem with the link and junction models it was built from."""

    scenario: Scenario
    index: DecisionIndex
    links: dict[str, LinkModel]
    junctions: list[JunctionModel]
    problem: MilpProblem


@dataclass(frozen=True)
class ObjectiveBounds:
    minimum: MilpSolution
    maximum: MilpSolution

    @property
    def interval(self) -> tuple[float | None, float | None]:
        return self.minimum.objective, self.maximum.objective


@dataclass(frozen=True)
class EstimationResult:
    estimation: EstimationProblem
    solution: MilpSolution
    density_maps: dict[str, DensityMap] = field(default_factory=dict)
    travel_times: tuple[TravelTimeEstimate, ...] = ()


class EstimationService:
    """Application service: scenario in, solved problem and derived estimates out."""

    def __init__(self, settings: SolverSettings | None = None):
        self.settings = settings or load_solver_settings()

    def settings_for(self, scenario: Scenario) -> SolverSettings:
        return self.settings.with_overrides(scenario.solver_options)

    # -----------------------------
    # Assembly
    # -----------------------------
    def assemble_problem(
        self, scenario: Scenario, objective: ObjectiveSpec | None = None
    ) -> EstimationProblem:
        topology = scenario.topology
        index = DecisionIndex()

        links: dict[str, LinkModel] = {}
        for definition in topology.links:
            geometry = definition.geometry
            edges = tuple(geometry.t_edge(n) for n in range(geometry.time_blocks + 1))
            links[definition.link_id] = LinkModel.build(
                definition,
                index,
                scenario.measurements.segments_for(definition.link_id, definition.flux, edges),
                scenario.measurements.spans_for(definition.link_id),
            )
        junctions = build_junction_models(topology, links, index)

        constraints: list[LinearConstraint] = []
        for link in links.values():
            constraints.extend(gen_model_constraints(link.conditions, link.flux, index))
        for link in links.values():
            rows, _ = gen_continuity_constraints(link.conditions, link.flux, index, scenario.big_m)
            constraints.extend(rows)
            constraints.extend(gen_trace_chain_constraints(link))
        rows, _ = gen_junction_constraints(junctions, index, scenario.big_m_flow)
        constraints.extend(rows)
        constraints.extend(gen_ramp_data_constraints(topology, junctions))
        constraints.extend(gen_data_constraints(self._box_measurements(scenario, links)))
        constraints.extend(self._travel_time_constraints(scenario, links))

        spec = objective or scenario.objective
        objective_expr = self._objective(spec, links, index, constraints)

        problem = MilpProblem(index.variables, tuple(constraints), objective_expr, spec.sense)
        logger.info(
            "Assembled %r: %d variables (%d binaries), %d constraints",
            scenario.name,
            len(problem.variables),
            len(problem.binary_ids),
            len(problem.constraints),
        )
        logger.info("Constraint families: %s", problem.family_histogram())
        return EstimationProblem(scenario, index, links, junctions, problem)

    @staticmethod
    def _box_measurements(scenario: Scenario, links: dict[str, LinkModel]) -> list[BoxMeasurement]:
        data = scenario.measurements
        boxes: list[BoxMeasurement] = []

        for m in data.flows:
            link = links[m.link]
            ids = link.q_in_ids if m.boundary is Boundary.UPSTREAM else link.q_out_ids
            boxes.append(
                BoxMeasurement.relative(ids[m.block], m.value, m.relative_error, f"data:flow-{m.boundary.value}")
            )

        for m in data.densities:
            link = links[m.link]
            boxes.append(
                BoxMeasurement.absolute(
                    link.rho_ids[m.block], m.value, m.absolute_error, link.flux.rho_m, "data:density"
                )
            )

        for probe in data.probes:
            link = links[probe.link]
            for cond in link.trajectories:
                if cond.trace == f"probe:{probe.trace_id}":
                    boxes.append(
                        BoxMeasurement.absolute(
                            cond.rate_id, 0.0, probe.passing_rate_error, link.flux.q_max, "data:probe"
                        )
                    )

        for sensor in data.sensors:
            link = links[sensor.link]
            segments = [c for c in link.trajectories if c.trace == f"sensor:{sensor.sensor_id}"]
            for cond, (_, value, error) in zip(segments, sensor.rows):
                boxes.append(BoxMeasurement.relative(cond.rate_id, value, error, "data:sensor"))

        for snapshot, cond in _snapshot_conditions(scenario, links):
            boxes.append(
                BoxMeasurement.absolute(
                    cond.density_id,
                    snapshot.value,
                    snapshot.absolute_error,
                    links[snapshot.link].flux.rho_m,
                    "data:snapshot",
                )
            )
        return boxes

    @staticmethod
    def _travel_time_constraints(
        scenario: Scenario, links: dict[str, LinkModel]
    ) -> list[LinearConstraint]:
        constraints = []
        for m in scenario.measurements.travel_times:
            chain = scenario.topology.plain_chain(m.from_link, m.to_link)
            constraints.extend(
                gen_travel_time_constraints(
                    m.t0,
                    m.tf,
                    links[chain[0]],
                    links[chain[-1]],
                    [links[link_id] for link_id in chain[1:-1]],
                )
            )
        return constraints

    @staticmethod
    def _objective(
        spec: ObjectiveSpec,
        links: dict[str, LinkModel],
        index: DecisionIndex,
        constraints: list[LinearConstraint],
    ) -> AffineExpr:
        if spec.kind is ObjectiveKind.INITIAL_VEHICLES:
            return AffineExpr.total(link.initial_vehicles() for link in links.values())
        if spec.kind is ObjectiveKind.LINEAR:
            return AffineExpr.total(index.expr(name, coeff) for name, coeff in spec.coefficients)

        if spec.sense is not Sense.MIN:
            raise ConfigurationError(f"Objective {spec.kind.value!r} can only be minimized")
        if spec.group not in (VariableKind.RHO_INI, VariableKind.Q_IN, VariableKind.Q_OUT):
            raise ConfigurationError(f"L1 objectives apply to rho_ini, q_in or q_out, not {spec.group.value!r}")

        terms: list[AffineExpr] = []
        if spec.kind is ObjectiveKind.L1_SMOOTHING:
            for link_id in links:
                ids = index.ids_of_kind(spec.group, owner=link_id)
                terms.extend(AffineExpr.var(b) - AffineExpr.var(a) for a, b in zip(ids, ids[1:]))
        else:
            ids = index.ids_of_kind(spec.group)
            if spec.kind is ObjectiveKind.L1_ZERO:
                terms = [AffineExpr.var(i) for i in ids]
            else:
                if len(spec.reference) != len(ids):
                    raise DataError(
                        f"L1 reference has {len(spec.reference)} values, group {spec.group.value!r} "
                        f"has {len(ids)} variables"
                    )
                terms = [AffineExpr.var(i) - ref for i, ref in zip(ids, spec.reference)]

        auxiliaries = []
        for i, term in enumerate(terms):
            low, high = index.expr_bounds(term)
            aux = index.add(
                f"objective.l1[{i}]", VariableKind.AUXILIARY, 0.0, max(abs(low), abs(high)), "objective"
            )
            deviation = AffineExpr.var(aux)
            constraints.append(LinearConstraint.le(term, deviation, "objective:l1"))
            constraints.append(LinearConstraint.le(-term, deviation, "objective:l1"))
            auxiliaries.append(deviation)
        return AffineExpr.total(auxiliaries)

    # -----------------------------
    # Solving
    # -----------------------------
    def solve(self, estimation: EstimationProblem) -> MilpSolution:
        settings = self.settings_for(estimation.scenario)
        solution = solve_milp(estimation.problem, settings)
        logger.info(
            "Solved %r (%s): status %s, objective %s",
            estimation.scenario.name,
            estimation.problem.sense.value,
            solution.status.value,
            solution.objective,
        )
        return solution

    def bound_objective(
        self, scenario: Scenario, objective: ObjectiveSpec | None = None
    ) -> ObjectiveBounds:
        """Minimum and maximum of one linear objective over the same constraint system."""
        spec = objective or ObjectiveSpec(kind=ObjectiveKind.INITIAL_VEHICLES)
        if spec.kind not in (ObjectiveKind.INITIAL_VEHICLES, ObjectiveKind.LINEAR):
            raise ConfigurationError(f"Cannot bound the {spec.kind.value!r} objective")
        estimation = self.assemble_problem(scenario, spec)
        problem = estimation.problem
        settings = self.settings_for(scenario)

        problems = [problem.with_objective(problem.objective, sense) for sense in (Sense.MIN, Sense.MAX)]
        with ThreadPoolExecutor(max_workers=2) as pool:
            minimum, maximum = pool.map(lambda p: solve_milp(p, settings), problems)

        for sense, solution in ((Sense.MIN, minimum), (Sense.MAX, maximum)):
            if solution.status is SolveStatus.INFEASIBLE:
                raise InfeasibleScenarioError(problem.family_histogram(), sense.value)
        logger.info("Objective bounds of %r: [%s, %s]", scenario.name, minimum.objective, maximum.objective)
        return ObjectiveBounds(minimum, maximum)

    # -----------------------------
    # Post-processing
    # -----------------------------
    def reconstruct_density_map(
        self,
        estimation: EstimationProblem,
        solution: MilpSolution,
        link_id: str,
        resolution: tuple[int, int] | None = None,
    ) -> DensityMap:
        """rho = -dM/dx on a (time x position) grid, by central differences."""
        if solution.values is None:
            raise ConfigurationError(f"No solution values to build a density map ({solution.status.value})")
        link = estimation.links[link_id]
        nt, nx = resolution or self._resolution(estimation.scenario)
        if nt < 2 or nx < 3:
            raise ConfigurationError(f"Density map needs at least 2 x 3 points, got {nt} x {nx}")
        geometry, flux = link.geometry, link.flux
        times = np.linspace(0.0, geometry.t_max, nt)
        positions = np.linspace(geometry.xi, geometry.chi, nx)
        d = solution.values

        def rows(chunk: np.ndarray) -> np.ndarray:
            return full_solution_values(link.conditions, flux, d, chunk[:, None], positions[None, :])

        chunks = np.array_split(times, max(1, int(np.ceil(nt / DENSITY_ROW_CHUNK))))
        with ThreadPoolExecutor() as pool:
            surface = np.vstack(list(pool.map(rows, chunks)))

        raw = -np.gradient(surface, positions, axis=1)
        rho = np.clip(raw, 0.0, flux.rho_m)
        excess = np.abs(raw - rho)
        clamped = int(np.count_nonzero(excess > CLAMP_TOL * flux.rho_m))
        magnitude = float(excess.max()) if excess.size else 0.0
        if clamped:
            logger.warning(
                "Density map of %s: %d of %d cells clamped (largest excess %.3g veh/m)",
                link_id,
                clamped,
                rho.size,
                magnitude,
            )
        return DensityMap(link_id, times, positions, rho, clamped, magnitude)

    def _resolution(self, scenario: Scenario) -> tuple[int, int]:
        if scenario.density_resolution is not None:
            return scenario.density_resolution
        size = self.settings_for(scenario).density_resolution
        return size, size

    def estimate_travel_time(
        self,
        estimation: EstimationProblem,
        solution: MilpSolution,
        t0: float,
        route: tuple[str, ...] | None = None,
    ) -> TravelTimeEstimate:
        """
        Follows the vehicle entering the first link of the route at t0. On
        every link the exit time is where the downstream count reaches the
        vehicle's label; the label on the next link is its entry count at
        that time.
        """
        if solution.values is None:
            raise ConfigurationError(f"No solution values to trace ({solution.status.value})")
        route = route or self._route(estimation.scenario)
        estimation.scenario.topology.route(route)
        horizon = estimation.scenario.horizon
        if not 0.0 <= t0 <= horizon:
            raise DataError(f"Entry time {t0} outside [0, {horizon}]")
        d = solution.values

        t_enter = t0
        for link_id in route:
            link = estimation.links[link_id]
            label = link.upstream_count(t_enter).evaluate(d)
            earliest = t_enter + link.geometry.length / link.flux.v
            t_exit = _discharge_time(link, d, label, earliest)
            if t_exit is None:
                logger.warning(
                    "Vehicle entering %s at t=%.3f is not discharged from %s within the horizon",
                    route[0],
                    t0,
                    link_id,
                )
                return TravelTimeEstimate(t0, None, route, censored=True)
            t_enter = t_exit
        return TravelTimeEstimate(t0, t_enter, route)

    @staticmethod
    def _route(scenario: Scenario) -> tuple[str, ...]:
        if scenario.travel_time_route:
            return scenario.travel_time_route
        if len(scenario.link_ids) == 1:
            return scenario.link_ids
        raise ConfigurationError("Scenario has several links and no travel_time_route")

    # -----------------------------
    # End to end
    # -----------------------------
    def estimate(self, scenario: Scenario, resolution: tuple[int, int] | None = None) -> EstimationResult:
        estimation = self.assemble_problem(scenario)
        solution = self.solve(estimation)
        if solution.status is SolveStatus.INFEASIBLE:
            raise InfeasibleScenarioError(estimation.problem.family_histogram(), estimation.problem.sense.value)
        if solution.values is None:
            return EstimationResult(estimation, solution)

        maps = {
            link_id: self.reconstruct_density_map(estimation, solution, link_id, resolution)
            for link_id in scenario.link_ids
        }
        travel = tuple(self.estimate_travel_time(estimation, solution, t0) for t0 in scenario.travel_time_entries)
        return EstimationResult(estimation, solution, maps, travel)


def _snapshot_conditions(scenario: Scenario, links: dict[str, LinkModel]):
    """Pairs each density snapshot with the internal density condition built for it."""
    seen: dict[str, int] = {}
    for snapshot in scenario.measurements.snapshots:
        position = seen.get(snapshot.link, 0)
        seen[snapshot.link] = position + 1
        yield snapshot, links[snapshot.link].densities[position]


def _discharge_time(link: LinkModel, d: np.ndarray, label: float, earliest: float) -> float | None:
    """Smallest t >= earliest with downstream count >= label, by bisection."""
    horizon = link.geometry.t_max
    if earliest > horizon:
        return None

    def reached(t: float) -> bool:
        return link.downstream_count(t).evaluate(d) >= label - 1e-9

    if reached(earliest):
        return earliest
    if not reached(horizon):
        return None
    lo, hi = earliest, horizon
    while hi - lo > TRAVEL_TIME_TOL:
        mid = 0.5 * (lo + hi)
        if reached(mid):
            hi = mid
        else:
            lo = mid
    return hi
