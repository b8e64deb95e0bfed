# src/application/junctions.py

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping

from src.domain.affine import AffineExpr
from src.domain.decision import DecisionIndex, VariableKind, variable_name
from src.domain.exceptions import ConfigurationError, TopologyError
from src.domain.network import Junction, LinkModel, NetworkTopology
from src.domain.problem import LinearConstraint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RampModel:
    ramp_id: str
    flow_ids: tuple[int, ...]
    capacity: float
    on_ramp: bool


@dataclass(frozen=True)
class JunctionModel:
    """A junction bound to the link models and ramp variables around it."""

    junction: Junction
    links: Mapping[str, LinkModel]
    ramps: Mapping[str, RampModel]

    @property
    def junction_id(self) -> str:
        return self.junction.junction_id

    def entry_flows(self, n: int) -> list[AffineExpr]:
        flows = [AffineExpr.var(self.links[link].q_out_ids[n]) for link in self.junction.incoming]
        flows += [AffineExpr.var(self.ramps[ramp].flow_ids[n]) for ramp in self.junction.on_ramps]
        return flows

    def exit_flows(self, n: int) -> list[AffineExpr]:
        flows = [AffineExpr.var(self.links[link].q_in_ids[n]) for link in self.junction.outgoing]
        flows += [AffineExpr.var(self.ramps[ramp].flow_ids[n]) for ramp in self.junction.off_ramps]
        return flows


def build_junction_models(
    topology: NetworkTopology,
    links: Mapping[str, LinkModel],
    index: DecisionIndex,
) -> list[JunctionModel]:
    """Registers ramp flow variables and binds every junction to its ports."""
    models = []
    for junction in topology.junctions:
        adjacent = [links[link_id] for link_id in junction.incoming + junction.outgoing]
        default_capacity = max(link.flux.q_max for link in adjacent)
        blocks = adjacent[0].geometry.time_blocks
        ramps = {}
        for ramp_id, on_ramp in [(r, True) for r in junction.on_ramps] + [
            (r, False) for r in junction.off_ramps
        ]:
            ramp = topology.ramp(ramp_id)
            capacity = ramp.capacity if ramp.capacity is not None else default_capacity
            kind = VariableKind.RAMP_IN if on_ramp else VariableKind.RAMP_OUT
            flow_ids = tuple(
                index.add(variable_name(ramp_id, kind, n), kind, 0.0, capacity, ramp_id)
                for n in range(blocks)
            )
            ramps[ramp_id] = RampModel(ramp_id, flow_ids, capacity, on_ramp)
        models.append(JunctionModel(junction, {link.link_id: link for link in adjacent}, ramps))
    return models


# -----------------------------
# Conservation and allocation
# -----------------------------
def gen_conservation_constraints(model: JunctionModel, n: int) -> list[LinearConstraint]:
    entering = AffineExpr.total(model.entry_flows(n))
    leaving = AffineExpr.total(model.exit_flows(n))
    return [LinearConstraint.eq(entering, leaving, "junction:conservation")]


def gen_allocation_constraints(model: JunctionModel, n: int) -> list[LinearConstraint]:
    allocation = model.junction.allocation
    for column in range(len(model.junction.entries)):
        total = sum(row[column] for row in allocation)
        if abs(total - 1.0) > 1e-12:
            raise TopologyError(
                f"Junction {model.junction_id!r}: allocation column {column} sums to {total}"
            )
    entries = model.entry_flows(n)
    constraints = []
    for exit_flow, row in zip(model.exit_flows(n), allocation):
        allocated = AffineExpr.total(share * entry for share, entry in zip(row, entries))
        constraints.append(LinearConstraint.eq(exit_flow, allocated, "junction:allocation"))
    return constraints


# -----------------------------
# Demand and supply
# -----------------------------
def link_demand(link: LinkModel, n: int) -> AffineExpr:
    """Vehicles ready to leave over block n, as a rate: free-flow arrivals minus departures."""
    geometry = link.geometry
    arrived = link.free_flow_count(geometry.t_edge(n + 1))
    departed = link.downstream_count(geometry.t_edge(n))
    return (arrived - departed) / geometry.T


def link_supply(link: LinkModel, n: int) -> AffineExpr:
    """Room available at the entrance over block n, as a rate."""
    geometry = link.geometry
    room = link.congested_count(geometry.t_edge(n + 1))
    entered = link.upstream_count(geometry.t_edge(n))
    return (room - entered) / geometry.T


def _min_with_capacity(
    bound_id: int,
    rate: AffineExpr,
    capacity: float,
    index: DecisionIndex,
    big_m: float | None,
    name: str,
    owner: str,
    family: str,
) -> tuple[list[LinearConstraint], int]:
    """bound = min(rate, capacity) with one selector binary."""
    low, high = index.expr_bounds(rate)
    needed = max(high - capacity, capacity - max(low, 0.0), 0.0)
    if big_m is not None and big_m < needed:
        raise ConfigurationError(f"big_m={big_m} is below the range {needed:.6g} of {name}")
    row_m = needed if big_m is None else big_m

    selector = index.add_binary(name, owner=owner)
    bound = AffineExpr.var(bound_id)
    b = AffineExpr.var(selector)
    constraints = [
        LinearConstraint.le(bound, rate, family),
        LinearConstraint.le(bound, capacity, family),
        LinearConstraint.ge(bound, rate - row_m * b, family),
        LinearConstraint.ge(bound, capacity - row_m + row_m * b, family),
    ]
    return constraints, selector


def gen_demand_supply_constraints(
    model: JunctionModel,
    n: int,
    index: DecisionIndex,
    big_m: float | None = None,
) -> tuple[list[LinearConstraint], list[int]]:
    constraints: list[LinearConstraint] = []
    binaries: list[int] = []

    for link_id in model.junction.incoming:
        link = model.links[link_id]
        demand_id = index.add(
            variable_name(link_id, VariableKind.DEMAND, n), VariableKind.DEMAND, 0.0, link.flux.q_max, link_id
        )
        rows, selector = _min_with_capacity(
            demand_id,
            link_demand(link, n),
            link.flux.q_max,
            index,
            big_m,
            f"{link_id}.demand_select[{n}]",
            link_id,
            "junction:demand",
        )
        rows.append(LinearConstraint.le(AffineExpr.var(link.q_out_ids[n]), AffineExpr.var(demand_id), "junction:demand"))
        constraints.extend(rows)
        binaries.append(selector)

    for link_id in model.junction.outgoing:
        link = model.links[link_id]
        supply_id = index.add(
            variable_name(link_id, VariableKind.SUPPLY, n), VariableKind.SUPPLY, 0.0, link.flux.q_max, link_id
        )
        rows, selector = _min_with_capacity(
            supply_id,
            link_supply(link, n),
            link.flux.q_max,
            index,
            big_m,
            f"{link_id}.supply_select[{n}]",
            link_id,
            "junction:supply",
        )
        rows.append(LinearConstraint.le(AffineExpr.var(link.q_in_ids[n]), AffineExpr.var(supply_id), "junction:supply"))
        constraints.extend(rows)
        binaries.append(selector)

    for ramp in model.ramps.values():
        family = "junction:demand" if ramp.on_ramp else "junction:supply"
        constraints.append(LinearConstraint.le(AffineExpr.var(ramp.flow_ids[n]), ramp.capacity, family))

    return constraints, binaries


def _port_bounds(model: JunctionModel, n: int, index: DecisionIndex) -> list[tuple[str, AffineExpr, AffineExpr, float]]:
    """(port, flow, bound, range of bound - flow) for every port."""
    ports = []
    for link_id in model.junction.incoming:
        link = model.links[link_id]
        bound = index.expr(variable_name(link_id, VariableKind.DEMAND, n))
        ports.append((link_id, AffineExpr.var(link.q_out_ids[n]), bound, link.flux.q_max))
    for link_id in model.junction.outgoing:
        link = model.links[link_id]
        bound = index.expr(variable_name(link_id, VariableKind.SUPPLY, n))
        ports.append((link_id, AffineExpr.var(link.q_in_ids[n]), bound, link.flux.q_max))
    for ramp_id in model.junction.on_ramps + model.junction.off_ramps:
        ramp = model.ramps[ramp_id]
        ports.append((ramp_id, AffineExpr.var(ramp.flow_ids[n]), AffineExpr.const(ramp.capacity), ramp.capacity))
    return ports


def gen_flow_maximization_constraints(
    model: JunctionModel,
    n: int,
    index: DecisionIndex,
    big_m: float | None = None,
) -> tuple[list[LinearConstraint], list[int]]:
    """At least one port flow reaches its demand or supply bound."""
    constraints: list[LinearConstraint] = []
    selectors: list[int] = []
    for port, flow, bound, needed in _port_bounds(model, n, index):
        if big_m is not None and big_m < needed:
            raise ConfigurationError(f"big_m={big_m} is below the range {needed:.6g} of port {port!r}")
        row_m = needed if big_m is None else big_m
        selector = index.add_binary(f"{model.junction_id}.{port}.active[{n}]", owner=model.junction_id)
        selectors.append(selector)
        constraints.append(
            LinearConstraint.ge(flow, bound - row_m + AffineExpr.var(selector, row_m), "junction:activation")
        )
    constraints.append(
        LinearConstraint.ge(AffineExpr.total(AffineExpr.var(s) for s in selectors), 1.0, "junction:activation")
    )
    return constraints, selectors


def gen_ramp_data_constraints(topology: NetworkTopology, models: list[JunctionModel]) -> list[LinearConstraint]:
    """Synthetic flow ranges attached to ramps without sensors."""
    constraints = []
    for model in models:
        for ramp_id, ramp in model.ramps.items():
            flow_range = topology.ramp(ramp_id).flow_range
            if flow_range is None:
                continue
            low, high = flow_range
            for flow_id in ramp.flow_ids:
                constraints.append(LinearConstraint.ge(AffineExpr.var(flow_id), low, "data:ramp"))
                constraints.append(LinearConstraint.le(AffineExpr.var(flow_id), high, "data:ramp"))
    return constraints


def gen_junction_constraints(
    models: list[JunctionModel],
    index: DecisionIndex,
    big_m: float | None = None,
) -> tuple[list[LinearConstraint], list[int]]:
    """All junction families, junction-major and block-minor."""
    constraints: list[LinearConstraint] = []
    binaries: list[int] = []
    for model in models:
        blocks = next(iter(model.links.values())).geometry.time_blocks
        for n in range(blocks):
            constraints.extend(gen_conservation_constraints(model, n))
            constraints.extend(gen_allocation_constraints(model, n))
            rows, new = gen_demand_supply_constraints(model, n, index, big_m)
            constraints.extend(rows)
            binaries.extend(new)
            rows, new = gen_flow_maximization_constraints(model, n, index, big_m)
            constraints.extend(rows)
            binaries.extend(new)
        logger.debug("Junction %s: %d blocks encoded", model.junction_id, blocks)
    return constraints, binaries
