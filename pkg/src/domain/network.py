# src/domain/network.py

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from src.domain.affine import AffineExpr
from src.domain.conditions import (
    DensitySpan,
    DownstreamBlock,
    InitialBlock,
    InternalDensity,
    InternalTrajectory,
    TrajectorySegment,
    UpstreamBlock,
    ValueCondition,
    check_block_continuity,
    downstream_block,
    initial_block,
    internal_density,
    internal_trajectory,
    upstream_block,
)
from src.domain.decision import DecisionIndex, VariableKind, variable_name
from src.domain.exceptions import TopologyError
from src.domain.flux import FluxParams
from src.domain.geometry import LinkGeometry

logger = logging.getLogger(__name__)

# Column sums of an allocation matrix must be 1 within this tolerance.
ALLOCATION_TOL = 1e-12


@dataclass(frozen=True)
class LinkDefinition:
    link_id: str
    geometry: LinkGeometry
    flux: FluxParams


@dataclass(frozen=True)
class Ramp:
    ramp_id: str
    capacity: float | None = None
    flow_range: tuple[float, float] | None = None


@dataclass(frozen=True)
class Junction:
    """
    Junction without storage. Allocation rows follow exits
    (outgoing links, then off-ramps); columns follow entries
    (incoming links, then on-ramps).
    """

    junction_id: str
    incoming: tuple[str, ...]
    outgoing: tuple[str, ...]
    on_ramps: tuple[str, ...] = ()
    off_ramps: tuple[str, ...] = ()
    allocation: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self) -> None:
        entries, exits = self.entries, self.exits
        if not entries or not exits:
            raise TopologyError(f"Junction {self.junction_id!r} needs entries and exits")
        if len(self.allocation) != len(exits) or any(
            len(row) != len(entries) for row in self.allocation
        ):
            raise TopologyError(
                f"Junction {self.junction_id!r}: allocation must be "
                f"{len(exits)}x{len(entries)} (exits x entries)"
            )
        for row in self.allocation:
            for entry in row:
                if not 0.0 <= entry <= 1.0:
                    raise TopologyError(
                        f"Junction {self.junction_id!r}: allocation entry {entry} outside [0, 1]"
                    )
        for column, entry_id in enumerate(entries):
            total = sum(row[column] for row in self.allocation)
            if abs(total - 1.0) > ALLOCATION_TOL:
                raise TopologyError(
                    f"Junction {self.junction_id!r}: allocation column {entry_id!r} "
                    f"sums to {total}, expected 1"
                )

    @property
    def entries(self) -> tuple[str, ...]:
        return self.incoming + self.on_ramps

    @property
    def exits(self) -> tuple[str, ...]:
        return self.outgoing + self.off_ramps

    @property
    def is_plain(self) -> bool:
        """One link in, one link out, no ramps."""
        return (
            len(self.incoming) == 1
            and len(self.outgoing) == 1
            and not self.on_ramps
            and not self.off_ramps
        )


@dataclass(frozen=True)
class NetworkTopology:
    links: tuple[LinkDefinition, ...]
    junctions: tuple[Junction, ...] = ()
    ramps: tuple[Ramp, ...] = ()

    def __post_init__(self) -> None:
        ids = [link.link_id for link in self.links]
        if not ids:
            raise TopologyError("A network needs at least one link")
        if len(set(ids)) != len(ids):
            raise TopologyError(f"Duplicate link ids in {ids}")
        ramp_ids = {ramp.ramp_id for ramp in self.ramps}

        grids = {(link.geometry.t_max, link.geometry.n_max) for link in self.links}
        if len(grids) != 1:
            raise TopologyError(f"Links must share one time grid, got {sorted(grids)}")

        fed: set[str] = set()
        drained: set[str] = set()
        for junction in self.junctions:
            for port in junction.incoming + junction.outgoing:
                if port not in ids:
                    raise TopologyError(
                        f"Junction {junction.junction_id!r} references unknown link {port!r}"
                    )
            for port in junction.on_ramps + junction.off_ramps:
                if port not in ramp_ids:
                    raise TopologyError(
                        f"Junction {junction.junction_id!r} references unknown ramp {port!r}"
                    )
            for link_id in junction.incoming:
                if link_id in drained:
                    raise TopologyError(f"Link {link_id!r} ends at two junctions")
                drained.add(link_id)
            for link_id in junction.outgoing:
                if link_id in fed:
                    raise TopologyError(f"Link {link_id!r} starts at two junctions")
                fed.add(link_id)

    def link(self, link_id: str) -> LinkDefinition:
        for link in self.links:
            if link.link_id == link_id:
                return link
        raise TopologyError(f"Unknown link {link_id!r}")

    def ramp(self, ramp_id: str) -> Ramp:
        for ramp in self.ramps:
            if ramp.ramp_id == ramp_id:
                return ramp
        raise TopologyError(f"Unknown ramp {ramp_id!r}")

    def junction_after(self, link_id: str) -> Junction | None:
        for junction in self.junctions:
            if link_id in junction.incoming:
                return junction
        return None

    def route(self, links: Sequence[str]) -> tuple[Junction, ...]:
        """Junctions crossed by consecutive links of a route."""
        crossed = []
        for current, following in zip(links, links[1:]):
            junction = self.junction_after(current)
            if junction is None or following not in junction.outgoing:
                raise TopologyError(f"No junction leads from {current!r} to {following!r}")
            crossed.append(junction)
        for link_id in links:
            self.link(link_id)
        return tuple(crossed)

    def plain_chain(self, from_link: str, to_link: str) -> tuple[str, ...]:
        """Links from from_link to to_link through ramp-free 1-in/1-out junctions."""
        chain = [from_link]
        self.link(from_link)
        while chain[-1] != to_link:
            junction = self.junction_after(chain[-1])
            if junction is None:
                raise TopologyError(f"Link {to_link!r} is not downstream of {from_link!r}")
            if not junction.is_plain:
                raise TopologyError(
                    f"Junction {junction.junction_id!r} between {from_link!r} and "
                    f"{to_link!r} has ramps or several branches"
                )
            chain.append(junction.outgoing[0])
            if len(chain) > len(self.links):
                raise TopologyError(f"Cycle found while following {from_link!r}")
        return tuple(chain)


# -----------------------------
# Link model
# -----------------------------
@dataclass(frozen=True)
class LinkModel:
    """Value conditions of one link plus the ids of its decision variables."""

    link_id: str
    geometry: LinkGeometry
    flux: FluxParams
    rho_ids: tuple[int, ...]
    q_in_ids: tuple[int, ...]
    q_out_ids: tuple[int, ...]
    initial: tuple[InitialBlock, ...]
    upstream: tuple[UpstreamBlock, ...]
    downstream: tuple[DownstreamBlock, ...]
    trajectories: tuple[InternalTrajectory, ...] = ()
    densities: tuple[InternalDensity, ...] = ()
    chains: tuple[tuple[InternalTrajectory, InternalTrajectory], ...] = field(default=())

    @classmethod
    def build(
        cls,
        definition: LinkDefinition,
        index: DecisionIndex,
        segments: Iterable[TrajectorySegment] = (),
        spans: Iterable[DensitySpan] = (),
    ) -> LinkModel:
        link, geometry, flux = definition.link_id, definition.geometry, definition.flux
        label_range = (-flux.rho_m * geometry.length, flux.q_max * geometry.t_max)

        rho_ids = tuple(
            index.add(variable_name(link, VariableKind.RHO_INI, k), VariableKind.RHO_INI, 0.0, flux.rho_m, link)
            for k in range(geometry.space_blocks)
        )
        q_in_ids = tuple(
            index.add(variable_name(link, VariableKind.Q_IN, n), VariableKind.Q_IN, 0.0, flux.q_max, link)
            for n in range(geometry.time_blocks)
        )
        q_out_ids = tuple(
            index.add(variable_name(link, VariableKind.Q_OUT, n), VariableKind.Q_OUT, 0.0, flux.q_max, link)
            for n in range(geometry.time_blocks)
        )

        initial = tuple(initial_block(geometry, k, rho_ids, link) for k in range(geometry.space_blocks))
        upstream = tuple(upstream_block(geometry, n, q_in_ids, link) for n in range(geometry.time_blocks))
        downstream = tuple(
            downstream_block(geometry, n, q_out_ids, rho_ids, link) for n in range(geometry.time_blocks)
        )
        for family in (initial, upstream, downstream):
            check_block_continuity(family)

        trajectories = []
        for m, segment in enumerate(segments):
            label_id = index.add(
                variable_name(link, VariableKind.TRAJECTORY_LABEL, m),
                VariableKind.TRAJECTORY_LABEL,
                *label_range,
                link,
            )
            speed = segment.v_meas
            rate_id = index.add(
                variable_name(link, VariableKind.TRAJECTORY_RATE, m),
                VariableKind.TRAJECTORY_RATE,
                min(0.0, -speed * flux.rho_m),
                flux.rho_c * (flux.v - speed),
                link,
            )
            trajectories.append(
                internal_trajectory(flux, geometry, m, segment, label_id, rate_id, link)
            )

        densities = []
        for u, span in enumerate(spans):
            label_id = index.add(
                variable_name(link, VariableKind.DENSITY_LABEL, u),
                VariableKind.DENSITY_LABEL,
                *label_range,
                link,
            )
            density_id = index.add(
                variable_name(link, VariableKind.DENSITY_VALUE, u),
                VariableKind.DENSITY_VALUE,
                0.0,
                flux.rho_m,
                link,
            )
            densities.append(internal_density(geometry, u, span, label_id, density_id, link))

        chains = tuple(
            (previous, current)
            for previous, current in zip(trajectories, trajectories[1:])
            if current.trace == previous.trace and current.segment == previous.segment + 1
        )
        logger.debug(
            "Link %s: %d initial, %d upstream, %d downstream, %d trajectory, %d density conditions",
            link,
            len(initial),
            len(upstream),
            len(downstream),
            len(trajectories),
            len(densities),
        )
        return cls(
            link_id=link,
            geometry=geometry,
            flux=flux,
            rho_ids=rho_ids,
            q_in_ids=q_in_ids,
            q_out_ids=q_out_ids,
            initial=initial,
            upstream=upstream,
            downstream=downstream,
            trajectories=tuple(trajectories),
            densities=tuple(densities),
            chains=chains,
        )

    @property
    def conditions(self) -> tuple[ValueCondition, ...]:
        return self.initial + self.upstream + self.downstream + self.trajectories + self.densities

    def initial_vehicles(self) -> AffineExpr:
        return AffineExpr.build(0.0, ((rho_id, self.geometry.X) for rho_id in self.rho_ids))

    def upstream_count(self, t: float) -> AffineExpr:
        """Label of the vehicle crossing xi at time t."""
        block = self.upstream[self.geometry.time_block_of(t)]
        return block.value_at((t - block.t_start) / block.dt)

    def downstream_count(self, t: float) -> AffineExpr:
        """Label of the vehicle crossing chi at time t."""
        block = self.downstream[self.geometry.time_block_of(t)]
        return block.value_at((t - block.t_start) / block.dt)

    def initial_count(self, x: float) -> AffineExpr:
        block = self.initial[self.geometry.space_block_of(x)]
        return block.value_at((x - block.x_start) / block.dx)

    def free_flow_count(self, t: float) -> AffineExpr:
        """
        Label reaching chi at time t along the free-flow characteristic,
        read from the upstream boundary or, early on, from the initial state.
        """
        geometry = self.geometry
        departure = t - geometry.length / self.flux.v
        if departure >= 0.0:
            return self.upstream_count(departure)
        return self.initial_count(geometry.chi - self.flux.v * t)

    def congested_count(self, t: float) -> AffineExpr:
        """
        Label reaching xi at time t along the congested characteristic
        from the downstream boundary or the initial state, jam term included.
        """
        geometry, flux = self.geometry, self.flux
        departure = t + geometry.length / flux.w
        if departure >= 0.0:
            return self.downstream_count(departure) + flux.rho_m * geometry.length
        origin = geometry.xi - flux.w * t
        return self.initial_count(origin) + flux.rho_m * (origin - geometry.xi)
