# src/domain/conditions.py

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import ClassVar, Sequence

from src.domain.affine import AffineExpr
from src.domain.exceptions import BranchConsistencyError, ConditionError
from src.domain.flux import FluxParams
from src.domain.geometry import LinkGeometry

logger = logging.getLogger(__name__)

# Relative tolerance for point-on-domain tests.
DOMAIN_TOL = 1e-9
# Probe speeds are kept this fraction of v away from both characteristic speeds.
SPEED_MARGIN = 1e-3


class ConditionKind(str, Enum):
    INITIAL = "initial"
    UPSTREAM = "upstream"
    DOWNSTREAM = "downstream"
    TRAJECTORY = "trajectory"
    DENSITY = "density"


@dataclass(frozen=True, kw_only=True)
class ValueCondition:
    """
    Affine value condition on a space-time segment.

    The segment runs from (t_start, x_start) to (t_end, x_end). Along it,
    at fraction lam in [0, 1], the condition prescribes the label
    start_value + lam * increment.
    """

    kind: ClassVar[ConditionKind]

    link: str
    index: int
    t_start: float
    x_start: float
    t_end: float
    x_end: float
    start_value: AffineExpr
    increment: AffineExpr
    tolerance: float = field(default=1e-9)

    @property
    def dt(self) -> float:
        return self.t_end - self.t_start

    @property
    def dx(self) -> float:
        return self.x_end - self.x_start

    @property
    def label(self) -> str:
        return f"{self.link}:{self.kind.value}[{self.index}]"

    @property
    def end_value(self) -> AffineExpr:
        return self.start_value + self.increment

    def point(self, lam: float) -> tuple[float, float]:
        return self.t_start + lam * self.dt, self.x_start + lam * self.dx

    def value_at(self, lam: float) -> AffineExpr:
        return self.start_value + self.increment.scale(lam)

    def locate(self, t: float, x: float) -> float | None:
        """Segment fraction of (t, x), or None when the point is off the domain."""
        tol = self.tolerance
        if abs(self.dt) > 0.0:
            lam = (t - self.t_start) / self.dt
            if abs(self.x_start + lam * self.dx - x) > tol:
                return None
        else:
            if abs(t - self.t_start) > tol:
                return None
            lam = (x - self.x_start) / self.dx
        span = tol / max(abs(self.dt), abs(self.dx))
        if lam < -span or lam > 1.0 + span:
            return None
        return min(max(lam, 0.0), 1.0)

    def variable_ids(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.start_value.variable_ids()) | set(self.increment.variable_ids())))


@dataclass(frozen=True, kw_only=True)
class InitialBlock(ValueCondition):
    kind: ClassVar[ConditionKind] = ConditionKind.INITIAL

    rho_ids: tuple[int, ...]


@dataclass(frozen=True, kw_only=True)
class UpstreamBlock(ValueCondition):
    kind: ClassVar[ConditionKind] = ConditionKind.UPSTREAM

    q_ids: tuple[int, ...]


@dataclass(frozen=True, kw_only=True)
class DownstreamBlock(ValueCondition):
    kind: ClassVar[ConditionKind] = ConditionKind.DOWNSTREAM

    q_ids: tuple[int, ...]
    rho_ids: tuple[int, ...]


@dataclass(frozen=True, kw_only=True)
class InternalTrajectory(ValueCondition):
    kind: ClassVar[ConditionKind] = ConditionKind.TRAJECTORY

    label_id: int
    rate_id: int
    trace: str = ""
    segment: int = 0

    @property
    def t_min(self) -> float:
        return self.t_start

    @property
    def t_max(self) -> float:
        return self.t_end

    @property
    def x_min(self) -> float:
        return self.x_start

    @property
    def x_max(self) -> float:
        return self.x_end

    @property
    def v_meas(self) -> float:
        return self.dx / self.dt

    @property
    def starts_trace(self) -> bool:
        return self.segment == 0


@dataclass(frozen=True, kw_only=True)
class InternalDensity(ValueCondition):
    kind: ClassVar[ConditionKind] = ConditionKind.DENSITY

    label_id: int
    density_id: int

    @property
    def t_rho(self) -> float:
        return self.t_start

    @property
    def x_min_rho(self) -> float:
        return self.x_start

    @property
    def x_max_rho(self) -> float:
        return self.x_end


# -----------------------------
# Internal condition inputs
# -----------------------------
@dataclass(frozen=True)
class TrajectorySegment:
    t_min: float
    x_min: float
    t_max: float
    x_max: float
    trace: str = ""
    segment: int = 0

    @property
    def v_meas(self) -> float:
        return (self.x_max - self.x_min) / (self.t_max - self.t_min)


@dataclass(frozen=True)
class DensitySpan:
    t_rho: float
    x_min: float
    x_max: float


def clamp_probe_speed(flux: FluxParams, segment: TrajectorySegment) -> TrajectorySegment:
    """Pull v_meas into [w + eps, v - eps] by moving the segment end point."""
    if segment.t_max <= segment.t_min:
        raise ConditionError(
            f"Trajectory segment needs t_max > t_min, got [{segment.t_min}, {segment.t_max}]"
        )
    eps = SPEED_MARGIN * flux.v
    speed = segment.v_meas
    clamped = min(max(speed, flux.w + eps), flux.v - eps)
    if clamped == speed:
        return segment
    logger.warning(
        "Probe speed %.4f m/s of trace %r segment %d clamped to %.4f m/s",
        speed,
        segment.trace,
        segment.segment,
        clamped,
    )
    return replace(
        segment,
        x_max=segment.x_min + clamped * (segment.t_max - segment.t_min),
    )


# -----------------------------
# Factories
# -----------------------------
def _tolerance(geometry: LinkGeometry) -> float:
    return DOMAIN_TOL * geometry.scale


def initial_block(
    geometry: LinkGeometry, k: int, rho_ids: Sequence[int], link: str = ""
) -> InitialBlock:
    """Label -sum_{i<k} rho_ini(i) X - rho_ini(k) (x - x_k) on [x_k, x_{k+1}] at t = 0."""
    if not 0 <= k <= geometry.k_max:
        raise ConditionError(f"Initial block {k} outside [0, {geometry.k_max}]")
    X = geometry.X
    return InitialBlock(
        link=link,
        index=k,
        t_start=0.0,
        x_start=geometry.x_edge(k),
        t_end=0.0,
        x_end=geometry.x_edge(k + 1),
        start_value=AffineExpr.build(0.0, ((rho_ids[i], -X) for i in range(k))),
        increment=AffineExpr.var(rho_ids[k], -X),
        tolerance=_tolerance(geometry),
        rho_ids=tuple(rho_ids[: k + 1]),
    )


def upstream_block(
    geometry: LinkGeometry, n: int, q_in_ids: Sequence[int], link: str = ""
) -> UpstreamBlock:
    """Label sum_{i<n} q_in(i) T + q_in(n) (t - nT) at x = xi."""
    if not 0 <= n <= geometry.n_max:
        raise ConditionError(f"Upstream block {n} outside [0, {geometry.n_max}]")
    T = geometry.T
    return UpstreamBlock(
        link=link,
        index=n,
        t_start=geometry.t_edge(n),
        x_start=geometry.xi,
        t_end=geometry.t_edge(n + 1),
        x_end=geometry.xi,
        start_value=AffineExpr.build(0.0, ((q_in_ids[i], T) for i in range(n))),
        increment=AffineExpr.var(q_in_ids[n], T),
        tolerance=_tolerance(geometry),
        q_ids=tuple(q_in_ids[: n + 1]),
    )


def downstream_block(
    geometry: LinkGeometry,
    n: int,
    q_out_ids: Sequence[int],
    rho_ids: Sequence[int],
    link: str = "",
) -> DownstreamBlock:
    """Label sum_{i<n} q_out(i) T + q_out(n) (t - nT) - sum_k rho_ini(k) X at x = chi."""
    if not 0 <= n <= geometry.n_max:
        raise ConditionError(f"Downstream block {n} outside [0, {geometry.n_max}]")
    T, X = geometry.T, geometry.X
    terms = [(q_out_ids[i], T) for i in range(n)]
    terms.extend((rho_id, -X) for rho_id in rho_ids)
    return DownstreamBlock(
        link=link,
        index=n,
        t_start=geometry.t_edge(n),
        x_start=geometry.chi,
        t_end=geometry.t_edge(n + 1),
        x_end=geometry.chi,
        start_value=AffineExpr.build(0.0, terms),
        increment=AffineExpr.var(q_out_ids[n], T),
        tolerance=_tolerance(geometry),
        q_ids=tuple(q_out_ids[: n + 1]),
        rho_ids=tuple(rho_ids),
    )


def internal_trajectory(
    flux: FluxParams,
    geometry: LinkGeometry,
    m: int,
    segment: TrajectorySegment,
    label_id: int,
    rate_id: int,
    link: str = "",
) -> InternalTrajectory:
    """Label L(m) + r(m) (t - t_min) along the measured segment."""
    tol = _tolerance(geometry)
    if segment.t_max <= segment.t_min:
        raise ConditionError(
            f"Trajectory {m} needs t_max > t_min, got [{segment.t_min}, {segment.t_max}]"
        )
    if segment.t_min < -tol or segment.t_max > geometry.t_max + tol:
        raise ConditionError(f"Trajectory {m} leaves the horizon [0, {geometry.t_max}]")
    for x in (segment.x_min, segment.x_max):
        if x < geometry.xi - tol or x > geometry.chi + tol:
            raise ConditionError(
                f"Trajectory {m} leaves the link [{geometry.xi}, {geometry.chi}]"
            )
    if not flux.w < segment.v_meas < flux.v:
        raise ConditionError(
            f"Trajectory {m} speed {segment.v_meas} must lie strictly between "
            f"w={flux.w} and v={flux.v}"
        )
    return InternalTrajectory(
        link=link,
        index=m,
        t_start=segment.t_min,
        x_start=segment.x_min,
        t_end=segment.t_max,
        x_end=segment.x_max,
        start_value=AffineExpr.var(label_id),
        increment=AffineExpr.var(rate_id, segment.t_max - segment.t_min),
        tolerance=tol,
        label_id=label_id,
        rate_id=rate_id,
        trace=segment.trace,
        segment=segment.segment,
    )


def internal_density(
    geometry: LinkGeometry,
    u: int,
    span: DensitySpan,
    label_id: int,
    density_id: int,
    link: str = "",
) -> InternalDensity:
    """Label L(u) - rho(u) (x - x_min) on [x_min, x_max] at t = t_rho."""
    tol = _tolerance(geometry)
    if not span.x_min < span.x_max:
        raise ConditionError(
            f"Density condition {u} needs x_min < x_max, got [{span.x_min}, {span.x_max}]"
        )
    if span.t_rho < -tol or span.t_rho > geometry.t_max + tol:
        raise ConditionError(f"Density condition {u} time {span.t_rho} outside the horizon")
    if span.x_min < geometry.xi - tol or span.x_max > geometry.chi + tol:
        raise ConditionError(f"Density condition {u} leaves the link")
    return InternalDensity(
        link=link,
        index=u,
        t_start=span.t_rho,
        x_start=span.x_min,
        t_end=span.t_rho,
        x_end=span.x_max,
        start_value=AffineExpr.var(label_id),
        increment=AffineExpr.var(density_id, -(span.x_max - span.x_min)),
        tolerance=tol,
        label_id=label_id,
        density_id=density_id,
    )


def check_block_continuity(blocks: Sequence[ValueCondition], digits: int = 9) -> None:
    """Consecutive blocks of one family must agree where they meet."""
    for previous, current in zip(blocks, blocks[1:]):
        gap = previous.end_value - current.start_value
        if gap.key(digits) != AffineExpr().key(digits):
            raise BranchConsistencyError(
                f"{previous.label} ends at {previous.end_value} but "
                f"{current.label} starts at {current.start_value}"
            )
