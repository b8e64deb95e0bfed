# src/application/constraints.py

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from src.domain.affine import AffineExpr
from src.domain.conditions import (
    ConditionKind,
    InternalDensity,
    InternalTrajectory,
    ValueCondition,
)
from src.domain.decision import DecisionIndex
from src.domain.exceptions import ConfigurationError, DataError
from src.domain.flux import FluxParams
from src.domain.laxhopf import eval_partial_solution
from src.domain.network import LinkModel
from src.domain.problem import AnchorPoint, LinearConstraint

logger = logging.getLogger(__name__)

# Rows whose constant-only expression is below this are tautologies.
TAUTOLOGY_TOL = 1e-9
# Anchors closer than this (in target fraction) are merged.
ANCHOR_MERGE_TOL = 1e-12

_KIND_ORDER = tuple(ConditionKind)


_I, _U, _D, _T, _R = (
    ConditionKind.INITIAL,
    ConditionKind.UPSTREAM,
    ConditionKind.DOWNSTREAM,
    ConditionKind.TRAJECTORY,
    ConditionKind.DENSITY,
)

# (source, target) -> family numeral; density->upstream shares (xviii) with
# density->downstream and is told apart by its letters.
MODEL_FAMILIES: dict[tuple[ConditionKind, ConditionKind], str] = {
    (_I, _I): "i",
    (_I, _D): "ii",
    (_I, _U): "iii",
    (_I, _T): "iv",
    (_I, _R): "v",
    (_U, _U): "vi",
    (_U, _D): "vii",
    (_U, _T): "viii",
    (_U, _R): "ix",
    (_D, _U): "x",
    (_D, _D): "xi",
    (_D, _T): "xii",
    (_D, _R): "xiii",
    (_T, _U): "xiv",
    (_T, _D): "xv",
    (_T, _T): "xvi",
    (_T, _R): "xvii",
    (_R, _D): "xviii",
    (_R, _U): "xviii",
    (_R, _T): "xix",
    (_R, _R): "xx",
}

_BOUNDARY_LETTERS = {
    "target-start": "a",
    "target-end": "a",
    "free-flow-from-source-start": "b",
    "congested-from-source-start": "b",
    "free-flow-from-source-end": "c",
    "congested-from-source-end": "c",
    "source-crossing": "d",
}
_INTERNAL_LETTERS = {
    "target-start": "a",
    "target-end": "b",
    "free-flow-from-source-start": "c",
    "congested-from-source-start": "d",
    "free-flow-from-source-end": "e",
    "congested-from-source-end": "f",
    "source-crossing": "g",
}


def model_family(source: ValueCondition, target: ValueCondition, origin: str = "target-start") -> str:
    """
    Family tag of a model row: the numeral of the (source, target) pair
    and a letter for the anchor that produced it.
    """
    numeral = MODEL_FAMILIES.get((source.kind, target.kind))
    if numeral is None:
        return f"model:{source.kind.value}->{target.kind.value}"
    if target.kind in (_T, _R):
        letter = _INTERNAL_LETTERS[origin]
    elif (source.kind, target.kind) == (_R, _D):
        letter = "a" if origin in ("target-start", "target-end") else "b"
    elif (source.kind, target.kind) == (_R, _U):
        letter = "c" if origin in ("target-start", "target-end") else "d"
    else:
        letter = _BOUNDARY_LETTERS[origin]
    return f"model:({numeral}){letter}"


def family_group(family: str) -> str:
    """'model:(xi)b' -> 'model:(xi)'; other families are their own group."""
    head, sep, _ = family.partition(")")
    return head + sep if family.startswith("model:(") else family


def _ordered_pairs(conditions: Sequence[ValueCondition]):
    """(source, target) index pairs, family-major then index-minor."""
    by_kind: dict[ConditionKind, list[int]] = {kind: [] for kind in _KIND_ORDER}
    for i, cond in enumerate(conditions):
        by_kind[cond.kind].append(i)
    for source_kind in _KIND_ORDER:
        for target_kind in _KIND_ORDER:
            for j in by_kind[source_kind]:
                for i in by_kind[target_kind]:
                    yield j, i


# -----------------------------
# Anchor points
# -----------------------------
def _line_crossing(
    target: ValueCondition, t0: float, x0: float, dt: float, dx: float
) -> tuple[float, float] | None:
    """
    Fractions (mu on the target, s on the line) where the target segment
    meets the line (t0, x0) + s (dt, dx).
    """
    det = target.dx * dt - target.dt * dx
    if abs(det) <= 1e-14 * (abs(target.dx) + abs(target.dt)) * (abs(dx) + abs(dt)):
        return None
    rt = t0 - target.t_start
    rx = x0 - target.x_start
    mu = (rx * dt - rt * dx) / det
    s = (rx * target.dt - rt * target.dx) / det
    return mu, s


def anchor_points_for_pair(
    source: ValueCondition,
    target: ValueCondition,
    flux: FluxParams,
    source_index: int = 0,
    target_index: int = 0,
) -> list[AnchorPoint]:
    """
    Points on the target segment between which the source partial solution
    is affine: the target end points, the crossings with the v and w
    characteristics leaving both source end points, and the crossing with
    the source segment itself.
    """
    span = max(abs(target.dt), abs(target.dx))
    slack = target.tolerance / span
    found: list[tuple[float, str]] = [(0.0, "target-start"), (1.0, "target-end")]

    for end, (t_src, x_src) in (("start", source.point(0.0)), ("end", source.point(1.0))):
        for speed, name in ((flux.v, "free-flow"), (flux.w, "congested")):
            crossing = _line_crossing(target, t_src, x_src, 1.0, speed)
            if crossing is None:
                continue
            mu, s = crossing
            if s < -source.tolerance or not -slack <= mu <= 1.0 + slack:
                continue
            found.append((min(max(mu, 0.0), 1.0), f"{name}-from-source-{end}"))

    if source is not target:
        crossing = _line_crossing(target, source.t_start, source.x_start, source.dt, source.dx)
        if crossing is not None:
            mu, s = crossing
            source_slack = source.tolerance / max(abs(source.dt), abs(source.dx))
            if -slack <= mu <= 1.0 + slack and -source_slack <= s <= 1.0 + source_slack:
                found.append((min(max(mu, 0.0), 1.0), "source-crossing"))

    found.sort(key=lambda item: item[0])
    anchors: list[AnchorPoint] = []
    last_mu = -math.inf
    for mu, origin in found:
        if mu - last_mu <= ANCHOR_MERGE_TOL:
            continue
        t, x = target.point(mu)
        anchors.append(
            AnchorPoint(
                t=t,
                x=x,
                source=source_index,
                target=target_index,
                family=model_family(source, target, origin),
                origin=origin,
            )
        )
        last_mu = mu
    return anchors


def _unreachable(source: ValueCondition, target: ValueCondition) -> bool:
    # Partial solutions are infinite strictly before the source segment starts.
    return max(target.t_start, target.t_end) < min(source.t_start, source.t_end) - source.tolerance


def gen_anchor_points(conditions: Sequence[ValueCondition], flux: FluxParams) -> list[AnchorPoint]:
    anchors: list[AnchorPoint] = []
    for j, i in _ordered_pairs(conditions):
        if _unreachable(conditions[j], conditions[i]):
            continue
        anchors.extend(anchor_points_for_pair(conditions[j], conditions[i], flux, j, i))
    return anchors


# -----------------------------
# Model constraints
# -----------------------------
def gen_model_constraints(
    conditions: Sequence[ValueCondition],
    flux: FluxParams,
    index: DecisionIndex,
) -> list[LinearConstraint]:
    """
    M_source >= target at every anchor, one row per candidate branch of
    the source partial solution. min(a, b) >= c holds iff a >= c and b >= c,
    so the per-branch rows are exact.
    """
    constraints: list[LinearConstraint] = []
    seen: set[tuple] = set()
    counts: Counter[str] = Counter()

    for anchor in gen_anchor_points(conditions, flux):
        source = conditions[anchor.source]
        target = conditions[anchor.target]
        partial = eval_partial_solution(source, flux, anchor.t, anchor.x, index)
        if not partial.is_finite:
            if anchor.origin not in ("target-start", "target-end"):
                logger.warning(
                    "Anchor %s (t=%.6g, x=%.6g) of %s has no finite branch of %s; skipped",
                    anchor.origin,
                    anchor.t,
                    anchor.x,
                    target.label,
                    source.label,
                )
            continue

        lam = target.locate(anchor.t, anchor.x)
        if lam is None:
            continue
        target_value = target.value_at(lam)
        for candidate in partial.candidates:
            expr = target_value - candidate.expr
            if expr.is_constant:
                if expr.constant <= TAUTOLOGY_TOL:
                    continue
                logger.warning(
                    "%s cannot hold at (t=%.6g, x=%.6g): violated by %.6g",
                    anchor.family,
                    anchor.t,
                    anchor.x,
                    expr.constant,
                )
            key = expr.key()
            if key in seen:
                continue
            seen.add(key)
            constraints.append(LinearConstraint.le(expr, 0.0, anchor.family))
            counts[anchor.family] += 1

    for family, count in sorted(counts.items()):
        logger.debug("%s: %d constraints", family, count)
    return constraints


# -----------------------------
# Continuity constraints
# -----------------------------
@dataclass(frozen=True)
class ContinuityTarget:
    """One end point of an internal condition where its label meets the others."""

    condition: ValueCondition
    lam: float
    label: AffineExpr
    family: str
    suffix: str


def _continuity_targets(conditions: Sequence[ValueCondition]) -> list[ContinuityTarget]:
    """
    Start and far end of every density condition; start of every trace and
    end of its last segment. Interior trace points are tied by chain rows.
    """
    continued = {
        (cond.link, cond.trace, cond.segment - 1)
        for cond in conditions
        if isinstance(cond, InternalTrajectory) and not cond.starts_trace
    }
    targets = []
    for cond in conditions:
        if isinstance(cond, InternalTrajectory):
            if cond.starts_trace:
                targets.append(_start_of(cond))
            if (cond.link, cond.trace, cond.segment) not in continued:
                targets.append(_end_of(cond))
        elif isinstance(cond, InternalDensity):
            targets.append(_start_of(cond))
            targets.append(_end_of(cond))
    return targets


def _start_of(cond: ValueCondition) -> ContinuityTarget:
    return ContinuityTarget(cond, 0.0, cond.start_value, f"continuity:{cond.kind.value}", "select")


def _end_of(cond: ValueCondition) -> ContinuityTarget:
    return ContinuityTarget(cond, 1.0, cond.end_value, f"continuity-end:{cond.kind.value}", "select_end")


def _undominated(exprs: list[AffineExpr], index: DecisionIndex) -> list[AffineExpr]:
    """
    Drops candidates that are never below another one on the variable box.
    Of candidates that dominate each other both ways, the first is kept.
    """
    kept: list[AffineExpr] = []
    for expr in exprs:
        if any(index.expr_bounds(expr - other)[0] >= 0.0 for other in kept):
            continue
        kept = [other for other in kept if index.expr_bounds(other - expr)[0] < 0.0]
        kept.append(expr)
    return kept


def gen_continuity_constraints(
    conditions: Sequence[ValueCondition],
    flux: FluxParams,
    index: DecisionIndex,
    big_m: float | None = None,
) -> tuple[list[LinearConstraint], list[int]]:
    """
    At both ends of every internal condition, its label must equal the
    minimum of all other partial solutions there. The minimum is encoded
    with one binary per candidate and a big-M disjunction.
    """
    constraints: list[LinearConstraint] = []
    binaries: list[int] = []

    for end in _continuity_targets(conditions):
        target, label, family = end.condition, end.label, end.family
        t, x = target.point(end.lam)
        exprs: list[AffineExpr] = []
        for source in conditions:
            if source is target:
                continue
            partial = eval_partial_solution(source, flux, t, x, index)
            exprs.extend(candidate.expr for candidate in partial.candidates)
        exprs = _undominated(exprs, index)

        if not exprs:
            logger.debug("%s: no other condition reaches (t=%.6g, x=%.6g)", target.label, t, x)
            continue
        if len(exprs) == 1:
            constraints.append(LinearConstraint.eq(label, exprs[0], family))
            continue

        selectors = []
        for i, expr in enumerate(exprs):
            needed = max(index.expr_bounds(expr - label)[1], 0.0)
            if big_m is not None and big_m < needed:
                raise ConfigurationError(
                    f"big_m={big_m} is below the range {needed:.6g} needed by "
                    f"candidate {i} of {target.label}"
                )
            row_m = needed if big_m is None else big_m
            selector = index.add_binary(f"{target.label}.{end.suffix}[{i}]", owner=target.link)
            selectors.append(selector)
            constraints.append(LinearConstraint.le(label, expr, family))
            constraints.append(
                LinearConstraint.le(
                    expr - label + AffineExpr.var(selector, row_m),
                    row_m,
                    family,
                )
            )
        constraints.append(
            LinearConstraint.eq(AffineExpr.total(AffineExpr.var(s) for s in selectors), 1.0, family)
        )
        binaries.extend(selectors)
        logger.debug("%s (%s): continuity over %d candidates", target.label, family, len(exprs))

    return constraints, binaries


def gen_trace_chain_constraints(link: LinkModel) -> list[LinearConstraint]:
    """Consecutive segments of one trace share the label at their common point."""
    return [
        LinearConstraint.eq(current.start_value, previous.end_value, "continuity:chain")
        for previous, current in link.chains
    ]


# -----------------------------
# Data constraints
# -----------------------------
@dataclass(frozen=True)
class BoxMeasurement:
    """Measured value of one variable with a symmetric error half-width."""

    var_id: int
    value: float
    half_width: float
    tag: str

    @classmethod
    def relative(cls, var_id: int, value: float, error: float, tag: str) -> BoxMeasurement:
        _check_measurement(value, error, tag)
        return cls(var_id, value, error * abs(value), tag)

    @classmethod
    def absolute(cls, var_id: int, value: float, error: float, scale: float, tag: str) -> BoxMeasurement:
        _check_measurement(value, error, tag)
        return cls(var_id, value, error * scale, tag)


def _check_measurement(value: float, error: float, tag: str) -> None:
    if value is None or not math.isfinite(value):
        raise DataError(f"{tag}: empty measurement")
    if error < 0:
        raise DataError(f"{tag}: error level must be non-negative, got {error}")


def gen_data_constraints(measurements: Iterable[BoxMeasurement]) -> list[LinearConstraint]:
    constraints = []
    for m in measurements:
        var = AffineExpr.var(m.var_id)
        if m.half_width == 0.0:
            constraints.append(LinearConstraint.eq(var, m.value, m.tag))
            continue
        constraints.append(LinearConstraint.ge(var, m.value - m.half_width, m.tag))
        constraints.append(LinearConstraint.le(var, m.value + m.half_width, m.tag))
    return constraints


# -----------------------------
# Travel-time constraints
# -----------------------------
def gen_travel_time_constraints(
    t0: float,
    tf: float,
    upstream: LinkModel,
    downstream: LinkModel,
    between: Sequence[LinkModel] = (),
) -> list[LinearConstraint]:
    """
    The vehicle entering upstream at t0 leaves downstream at tf. Across a
    chain of links, every vehicle initially on a link before the last one
    is ahead of it, which adds their count to the entry label.
    """
    if not t0 < tf:
        raise DataError(f"Travel time needs t0 < tf, got t0={t0}, tf={tf}")
    horizon = upstream.geometry.t_max
    if t0 < 0 or tf > horizon:
        raise DataError(f"Travel time [{t0}, {tf}] leaves the horizon [0, {horizon}]")

    ahead = AffineExpr()
    if downstream is not upstream:
        for link in (upstream, *between):
            ahead = ahead + link.initial_vehicles()
    entry = upstream.upstream_count(t0) + ahead
    return [LinearConstraint.eq(entry, downstream.downstream_count(tf), "travel-time")]
