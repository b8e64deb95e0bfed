# src/domain/laxhopf.py

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from src.domain.affine import AffineExpr
from src.domain.conditions import (
    DownstreamBlock,
    InitialBlock,
    InternalDensity,
    InternalTrajectory,
    UpstreamBlock,
    ValueCondition,
)
from src.domain.decision import DecisionIndex
from src.domain.exceptions import ConditionError, UncoveredPointError
from src.domain.flux import FluxParams, legendre_fenchel

# Fraction-of-segment slack when the feasible source interval degenerates.
BRANCH_TOL = 1e-9


class Branch(IntEnum):
    """Which constraint pins the minimizing source point on the segment."""

    CONDITION = 0
    FREE_FLOW = 1
    SEGMENT_START = 2
    CONGESTED = 3
    SEGMENT_END = 4


@dataclass(frozen=True)
class Candidate:
    expr: AffineExpr
    region: Branch
    source: float


@dataclass(frozen=True)
class PartialValue:
    """
    Partial solution at one point: the minimum of its candidate branches.
    No candidates means the partial solution is +inf there.
    """

    candidates: tuple[Candidate, ...] = ()

    @property
    def is_finite(self) -> bool:
        return bool(self.candidates)

    @property
    def regions(self) -> tuple[Branch, ...]:
        return tuple(candidate.region for candidate in self.candidates)

    def evaluate(self, d: Sequence[float] | np.ndarray) -> float:
        if not self.candidates:
            return math.inf
        return min(candidate.expr.evaluate(d) for candidate in self.candidates)


INFINITE = PartialValue()


# -----------------------------
# Source interval geometry
# -----------------------------
def _cone_rows(cond: ValueCondition, flux: FluxParams, t, x):
    """
    Both cone inequalities written as a0 + a1*lam >= 0 over the source
    fraction lam. The v row keeps x(lam) - x >= -v T', the w row keeps
    x(lam) - x <= -w T', with T' = t - t(lam).
    """
    base = cond.x_start - x
    elapsed = t - cond.t_start
    v_row = (base + flux.v * elapsed, cond.dx - flux.v * cond.dt)
    w_row = (-(base + flux.w * elapsed), -(cond.dx - flux.w * cond.dt))
    return v_row, w_row


def _source_interval(
    cond: ValueCondition, flux: FluxParams, t: float, x: float
) -> tuple[float, Branch, float, Branch] | None:
    lo, lo_tag = 0.0, Branch.SEGMENT_START
    hi, hi_tag = 1.0, Branch.SEGMENT_END
    v_row, w_row = _cone_rows(cond, flux, t, x)
    scale = abs(cond.dx) + (flux.v - flux.w) * abs(cond.dt)

    for (a0, a1), tag in ((v_row, Branch.FREE_FLOW), (w_row, Branch.CONGESTED)):
        if abs(a1) <= 1e-14 * scale:
            if a0 < -BRANCH_TOL * scale:
                return None
            continue
        root = -a0 / a1
        if a1 > 0 and root > lo:
            lo, lo_tag = root, tag
        elif a1 < 0 and root < hi:
            hi, hi_tag = root, tag

    if lo > hi + BRANCH_TOL:
        return None
    if lo > hi:
        mid = 0.5 * (lo + hi)
        lo = hi = mid
    return lo, lo_tag, hi, hi_tag


def _transport_cost(cond: ValueCondition, flux: FluxParams, t: float, x: float, lam: float) -> float:
    """rho_c * (v T' + dx') from the source point at lam to (t, x)."""
    elapsed = t - (cond.t_start + lam * cond.dt)
    shift = cond.x_start + lam * cond.dx - x
    return flux.rho_c * (flux.v * elapsed + shift)


def _candidate(cond: ValueCondition, flux: FluxParams, t: float, x: float, lam: float, region: Branch) -> Candidate:
    expr = cond.value_at(lam) + _transport_cost(cond, flux, t, x, lam)
    return Candidate(expr=expr, region=region, source=lam)


def source_slope(cond: ValueCondition, flux: FluxParams) -> AffineExpr:
    """Derivative in lam of the candidate value; the same at every (t, x)."""
    return cond.increment + flux.rho_c * (cond.dx - flux.v * cond.dt)


def eval_partial_solution(
    cond: ValueCondition,
    flux: FluxParams,
    t: float,
    x: float,
    index: DecisionIndex | None = None,
) -> PartialValue:
    """
    Lax-Hopf solution of one affine condition at (t, x).

    The candidate value is affine along the feasible source interval, so
    its infimum sits at one of the two interval ends. With an index, an
    end is dropped when the sign of the slope is provable over the
    variable box.
    """
    interval = _source_interval(cond, flux, t, x)
    if interval is None:
        return INFINITE
    lo, lo_tag, hi, hi_tag = interval
    if lo == hi:
        return PartialValue((_candidate(cond, flux, t, x, hi, hi_tag),))

    keep_lo = keep_hi = True
    if index is not None:
        low, high = index.expr_bounds(source_slope(cond, flux))
        if high <= 0.0:
            keep_lo = False
        elif low >= 0.0:
            keep_hi = False

    candidates = []
    if keep_lo:
        candidates.append(_candidate(cond, flux, t, x, lo, lo_tag))
    if keep_hi:
        candidates.append(_candidate(cond, flux, t, x, hi, hi_tag))
    return PartialValue(tuple(candidates))


def eval_condition(cond: ValueCondition, t: float, x: float) -> PartialValue:
    lam = cond.locate(t, x)
    if lam is None:
        return INFINITE
    return PartialValue((Candidate(expr=cond.value_at(lam), region=Branch.CONDITION, source=lam),))


def _expect(cond: ValueCondition, *types: type) -> None:
    if not isinstance(cond, types):
        names = " or ".join(kind.__name__ for kind in types)
        raise ConditionError(f"Expected {names}, got {type(cond).__name__}")


def eval_initial_solution(cond: InitialBlock, flux: FluxParams, t: float, x: float, index: DecisionIndex | None = None) -> PartialValue:
    _expect(cond, InitialBlock)
    return eval_partial_solution(cond, flux, t, x, index)


def eval_upstream_solution(cond: UpstreamBlock, flux: FluxParams, t: float, x: float, index: DecisionIndex | None = None) -> PartialValue:
    _expect(cond, UpstreamBlock)
    return eval_partial_solution(cond, flux, t, x, index)


def eval_downstream_solution(cond: DownstreamBlock, flux: FluxParams, t: float, x: float, index: DecisionIndex | None = None) -> PartialValue:
    _expect(cond, DownstreamBlock)
    return eval_partial_solution(cond, flux, t, x, index)


def eval_internal_solutions(
    cond: InternalTrajectory | InternalDensity,
    flux: FluxParams,
    t: float,
    x: float,
    index: DecisionIndex | None = None,
) -> PartialValue:
    _expect(cond, InternalTrajectory, InternalDensity)
    return eval_partial_solution(cond, flux, t, x, index)


# -----------------------------
# Numeric evaluation
# -----------------------------
def partial_solution_values(
    cond: ValueCondition,
    flux: FluxParams,
    d: np.ndarray,
    t: np.ndarray | float,
    x: np.ndarray | float,
) -> np.ndarray:
    """Vectorized numeric partial solution; +inf where the point is not reached."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    t, x = np.broadcast_arrays(t, x)
    lo = np.zeros(t.shape)
    hi = np.ones(t.shape)
    feasible = np.ones(t.shape, dtype=bool)
    scale = abs(cond.dx) + (flux.v - flux.w) * abs(cond.dt)

    for a0, a1 in _cone_rows(cond, flux, t, x):
        if abs(a1) <= 1e-14 * scale:
            feasible &= a0 >= -BRANCH_TOL * scale
            continue
        root = -a0 / a1
        if a1 > 0:
            lo = np.maximum(lo, root)
        else:
            hi = np.minimum(hi, root)

    feasible &= lo <= hi + BRANCH_TOL
    hi = np.maximum(hi, lo)

    c0 = cond.start_value.evaluate(d)
    c1 = cond.increment.evaluate(d)

    def value(lam: np.ndarray) -> np.ndarray:
        elapsed = t - (cond.t_start + lam * cond.dt)
        shift = cond.x_start + lam * cond.dx - x
        return c0 + lam * c1 + flux.rho_c * (flux.v * elapsed + shift)

    result = np.minimum(value(lo), value(hi))
    return np.where(feasible, result, np.inf)


def full_solution_values(
    conditions: Sequence[ValueCondition],
    flux: FluxParams,
    d: np.ndarray,
    t: np.ndarray | float,
    x: np.ndarray | float,
) -> np.ndarray:
    """Inf-morphism: the minimum of all partial solutions, vectorized."""
    if not conditions:
        raise ConditionError("At least one value condition is required")
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    result = np.full(t.shape, np.inf)
    for cond in conditions:
        np.minimum(result, partial_solution_values(cond, flux, d, t, x), out=result)
    uncovered = ~np.isfinite(result)
    if uncovered.any():
        raise UncoveredPointError(zip(t[uncovered].tolist(), x[uncovered].tolist()))
    return result


def eval_full_solution(
    conditions: Sequence[ValueCondition],
    flux: FluxParams,
    d: np.ndarray,
    t: float,
    x: float,
) -> float:
    return float(full_solution_values(conditions, flux, d, t, x))


def numeric_laxhopf_oracle(
    cond: ValueCondition,
    flux: FluxParams,
    d: np.ndarray,
    t: float,
    x: float,
    grid: int = 400,
) -> float:
    """
    Brute-force Lax-Hopf infimum over a uniform grid of source points on
    the condition's domain. Always an upper bound of the exact value.
    """
    if grid < 100:
        raise ConditionError(f"Oracle grid must have at least 100 points, got {grid}")
    lams = np.linspace(0.0, 1.0, grid)
    best = math.inf
    for lam in lams:
        t_src, x_src = cond.point(lam)
        horizon = t - t_src
        if horizon < 0:
            continue
        if horizon == 0:
            if abs(x_src - x) > cond.tolerance:
                continue
            cost = 0.0
        else:
            cost = horizon * legendre_fenchel(flux, (x_src - x) / horizon)
        if math.isinf(cost):
            continue
        best = min(best, cond.value_at(lam).evaluate(d) + cost)
    return best


def oracle_resolution_bound(cond: ValueCondition, flux: FluxParams, d: np.ndarray, grid: int) -> float:
    """Largest gap between the grid oracle and the exact value when the oracle is finite."""
    slope = abs(cond.increment.evaluate(d)) + flux.rho_c * (
        flux.v * abs(cond.dt) + abs(cond.dx)
    )
    return slope / (grid - 1)
