# src/infrastructure/solver/lp.py

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from src.domain.exceptions import SolverError
from src.domain.problem import MilpProblem, MilpSolution, Relation, Sense, SolveStatus
from src.infrastructure.settings import SolverSettings

logger = logging.getLogger(__name__)

_STATUS = {
    0: SolveStatus.OPTIMAL,
    1: SolveStatus.ITERATION_LIMIT,
    2: SolveStatus.INFEASIBLE,
    3: SolveStatus.UNBOUNDED,
}


def _sparse_rows(rows: list[tuple[tuple[int, float], ...]], width: int) -> csr_matrix:
    data, cols, indptr = [], [], [0]
    for terms in rows:
        for var_id, coeff in terms:
            cols.append(var_id)
            data.append(coeff)
        indptr.append(len(cols))
    return csr_matrix((data, cols, indptr), shape=(len(rows), width))


@dataclass(frozen=True)
class LinearSystem:
    """
    Matrix form of a problem, built once and shared by every LP solved
    over it (branch-and-bound nodes only change the bounds).

    Costs are always for minimization; `sign` restores the caller's sense.
    """

    cost: np.ndarray
    offset: float
    sign: float
    a_ub: csr_matrix | None
    b_ub: np.ndarray | None
    a_eq: csr_matrix | None
    b_eq: np.ndarray | None
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def from_problem(cls, problem: MilpProblem) -> LinearSystem:
        width = len(problem.variables)
        sign = -1.0 if problem.sense is Sense.MAX else 1.0
        cost = np.zeros(width)
        for var_id, coeff in problem.objective.terms:
            cost[var_id] = sign * coeff

        ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
        for constraint in problem.constraints:
            if constraint.relation is Relation.EQ:
                eq_rows.append(constraint.expr.terms)
                eq_rhs.append(-constraint.expr.constant)
            else:
                ub_rows.append(constraint.expr.terms)
                ub_rhs.append(-constraint.expr.constant)

        return cls(
            cost=cost,
            offset=problem.objective.constant,
            sign=sign,
            a_ub=_sparse_rows(ub_rows, width) if ub_rows else None,
            b_ub=np.array(ub_rhs) if ub_rows else None,
            a_eq=_sparse_rows(eq_rows, width) if eq_rows else None,
            b_eq=np.array(eq_rhs) if eq_rows else None,
            lower=problem.lower,
            upper=problem.upper,
        )


def solve_lp(
    problem: MilpProblem,
    settings: SolverSettings,
    system: LinearSystem | None = None,
    lower: np.ndarray | None = None,
    upper: np.ndarray | None = None,
    with_activities: bool = True,
) -> MilpSolution:
    """
    Solves the continuous relaxation of `problem`. Binaries are treated as
    [0, 1] variables; `lower`/`upper` override the variable bounds.
    """
    system = system or LinearSystem.from_problem(problem)
    lo = system.lower if lower is None else lower
    hi = system.upper if upper is None else upper
    if np.any(lo > hi + settings.feasibility_tol):
        return MilpSolution(status=SolveStatus.INFEASIBLE)

    result = linprog(
        system.cost,
        A_ub=system.a_ub,
        b_ub=system.b_ub,
        A_eq=system.a_eq,
        b_eq=system.b_eq,
        bounds=np.column_stack([lo, np.maximum(lo, hi)]),
        method="highs-ds",
        options={
            "maxiter": settings.iteration_limit,
            "primal_feasibility_tolerance": settings.feasibility_tol,
            "dual_feasibility_tolerance": settings.feasibility_tol,
        },
    )

    if result.status not in _STATUS:
        raise SolverError(f"LP backend failed: {result.message}")
    status = _STATUS[result.status]
    pivots = int(getattr(result, "nit", 0) or 0)
    if status is not SolveStatus.OPTIMAL:
        logger.debug("LP finished with %s after %d pivots: %s", status.value, pivots, result.message)
        return MilpSolution(status=status, pivots=pivots)

    values = np.asarray(result.x, dtype=float)
    objective = system.sign * float(result.fun) + system.offset
    activities = tuple(c.expr.evaluate(values) for c in problem.constraints) if with_activities else ()
    return MilpSolution(
        status=status,
        objective=objective,
        values=values,
        activities=activities,
        pivots=pivots,
    )
