# src/infrastructure/solver/branch_and_bound.py

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import Bounds, milp
from scipy.optimize import LinearConstraint as ScipyLinearConstraint

from src.domain.exceptions import ConfigurationError, SolverError
from src.domain.problem import MilpProblem, MilpSolution, SolveStatus
from src.domain.state_machine import NodeStateMachine, NodeStatus
from src.infrastructure.settings import SolverSettings
from src.infrastructure.solver.lp import LinearSystem, solve_lp

logger = logging.getLogger(__name__)

GAP_RELATIVE = 1e-6
GAP_ABSOLUTE = 1e-9


def optimality_gap(objective: float) -> float:
    return GAP_RELATIVE * abs(objective) + GAP_ABSOLUTE


def _dominated(bound: float, incumbent_cost: float) -> bool:
    if math.isinf(incumbent_cost):
        return False
    return bound >= incumbent_cost - optimality_gap(incumbent_cost)


@dataclass(order=True)
class _Node:
    """
    Queue entry. Ordered by LP bound of the parent, then deeper first,
    then creation order, which makes the search deterministic.
    """

    bound: float
    neg_depth: int
    seq: int
    lower: np.ndarray = field(compare=False)
    upper: np.ndarray = field(compare=False)
    status: NodeStatus = field(compare=False, default=NodeStatus.OPEN)

    @property
    def depth(self) -> int:
        return -self.neg_depth

    def transition(self, to_status: NodeStatus) -> None:
        NodeStateMachine.validate_transition(self.status, to_status)
        self.status = to_status


def _check_binary_guard(problem: MilpProblem, settings: SolverSettings) -> None:
    count = len(problem.binary_ids)
    if count > settings.max_binaries:
        raise ConfigurationError(
            f"Problem has {count} binaries, above the guard of {settings.max_binaries}; "
            "raise max_binaries to solve it anyway"
        )


def _most_fractional(values: np.ndarray, binary_ids: np.ndarray, tol: float) -> int | None:
    """Binary farthest from integrality, lowest index on ties; None if all integral."""
    distance = np.minimum(values[binary_ids], 1.0 - values[binary_ids])
    if distance.size == 0 or distance.max() <= tol:
        return None
    return int(binary_ids[int(np.argmax(distance))])


def _least_fractional(values: np.ndarray, binary_ids: np.ndarray, tol: float) -> int | None:
    """Fractional binary closest to integrality, lowest index on ties."""
    distance = np.minimum(values[binary_ids], 1.0 - values[binary_ids])
    fractional = distance > tol
    if not fractional.any():
        return None
    candidates = np.where(fractional, distance, np.inf)
    return int(binary_ids[int(np.argmin(candidates))])


@dataclass
class _Dive:
    values: np.ndarray | None
    cost: float
    objective: float | None
    solves: int
    pivots: int


def _dive(
    problem: MilpProblem,
    settings: SolverSettings,
    system: LinearSystem,
    binary_ids: np.ndarray,
    root: MilpSolution,
) -> _Dive:
    """
    Rounds the least fractional binary, fixes it and re-solves until the
    relaxation is integral. A fix that makes the LP infeasible is retried
    once with the opposite value; a second failure abandons the dive.
    """
    lower, upper = system.lower.copy(), system.upper.copy()
    relaxation = root
    solves = pivots = 0
    while True:
        values = relaxation.values
        branch_id = _least_fractional(values, binary_ids, settings.integrality_tol)
        if branch_id is None:
            values = values.copy()
            values[binary_ids] = np.round(values[binary_ids])
            cost = system.sign * relaxation.objective
            logger.debug("Dive found incumbent %.9g after %d LPs", relaxation.objective, solves)
            return _Dive(values, cost, relaxation.objective, solves, pivots)

        rounded = 1.0 if values[branch_id] >= 0.5 else 0.0
        for fixed in (rounded, 1.0 - rounded):
            trial_lower, trial_upper = lower.copy(), upper.copy()
            trial_lower[branch_id] = trial_upper[branch_id] = fixed
            relaxation = solve_lp(
                problem, settings, system, trial_lower, trial_upper, with_activities=False
            )
            solves += 1
            pivots += relaxation.pivots
            if relaxation.is_optimal:
                lower, upper = trial_lower, trial_upper
                break
        else:
            logger.debug("Dive abandoned at binary %d after %d LPs", branch_id, solves)
            return _Dive(None, math.inf, None, solves, pivots)


def _finish(problem: MilpProblem, values: np.ndarray, **kwargs) -> MilpSolution:
    return MilpSolution(
        objective=problem.objective.evaluate(values),
        values=values,
        activities=tuple(c.expr.evaluate(values) for c in problem.constraints),
        **kwargs,
    )


# -----------------------------
# Embedded branch-and-bound
# -----------------------------
def _branch_and_bound(problem: MilpProblem, settings: SolverSettings) -> MilpSolution:
    system = LinearSystem.from_problem(problem)
    binary_ids = np.array(problem.binary_ids, dtype=int)

    root_solution = solve_lp(problem, settings, system, with_activities=False)
    if not root_solution.is_optimal:
        return root_solution

    dive = _dive(problem, settings, system, binary_ids, root_solution)
    incumbent = dive.values
    incumbent_cost = dive.cost
    trace: list[float] = [] if dive.objective is None else [dive.objective]
    pivots = root_solution.pivots + dive.pivots

    queue: list[_Node] = []
    seq = 0
    heapq.heappush(queue, _Node(-math.inf, 0, seq, system.lower.copy(), system.upper.copy()))
    nodes = 0
    limit_hit = False

    while queue:
        node = heapq.heappop(queue)
        if _dominated(node.bound, incumbent_cost):
            node.transition(NodeStatus.PRUNED)
            continue
        if nodes >= settings.node_limit:
            limit_hit = True
            logger.warning(
                "Node limit %d reached with %d open nodes", settings.node_limit, len(queue) + 1
            )
            break

        nodes += 1
        if nodes == 1:
            relaxation = root_solution
        else:
            relaxation = solve_lp(
                problem, settings, system, node.lower, node.upper, with_activities=False
            )
            pivots += relaxation.pivots

        if relaxation.status is SolveStatus.UNBOUNDED:
            raise SolverError("LP relaxation reported unbounded on a bounded problem")
        if relaxation.status is SolveStatus.ITERATION_LIMIT:
            limit_hit = True
            node.transition(NodeStatus.PRUNED)
            continue
        if relaxation.status is SolveStatus.INFEASIBLE:
            node.transition(NodeStatus.INFEASIBLE)
            logger.debug("Node %d depth %d infeasible", node.seq, node.depth)
            continue

        node.transition(NodeStatus.SOLVED)
        cost = system.sign * relaxation.objective
        logger.debug(
            "Node %d depth %d bound %.9g incumbent %.9g",
            node.seq,
            node.depth,
            relaxation.objective,
            system.sign * incumbent_cost,
        )
        if _dominated(cost, incumbent_cost):
            node.transition(NodeStatus.PRUNED)
            continue

        values = relaxation.values
        branch_id = _most_fractional(values, binary_ids, settings.integrality_tol)
        if branch_id is None:
            node.transition(NodeStatus.INTEGRAL)
            values = values.copy()
            values[binary_ids] = np.round(values[binary_ids])
            incumbent = values
            incumbent_cost = cost
            trace.append(relaxation.objective)
            logger.debug("Node %d: new incumbent %.9g", node.seq, relaxation.objective)
            continue

        node.transition(NodeStatus.BRANCHED)
        rounded = 1.0 if values[branch_id] >= 0.5 else 0.0
        for fixed in (rounded, 1.0 - rounded):
            lower = node.lower.copy()
            upper = node.upper.copy()
            lower[branch_id] = upper[branch_id] = fixed
            seq += 1
            heapq.heappush(queue, _Node(cost, node.neg_depth - 1, seq, lower, upper))

    if incumbent is None:
        status = SolveStatus.ITERATION_LIMIT if limit_hit else SolveStatus.INFEASIBLE
        logger.info("Branch-and-bound finished %s after %d nodes", status.value, nodes)
        return MilpSolution(status=status, nodes=nodes, pivots=pivots)

    status = SolveStatus.ITERATION_LIMIT if limit_hit else SolveStatus.OPTIMAL
    solution = _finish(
        problem, incumbent, status=status, nodes=nodes, pivots=pivots, incumbents=tuple(trace)
    )
    logger.info(
        "Branch-and-bound finished %s after %d nodes, objective %.9g",
        status.value,
        nodes,
        solution.objective,
    )
    return solution


# -----------------------------
# HiGHS backend
# -----------------------------
_HIGHS_STATUS = {
    0: SolveStatus.OPTIMAL,
    1: SolveStatus.ITERATION_LIMIT,
    2: SolveStatus.INFEASIBLE,
    3: SolveStatus.UNBOUNDED,
}


def _solve_with_highs(problem: MilpProblem, settings: SolverSettings) -> MilpSolution:
    system = LinearSystem.from_problem(problem)
    integrality = np.zeros(len(problem.variables))
    integrality[list(problem.binary_ids)] = 1

    constraints = []
    if system.a_ub is not None:
        constraints.append(ScipyLinearConstraint(system.a_ub, -np.inf, system.b_ub))
    if system.a_eq is not None:
        constraints.append(ScipyLinearConstraint(system.a_eq, system.b_eq, system.b_eq))

    result = milp(
        system.cost,
        integrality=integrality,
        bounds=Bounds(system.lower, system.upper),
        constraints=constraints,
        options={
            "node_limit": settings.node_limit,
            "mip_rel_gap": GAP_RELATIVE,
        },
    )
    if result.status not in _HIGHS_STATUS:
        raise SolverError(f"HiGHS MILP backend failed: {result.message}")
    status = _HIGHS_STATUS[result.status]
    if result.x is None:
        return MilpSolution(status=status)

    values = np.asarray(result.x, dtype=float)
    values[list(problem.binary_ids)] = np.round(values[list(problem.binary_ids)])
    solution = _finish(problem, values, status=status, incumbents=(problem.objective.evaluate(values),))
    logger.info("HiGHS finished %s, objective %.9g", status.value, solution.objective)
    return solution


def select_backend(problem: MilpProblem, settings: SolverSettings) -> str:
    """
    The embedded branch-and-bound up to the binary guard, HiGHS beyond it
    when the backend is "auto". An explicit branch-and-bound request
    enforces the guard.
    """
    if settings.backend == "highs":
        return "highs"
    if settings.backend == "branch-and-bound":
        _check_binary_guard(problem, settings)
        return "branch-and-bound"
    count = len(problem.binary_ids)
    if count > settings.max_binaries:
        logger.info(
            "%d binaries exceed the branch-and-bound guard of %d; solving with HiGHS",
            count,
            settings.max_binaries,
        )
        return "highs"
    return "branch-and-bound"


def solve_milp(problem: MilpProblem, settings: SolverSettings) -> MilpSolution:
    """
    Best-bound branch-and-bound over the binaries of `problem`, or the
    HiGHS MILP solver when the backend setting selects it.
    """
    if select_backend(problem, settings) == "highs":
        return _solve_with_highs(problem, settings)
    if not problem.binary_ids:
        return solve_lp(problem, settings)
    return _branch_and_bound(problem, settings)
