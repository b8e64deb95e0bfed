# src/domain/problem.py

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from src.domain.affine import AffineExpr
from src.domain.decision import Variable, VariableKind
from src.domain.exceptions import ConfigurationError


class Relation(str, Enum):
    LE = "<="
    EQ = "="


class Sense(str, Enum):
    MIN = "min"
    MAX = "max"


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded-guarded"
    ITERATION_LIMIT = "iteration-limit"


@dataclass(frozen=True)
class LinearConstraint:
    """expr <= 0 or expr = 0, tagged with the family that produced it."""

    expr: AffineExpr
    relation: Relation
    tag: str

    @classmethod
    def le(cls, lhs: AffineExpr, rhs: AffineExpr | float, tag: str) -> LinearConstraint:
        return cls(lhs - rhs, Relation.LE, tag)

    @classmethod
    def ge(cls, lhs: AffineExpr, rhs: AffineExpr | float, tag: str) -> LinearConstraint:
        return cls(-(lhs - rhs), Relation.LE, tag)

    @classmethod
    def eq(cls, lhs: AffineExpr, rhs: AffineExpr | float, tag: str) -> LinearConstraint:
        return cls(lhs - rhs, Relation.EQ, tag)

    @property
    def family(self) -> str:
        return self.tag.split("#", 1)[0]

    def residual(self, d: Sequence[float] | np.ndarray) -> float:
        """Amount of violation at d, zero when satisfied."""
        value = self.expr.evaluate(d)
        if self.relation is Relation.EQ:
            return abs(value)
        return max(value, 0.0)

    def dump(self) -> str:
        terms = " ".join(f"{coeff:+.12g}*v{var_id}" for var_id, coeff in self.expr.terms)
        return f"{self.tag} {self.relation.value} {self.expr.constant:+.12g} {terms}".rstrip()


@dataclass(frozen=True)
class AnchorPoint:
    """Point on a target condition where a source partial solution is compared."""

    t: float
    x: float
    source: int
    target: int
    family: str
    origin: str


@dataclass(frozen=True)
class MilpProblem:
    variables: tuple[Variable, ...]
    constraints: tuple[LinearConstraint, ...]
    objective: AffineExpr
    sense: Sense = Sense.MIN

    def __post_init__(self) -> None:
        count = len(self.variables)
        for var in self.variables:
            if var.is_binary and (var.lower, var.upper) != (0.0, 1.0):
                raise ConfigurationError(f"Binary {var.name!r} must have bounds [0, 1]")
        for expr in [self.objective] + [c.expr for c in self.constraints]:
            for var_id in expr.variable_ids():
                if not 0 <= var_id < count:
                    raise ConfigurationError(f"Expression references unknown variable id {var_id}")

    @property
    def binary_ids(self) -> tuple[int, ...]:
        return tuple(i for i, var in enumerate(self.variables) if var.is_binary)

    @property
    def lower(self) -> np.ndarray:
        return np.array([var.lower for var in self.variables], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([var.upper for var in self.variables], dtype=float)

    def family_histogram(self) -> dict[str, int]:
        return dict(sorted(Counter(c.family for c in self.constraints).items()))

    def with_objective(self, objective: AffineExpr, sense: Sense) -> MilpProblem:
        return MilpProblem(self.variables, self.constraints, objective, sense)

    def relaxed(self) -> MilpProblem:
        """Same problem with binaries treated as continuous [0, 1] variables."""
        variables = tuple(
            replace(var, kind=VariableKind.AUXILIARY) if var.is_binary else var
            for var in self.variables
        )
        return MilpProblem(variables, self.constraints, self.objective, self.sense)

    def max_residual(self, d: Sequence[float] | np.ndarray) -> float:
        if not self.constraints:
            return 0.0
        return max(c.residual(d) for c in self.constraints)


@dataclass(frozen=True)
class MilpSolution:
    status: SolveStatus
    objective: float | None = None
    values: np.ndarray | None = None
    activities: tuple[float, ...] = ()
    nodes: int = 0
    pivots: int = 0
    incumbents: tuple[float, ...] = field(default=())

    @property
    def is_optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    def value(self, var_id: int) -> float:
        if self.values is None:
            raise ConfigurationError(f"No variable values available (status {self.status.value})")
        return float(self.values[var_id])
