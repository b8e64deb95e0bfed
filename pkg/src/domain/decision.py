# src/domain/decision.py

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator

import numpy as np

from src.domain.affine import AffineExpr
from src.domain.exceptions import ConfigurationError


class VariableKind(str, Enum):
    RHO_INI = "rho_ini"
    Q_IN = "q_in"
    Q_OUT = "q_out"
    TRAJECTORY_LABEL = "trajectory_label"
    TRAJECTORY_RATE = "trajectory_rate"
    DENSITY_LABEL = "density_label"
    DENSITY_VALUE = "density_value"
    RAMP_IN = "ramp_in"
    RAMP_OUT = "ramp_out"
    DEMAND = "demand"
    SUPPLY = "supply"
    AUXILIARY = "auxiliary"
    BINARY = "binary"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: VariableKind
    lower: float
    upper: float
    owner: str = ""

    @property
    def is_binary(self) -> bool:
        return self.kind is VariableKind.BINARY


class DecisionIndex:
    """
    Registry of decision variables.

    Ids are dense and assigned in registration order; names are unique.
    Every variable is bounded so that every LP built over the index is
    bounded too.
    """

    def __init__(self) -> None:
        self._variables: list[Variable] = []
        self._by_name: dict[str, int] = {}
        self._bounds_cache: tuple[np.ndarray, np.ndarray] | None = None

    def add(
        self,
        name: str,
        kind: VariableKind,
        lower: float,
        upper: float,
        owner: str = "",
    ) -> int:
        if name in self._by_name:
            raise ConfigurationError(f"Variable {name!r} registered twice")
        if not (math.isfinite(lower) and math.isfinite(upper)):
            raise ConfigurationError(f"Variable {name!r} needs finite bounds")
        if lower > upper:
            raise ConfigurationError(
                f"Variable {name!r} has empty range [{lower}, {upper}]"
            )
        var_id = len(self._variables)
        self._variables.append(
            Variable(name=name, kind=kind, lower=float(lower), upper=float(upper), owner=owner)
        )
        self._by_name[name] = var_id
        self._bounds_cache = None
        return var_id

    def add_binary(self, name: str, owner: str = "") -> int:
        return self.add(name, VariableKind.BINARY, 0.0, 1.0, owner)

    def id_of(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise ConfigurationError(f"Unknown variable {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __getitem__(self, var_id: int) -> Variable:
        return self._variables[var_id]

    def __len__(self) -> int:
        return len(self._variables)

    def __iter__(self) -> Iterator[Variable]:
        return iter(self._variables)

    def expr(self, name: str, coeff: float = 1.0) -> AffineExpr:
        return AffineExpr.var(self.id_of(name), coeff)

    def ids_of_kind(self, kind: VariableKind, owner: str | None = None) -> list[int]:
        return [
            var_id
            for var_id, var in enumerate(self._variables)
            if var.kind is kind and (owner is None or var.owner == owner)
        ]

    @property
    def variables(self) -> tuple[Variable, ...]:
        return tuple(self._variables)

    def _bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self._bounds_cache is None:
            self._bounds_cache = (
                np.array([var.lower for var in self._variables], dtype=float),
                np.array([var.upper for var in self._variables], dtype=float),
            )
        return self._bounds_cache

    @property
    def lower(self) -> np.ndarray:
        return self._bounds()[0]

    @property
    def upper(self) -> np.ndarray:
        return self._bounds()[1]

    def expr_bounds(self, expr: AffineExpr) -> tuple[float, float]:
        lower, upper = self._bounds()
        return expr.bounds(lower, upper)

    def binary_count(self) -> int:
        return sum(1 for var in self._variables if var.is_binary)

    def vector(self, values: dict[str, float], default: float = 0.0) -> np.ndarray:
        """Dense decision vector from a name -> value mapping."""
        d = np.full(len(self._variables), default, dtype=float)
        for name, value in values.items():
            d[self.id_of(name)] = value
        return d


def variable_name(owner: str, kind: VariableKind, *index: int | str) -> str:
    suffix = "".join(f"[{i}]" for i in index)
    return f"{owner}.{kind.value}{suffix}"
