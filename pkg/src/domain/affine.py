# src/domain/affine.py

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class AffineExpr:
    """
    constant + sum(coeff * d[id]) over a sparse, id-sorted term tuple.

    Instances are canonical: ids are unique, sorted, and zero
    coefficients are dropped, so equal expressions compare equal.
    """

    constant: float = 0.0
    terms: tuple[tuple[int, float], ...] = ()

    @classmethod
    def build(
        cls,
        constant: float = 0.0,
        terms: Iterable[tuple[int, float]] | Mapping[int, float] = (),
    ) -> AffineExpr:
        items = terms.items() if isinstance(terms, Mapping) else terms
        merged: dict[int, float] = {}
        for var_id, coeff in items:
            merged[var_id] = merged.get(var_id, 0.0) + float(coeff)
        canonical = tuple(
            (var_id, coeff) for var_id, coeff in sorted(merged.items()) if coeff != 0.0
        )
        return cls(float(constant), canonical)

    @classmethod
    def const(cls, value: float) -> AffineExpr:
        return cls(float(value), ())

    @classmethod
    def var(cls, var_id: int, coeff: float = 1.0) -> AffineExpr:
        return cls.build(0.0, ((var_id, coeff),))

    @classmethod
    def total(cls, exprs: Iterable[AffineExpr]) -> AffineExpr:
        constant = 0.0
        terms: list[tuple[int, float]] = []
        for expr in exprs:
            constant += expr.constant
            terms.extend(expr.terms)
        return cls.build(constant, terms)

    # -----------------------------
    # Arithmetic
    # -----------------------------
    def __add__(self, other: AffineExpr | float) -> AffineExpr:
        if isinstance(other, AffineExpr):
            return AffineExpr.build(
                self.constant + other.constant, self.terms + other.terms
            )
        return AffineExpr(self.constant + float(other), self.terms)

    __radd__ = __add__

    def __neg__(self) -> AffineExpr:
        return self.scale(-1.0)

    def __sub__(self, other: AffineExpr | float) -> AffineExpr:
        return self + (-other)

    def __rsub__(self, other: float) -> AffineExpr:
        return (-self) + other

    def __mul__(self, factor: float) -> AffineExpr:
        return self.scale(factor)

    __rmul__ = __mul__

    def __truediv__(self, divisor: float) -> AffineExpr:
        return self.scale(1.0 / divisor)

    def scale(self, factor: float) -> AffineExpr:
        factor = float(factor)
        if factor == 0.0:
            return AffineExpr(0.0, ())
        return AffineExpr(
            self.constant * factor,
            tuple((var_id, coeff * factor) for var_id, coeff in self.terms),
        )

    # -----------------------------
    # Inspection
    # -----------------------------
    @property
    def is_constant(self) -> bool:
        return not self.terms

    def variable_ids(self) -> tuple[int, ...]:
        return tuple(var_id for var_id, _ in self.terms)

    def coefficient(self, var_id: int) -> float:
        for term_id, coeff in self.terms:
            if term_id == var_id:
                return coeff
        return 0.0

    def evaluate(self, d: Sequence[float] | np.ndarray) -> float:
        value = self.constant
        for var_id, coeff in self.terms:
            value += coeff * d[var_id]
        return float(value)

    def bounds(
        self, lower: Sequence[float] | np.ndarray, upper: Sequence[float] | np.ndarray
    ) -> tuple[float, float]:
        """Interval of values over the box lower <= d <= upper."""
        low = high = self.constant
        for var_id, coeff in self.terms:
            if coeff > 0:
                low += coeff * lower[var_id]
                high += coeff * upper[var_id]
            else:
                low += coeff * upper[var_id]
                high += coeff * lower[var_id]
        return float(low), float(high)

    def key(self, digits: int = 12) -> tuple:
        """Hashable rounded form used to deduplicate constraint rows."""
        return (
            round(self.constant, digits),
            tuple((var_id, round(coeff, digits)) for var_id, coeff in self.terms),
        )

    def __str__(self) -> str:
        parts = [f"{self.constant:+.6g}"]
        parts.extend(f"{coeff:+.6g}*v{var_id}" for var_id, coeff in self.terms)
        return " ".join(parts)
