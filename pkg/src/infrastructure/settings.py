# src/infrastructure/settings.py

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from typing import Any, Iterable

from dotenv import load_dotenv

from src.domain.exceptions import ConfigurationError

load_dotenv()

BACKENDS = ("auto", "branch-and-bound", "highs")


# -----------------------------
# Solver settings
# -----------------------------
@dataclass(frozen=True)
class SolverSettings:
    iteration_limit: int = 100_000
    feasibility_tol: float = 1e-7
    integrality_tol: float = 1e-6
    max_binaries: int = 64
    node_limit: int = 20_000
    backend: str = "auto"
    density_resolution: int = 200

    def __post_init__(self) -> None:
        if self.backend not in BACKENDS:
            raise ConfigurationError(
                f"Unknown MILP backend {self.backend!r}, expected one of {BACKENDS}"
            )
        if self.iteration_limit <= 0 or self.node_limit <= 0 or self.max_binaries < 0:
            raise ConfigurationError("Solver limits must be positive")
        if not 0 < self.feasibility_tol < 1 or not 0 < self.integrality_tol < 0.5:
            raise ConfigurationError("Solver tolerances out of range")
        if self.density_resolution < 3:
            raise ConfigurationError("Density resolution needs at least 3 points per axis")

    def with_overrides(self, overrides: Iterable[tuple[str, Any]]) -> SolverSettings:
        known = {field.name for field in fields(self)}
        changes = {}
        for key, value in overrides:
            if key not in known:
                raise ConfigurationError(f"Unknown solver option {key!r}")
            changes[key] = value
        return replace(self, **changes)


def load_solver_settings() -> SolverSettings:
    try:
        return SolverSettings(
            iteration_limit=int(os.getenv("TSE_LP_ITERATION_LIMIT", "100000")),
            feasibility_tol=float(os.getenv("TSE_FEASIBILITY_TOL", "1e-7")),
            integrality_tol=float(os.getenv("TSE_INTEGRALITY_TOL", "1e-6")),
            max_binaries=int(os.getenv("TSE_MAX_BINARIES", "64")),
            node_limit=int(os.getenv("TSE_NODE_LIMIT", "20000")),
            backend=os.getenv("TSE_MILP_BACKEND", "auto"),
            density_resolution=int(os.getenv("TSE_DENSITY_RESOLUTION", "200")),
        )
    except ValueError as exc:
        raise ConfigurationError(f"Invalid solver setting in environment: {exc}") from exc
