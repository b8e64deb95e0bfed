# src/domain/flux.py

import math
from dataclasses import dataclass

import numpy as np

from src.domain.exceptions import DensityDomainError, ParameterDomainError

# Relative slack accepted on density domain checks.
_DENSITY_TOL = 1e-12


@dataclass(frozen=True)
class FluxParams:
    """
    Triangular fundamental diagram, SI units.

    v: free-flow speed (m/s), w: congestion wave speed (m/s, negative),
    rho_c: critical density (veh/m), rho_m: jam density (veh/m),
    q_max: capacity (veh/s).
    """

    v: float
    w: float
    rho_c: float
    rho_m: float
    q_max: float

    def __post_init__(self) -> None:
        if not (self.w < 0 < self.v):
            raise ParameterDomainError(
                f"Expected w < 0 < v, got v={self.v}, w={self.w}"
            )
        if not (0 < self.rho_c < self.rho_m):
            raise ParameterDomainError(
                f"Expected 0 < rho_c < rho_m, got rho_c={self.rho_c}, rho_m={self.rho_m}"
            )
        if not math.isclose(self.q_max, self.v * self.rho_c, rel_tol=1e-9):
            raise ParameterDomainError(
                f"q_max={self.q_max} differs from v*rho_c={self.v * self.rho_c}"
            )
        congested = self.w * (self.rho_c - self.rho_m)
        if not math.isclose(self.q_max, congested, rel_tol=1e-9):
            raise ParameterDomainError(
                f"Flux is discontinuous at rho_c: {self.q_max} != {congested}"
            )


def make_flux_params(v: float, w: float, rho_c: float) -> FluxParams:
    if v <= 0:
        raise ParameterDomainError(f"Free-flow speed must be positive, got {v}")
    if w >= 0:
        raise ParameterDomainError(f"Congestion wave speed must be negative, got {w}")
    if rho_c <= 0:
        raise ParameterDomainError(f"Critical density must be positive, got {rho_c}")

    return FluxParams(
        v=float(v),
        w=float(w),
        rho_c=float(rho_c),
        rho_m=float(rho_c * (1.0 - v / w)),
        q_max=float(v * rho_c),
    )


def flux(params: FluxParams, rho: float) -> float:
    """Flow carried at density rho."""
    tol = _DENSITY_TOL * params.rho_m
    if rho < -tol or rho > params.rho_m + tol:
        raise DensityDomainError(
            f"Density {rho} outside [0, {params.rho_m}]"
        )
    if rho <= params.rho_c:
        return params.v * rho
    return params.w * (rho - params.rho_m)


def legendre_fenchel(params: FluxParams, u: float) -> float:
    """
    Concave conjugate of the flux, rho_c * (v + u) on [-v, -w].

    Returns +inf outside the domain; callers drop such characteristics.
    """
    if u < -params.v or u > -params.w:
        return math.inf
    return params.rho_c * (params.v + u)


def sending(params: FluxParams, rho):
    """Demand of a cell, min(v*rho, q_max). Accepts arrays."""
    return np.minimum(params.v * np.asarray(rho, dtype=float), params.q_max)


def receiving(params: FluxParams, rho):
    """Supply of a cell, min(q_max, w*(rho - rho_m)) floored at 0. Accepts arrays."""
    rho = np.asarray(rho, dtype=float)
    return np.clip(params.w * (rho - params.rho_m), 0.0, params.q_max)
