# tests/unit/test_flux.py

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.domain.exceptions import DensityDomainError, ParameterDomainError
from src.domain.flux import (
    FluxParams,
    flux,
    legendre_fenchel,
    make_flux_params,
    receiving,
    sending,
)
from src.domain.geometry import LinkGeometry


# ---------------------
# PARAMETERS
# ---------------------

def test_derived_parameters(highway_flux):
    assert highway_flux.q_max == pytest.approx(highway_flux.v * highway_flux.rho_c)
    # 65 mph against -10 mph puts jam density at 7.5 rho_c
    assert highway_flux.rho_m == pytest.approx(7.5 * highway_flux.rho_c)


@pytest.mark.parametrize(
    "v, w, rho_c",
    [(0.0, -5.0, 0.02), (30.0, 0.0, 0.02), (30.0, -5.0, 0.0), (-1.0, -5.0, 0.02)],
)
def test_invalid_parameters_rejected(v, w, rho_c):
    with pytest.raises(ParameterDomainError):
        make_flux_params(v, w, rho_c)


def test_discontinuous_flux_rejected():
    with pytest.raises(ParameterDomainError):
        FluxParams(v=30.0, w=-5.0, rho_c=0.02, rho_m=0.2, q_max=0.6)


# ---------------------
# FLUX
# ---------------------

def test_flux_corners(highway_flux):
    assert flux(highway_flux, 0.0) == 0.0
    assert flux(highway_flux, highway_flux.rho_c) == pytest.approx(highway_flux.q_max)
    assert flux(highway_flux, highway_flux.rho_m) == pytest.approx(0.0, abs=1e-12)


def test_flux_outside_domain(highway_flux):
    with pytest.raises(DensityDomainError):
        flux(highway_flux, -0.01)
    with pytest.raises(DensityDomainError):
        flux(highway_flux, 1.01 * highway_flux.rho_m)


@settings(max_examples=1000, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_flux_is_concave(a, b, lam):
    params = make_flux_params(29.0576, -4.4704, 0.0186)
    ra, rb = a * params.rho_m, b * params.rho_m
    mid = lam * ra + (1 - lam) * rb
    assert flux(params, mid) >= lam * flux(params, ra) + (1 - lam) * flux(params, rb) - 1e-12


def test_sending_and_receiving(highway_flux):
    rho = np.array([0.0, highway_flux.rho_c, highway_flux.rho_m])
    np.testing.assert_allclose(sending(highway_flux, rho), [0.0, highway_flux.q_max, highway_flux.q_max])
    np.testing.assert_allclose(
        receiving(highway_flux, rho), [highway_flux.q_max, highway_flux.q_max, 0.0], atol=1e-12
    )


# ---------------------
# CONJUGATE
# ---------------------

def test_legendre_fenchel_domain(highway_flux):
    assert legendre_fenchel(highway_flux, -highway_flux.v) == pytest.approx(0.0)
    assert legendre_fenchel(highway_flux, -highway_flux.w) == pytest.approx(
        highway_flux.rho_c * (highway_flux.v - highway_flux.w)
    )
    assert math.isinf(legendre_fenchel(highway_flux, -highway_flux.v - 1.0))
    assert math.isinf(legendre_fenchel(highway_flux, -highway_flux.w + 1.0))


@pytest.mark.parametrize("share", np.linspace(0.0, 1.0, 11))
def test_legendre_fenchel_matches_a_grid_scan(highway_flux, share):
    # sup over the density domain of flux(rho) + u rho
    u = min(-highway_flux.v + share * (highway_flux.v - highway_flux.w), -highway_flux.w)
    rho = np.linspace(0.0, highway_flux.rho_m, 20_001)
    scan = max(flux(highway_flux, r) + u * r for r in rho)
    step = rho[1] - rho[0]
    slack = (highway_flux.v - highway_flux.w) * step
    assert scan <= legendre_fenchel(highway_flux, u) + 1e-12
    assert legendre_fenchel(highway_flux, u) <= scan + slack


# ---------------------
# GEOMETRY
# ---------------------

def test_geometry_blocks():
    geometry = LinkGeometry(xi=0.0, chi=900.0, t_max=600.0, k_max=8, n_max=19)
    assert geometry.X == pytest.approx(100.0)
    assert geometry.T == pytest.approx(30.0)
    assert geometry.x_edge(9) == 900.0
    assert geometry.space_block_of(900.0) == 8
    assert geometry.time_block_of(30.0) == 1


def test_geometry_invariants():
    with pytest.raises(ParameterDomainError):
        LinkGeometry(xi=10.0, chi=10.0, t_max=1.0, k_max=0, n_max=0)
    with pytest.raises(ParameterDomainError):
        LinkGeometry(xi=0.0, chi=10.0, t_max=0.0, k_max=0, n_max=0)
