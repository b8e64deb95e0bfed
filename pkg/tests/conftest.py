# tests/conftest.py

import numpy as np
import pytest

from src.domain.decision import DecisionIndex
from src.domain.network import LinkDefinition, LinkModel
from src.infrastructure.settings import SolverSettings
from src.infrastructure.simulation.godunov import (
    HIGHWAY_FLUX,
    aligned_geometry,
    random_free_flow_run,
    simulate,
)


@pytest.fixture
def highway_flux():
    return HIGHWAY_FLUX


@pytest.fixture
def small_geometry(highway_flux):
    # 4 space blocks x 4 time blocks of 30 s, X = v T
    return aligned_geometry(highway_flux, k_max=3, n_max=3)


@pytest.fixture
def small_link(highway_flux, small_geometry):
    index = DecisionIndex()
    link = LinkModel.build(LinkDefinition("main", small_geometry, highway_flux), index)
    return index, link


@pytest.fixture
def settings():
    return SolverSettings()


@pytest.fixture
def free_flow_run():
    return random_free_flow_run(seed=11, k_max=3, n_max=5, cells_per_block=2)


@pytest.fixture
def empty_road_run(highway_flux):
    geometry = aligned_geometry(highway_flux, k_max=2, n_max=3)
    zeros = np.zeros(geometry.time_blocks)
    return simulate(
        highway_flux,
        geometry,
        np.zeros(geometry.space_blocks),
        zeros,
        np.full(geometry.time_blocks, highway_flux.q_max),
        cells_per_block=2,
    )
