# tests/unit/test_settings.py

import pytest

from src.domain.exceptions import ConfigurationError
from src.infrastructure.settings import SolverSettings, load_solver_settings


# ---------------------
# DEFAULTS AND ENVIRONMENT
# ---------------------

def test_defaults():
    settings = SolverSettings()
    assert settings.backend == "auto"
    assert settings.max_binaries == 64
    assert settings.density_resolution == 200


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("TSE_MILP_BACKEND", "highs")
    monkeypatch.setenv("TSE_NODE_LIMIT", "50")
    monkeypatch.setenv("TSE_FEASIBILITY_TOL", "1e-8")
    settings = load_solver_settings()
    assert settings.backend == "highs"
    assert settings.node_limit == 50
    assert settings.feasibility_tol == 1e-8


def test_environment_garbage(monkeypatch):
    monkeypatch.setenv("TSE_MAX_BINARIES", "many")
    with pytest.raises(ConfigurationError):
        load_solver_settings()


# ---------------------
# VALIDATION
# ---------------------

@pytest.mark.parametrize(
    "changes",
    [
        {"backend": "cplex"},
        {"node_limit": 0},
        {"max_binaries": -1},
        {"feasibility_tol": 0.0},
        {"integrality_tol": 0.5},
        {"density_resolution": 2},
    ],
)
def test_invalid_settings(changes):
    with pytest.raises(ConfigurationError):
        SolverSettings(**changes)


def test_scenario_overrides():
    settings = SolverSettings().with_overrides([("max_binaries", 8), ("backend", "highs")])
    assert (settings.max_binaries, settings.backend) == (8, "highs")
    with pytest.raises(ConfigurationError):
        SolverSettings().with_overrides([("threads", 4)])
