# tests/unit/test_laxhopf.py

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.domain.decision import DecisionIndex
from src.domain.exceptions import ConditionError, UncoveredPointError
from src.domain.laxhopf import (
    Branch,
    eval_condition,
    eval_full_solution,
    eval_initial_solution,
    eval_partial_solution,
    full_solution_values,
    numeric_laxhopf_oracle,
    oracle_resolution_bound,
    partial_solution_values,
)
from src.domain.network import LinkDefinition, LinkModel
from src.infrastructure.simulation.godunov import HIGHWAY_FLUX, aligned_geometry, extract_conditions

GRID = 400


def _link():
    index = DecisionIndex()
    geometry = aligned_geometry(HIGHWAY_FLUX, k_max=3, n_max=3)
    return index, LinkModel.build(LinkDefinition("main", geometry, HIGHWAY_FLUX), index)


INDEX, LINK = _link()


def _decision(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(INDEX.lower, INDEX.upper)


# ---------------------
# ORACLE AGREEMENT
# ---------------------

@pytest.mark.slow
@settings(max_examples=1000, deadline=None)
@given(
    st.integers(0, len(LINK.conditions) - 1),
    st.floats(0.05, 1.0),
    st.floats(0.0, 1.0),
    st.integers(0, 2**16),
)
def test_partial_solution_matches_grid_oracle(which, t_frac, x_frac, seed):
    cond = LINK.conditions[which]
    geometry = LINK.geometry
    t = t_frac * geometry.t_max
    x = geometry.xi + x_frac * geometry.length
    d = _decision(seed)

    exact = eval_partial_solution(cond, HIGHWAY_FLUX, t, x, INDEX).evaluate(d)
    oracle = numeric_laxhopf_oracle(cond, HIGHWAY_FLUX, d, t, x, grid=GRID)
    if math.isinf(oracle):
        return
    assert math.isfinite(exact)
    scale = 1e-7 * geometry.length * HIGHWAY_FLUX.rho_m
    assert exact <= oracle + scale
    assert oracle <= exact + oracle_resolution_bound(cond, HIGHWAY_FLUX, d, GRID) + scale


@pytest.mark.slow
@settings(max_examples=1000, deadline=None)
@given(st.integers(0, len(LINK.conditions) - 1), st.integers(0, 2**16))
def test_vectorized_values_match_symbolic(which, seed):
    cond = LINK.conditions[which]
    geometry = LINK.geometry
    d = _decision(seed)
    t, x = np.meshgrid(
        np.linspace(1.0, geometry.t_max, 7), np.linspace(geometry.xi, geometry.chi, 5), indexing="ij"
    )
    numeric = partial_solution_values(cond, HIGHWAY_FLUX, d, t, x)
    for (i, j), value in np.ndenumerate(numeric):
        symbolic = eval_partial_solution(cond, HIGHWAY_FLUX, t[i, j], x[i, j]).evaluate(d)
        if math.isinf(symbolic):
            assert math.isinf(value)
        else:
            assert value == pytest.approx(symbolic, rel=1e-9, abs=1e-9)


# ---------------------
# CONCAVITY
# ---------------------

@pytest.mark.slow
@settings(max_examples=1000, deadline=None)
@given(
    st.floats(0.05, 1.0),
    st.floats(0.0, 1.0),
    st.integers(0, 2**16),
    st.integers(0, 2**16),
    st.floats(0.0, 1.0),
)
def test_full_solution_is_concave_in_decisions(t_frac, x_frac, seed_a, seed_b, lam):
    geometry = LINK.geometry
    t = t_frac * geometry.t_max
    x = geometry.xi + x_frac * geometry.length
    da, db = _decision(seed_a), _decision(seed_b)

    def value(d):
        return eval_full_solution(LINK.conditions, HIGHWAY_FLUX, d, t, x)

    mixed = value(lam * da + (1 - lam) * db)
    assert mixed >= lam * value(da) + (1 - lam) * value(db) - 1e-7 * abs(mixed) - 1e-9


# ---------------------
# FREE-FLOW EXACTNESS
# ---------------------

def test_full_solution_reproduces_free_flow_counts(free_flow_run):
    extraction = extract_conditions(free_flow_run)
    geometry = free_flow_run.geometry
    scale = geometry.length * free_flow_run.flux.rho_m
    for n in range(1, geometry.time_blocks + 1):
        for k in range(geometry.space_blocks + 1):
            t, x = geometry.t_edge(n), geometry.x_edge(k)
            value = eval_full_solution(
                extraction.link.conditions, free_flow_run.flux, extraction.truth, t, x
            )
            assert value == pytest.approx(free_flow_run.moskowitz(t, x), abs=1e-6 * scale)


# ---------------------
# BRANCHES AND EDGE CASES
# ---------------------

def test_condition_value_on_its_own_domain():
    block = LINK.upstream[1]
    d = _decision(1)
    value = eval_condition(block, block.t_start, LINK.geometry.xi)
    assert value.regions == (Branch.CONDITION,)
    assert value.evaluate(d) == pytest.approx(block.start_value.evaluate(d))
    assert not eval_condition(block, block.t_start, LINK.geometry.chi).is_finite


def test_points_before_a_boundary_block_are_not_reached():
    block = LINK.upstream[2]
    partial = eval_partial_solution(block, HIGHWAY_FLUX, 1.0, LINK.geometry.xi)
    assert not partial.is_finite
    assert math.isinf(partial.evaluate(_decision(0)))


def test_uncovered_points_raise():
    with pytest.raises(UncoveredPointError):
        full_solution_values([LINK.upstream[2]], HIGHWAY_FLUX, _decision(0), 1.0, LINK.geometry.xi)
    with pytest.raises(ConditionError):
        full_solution_values([], HIGHWAY_FLUX, _decision(0), 1.0, 0.0)


def test_typed_evaluator_rejects_other_conditions():
    with pytest.raises(ConditionError):
        eval_initial_solution(LINK.upstream[0], HIGHWAY_FLUX, 10.0, 0.0)


def test_oracle_grid_minimum():
    with pytest.raises(ConditionError):
        numeric_laxhopf_oracle(LINK.initial[0], HIGHWAY_FLUX, _decision(0), 10.0, 0.0, grid=10)
