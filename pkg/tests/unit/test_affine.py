# tests/unit/test_affine.py

import numpy as np
import pytest

from src.domain.affine import AffineExpr
from src.domain.decision import DecisionIndex, VariableKind, variable_name
from src.domain.exceptions import ConfigurationError


# ---------------------
# CANONICAL FORM
# ---------------------

def test_build_merges_and_sorts():
    expr = AffineExpr.build(1.0, [(3, 2.0), (1, 1.0), (3, -2.0), (0, 0.5)])
    assert expr.terms == ((0, 0.5), (1, 1.0))
    assert expr == AffineExpr.build(1.0, {1: 1.0, 0: 0.5})


def test_arithmetic():
    a = AffineExpr.var(0, 2.0) + 1.0
    b = AffineExpr.var(1) - AffineExpr.var(0)
    total = 3 * a - b
    assert total.constant == 3.0
    assert total.coefficient(0) == 7.0
    assert total.coefficient(1) == -1.0
    assert (a - a).is_constant


def test_evaluate_and_bounds():
    expr = AffineExpr.build(1.0, [(0, 2.0), (1, -3.0)])
    assert expr.evaluate([1.0, 2.0]) == pytest.approx(-3.0)
    low, high = expr.bounds(np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    assert (low, high) == (-2.0, 3.0)


def test_key_rounds():
    a = AffineExpr.build(0.1 + 0.2, [(0, 1.0)])
    b = AffineExpr.build(0.3, [(0, 1.0)])
    assert a != b
    assert a.key() == b.key()


# ---------------------
# DECISION INDEX
# ---------------------

def test_index_registration():
    index = DecisionIndex()
    name = variable_name("main", VariableKind.RHO_INI, 0)
    var_id = index.add(name, VariableKind.RHO_INI, 0.0, 0.2, "main")
    binary = index.add_binary("select")

    assert name == "main.rho_ini[0]"
    assert index.id_of(name) == var_id
    assert index.binary_count() == 1
    assert index.ids_of_kind(VariableKind.RHO_INI, owner="main") == [var_id]
    np.testing.assert_array_equal(index.upper, [0.2, 1.0])
    assert index[binary].is_binary


def test_index_rejects_duplicates_and_unbounded():
    index = DecisionIndex()
    index.add("a", VariableKind.AUXILIARY, 0.0, 1.0)
    with pytest.raises(ConfigurationError):
        index.add("a", VariableKind.AUXILIARY, 0.0, 1.0)
    with pytest.raises(ConfigurationError):
        index.add("b", VariableKind.AUXILIARY, 0.0, float("inf"))
    with pytest.raises(ConfigurationError):
        index.add("c", VariableKind.AUXILIARY, 2.0, 1.0)
    with pytest.raises(ConfigurationError):
        index.id_of("missing")
