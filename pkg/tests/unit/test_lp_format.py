# tests/unit/test_lp_format.py

import pytest

from src.domain.affine import AffineExpr
from src.domain.decision import Variable, VariableKind
from src.domain.exceptions import ScenarioFileError
from src.domain.problem import LinearConstraint, MilpProblem, Relation, Sense
from src.infrastructure.solver.lp_format import (
    export_lp_file,
    format_number,
    read_lp_file,
    render_lp,
)

GOLDEN = """\
Minimize
 obj: 2 v0 - 1 v1 + 1
Subject To
 c0: 1 v0 + 1 v1 <= 3
 c1: 1 v0 = 1
Bounds
 0 <= v0 <= 2.5
Binaries
 v1
End
"""


def _problem(sense=Sense.MIN):
    variables = (
        Variable("flow", VariableKind.Q_IN, 0.0, 2.5),
        Variable("select", VariableKind.BINARY, 0.0, 1.0),
    )
    v0, v1 = AffineExpr.var(0), AffineExpr.var(1)
    constraints = (
        LinearConstraint.le(v0 + v1, 3.0, "capacity"),
        LinearConstraint.eq(v0, 1.0, "data:flow-upstream"),
    )
    return MilpProblem(variables, constraints, 2 * v0 - v1 + 1.0, sense)


# ---------------------
# WRITING
# ---------------------

def test_golden_text():
    assert render_lp(_problem()) == GOLDEN


def test_maximize_header():
    assert render_lp(_problem(Sense.MAX)).startswith("Maximize\n")


@pytest.mark.parametrize(
    "value, text",
    [(2.0, "2"), (-0.0, "0"), (0.1, "0.1"), (1e-12, "1e-12"), (-3.25, "-3.25")],
)
def test_format_number(value, text):
    assert format_number(value) == text


# ---------------------
# READING
# ---------------------

def test_export_then_read(tmp_path):
    original = _problem()
    path = export_lp_file(original, tmp_path / "model.lp")
    parsed = read_lp_file(path)

    assert parsed.sense is Sense.MIN
    assert parsed.objective == original.objective
    assert [c.expr for c in parsed.constraints] == [c.expr for c in original.constraints]
    assert [c.relation for c in parsed.constraints] == [Relation.LE, Relation.EQ]
    assert parsed.binary_ids == (1,)
    assert (parsed.variables[0].lower, parsed.variables[0].upper) == (0.0, 2.5)


def test_read_rejects_garbage(tmp_path):
    path = tmp_path / "broken.lp"
    path.write_text("Minimize\n obj: 1 v0\nSubject To\n c0: 1 v0 ? 3\nEnd\n", encoding="utf-8")
    with pytest.raises(ScenarioFileError):
        read_lp_file(path)


def test_read_requires_bounds(tmp_path):
    path = tmp_path / "nobounds.lp"
    path.write_text("Minimize\n obj: 1 v0\nSubject To\n c0: 1 v0 <= 3\nBinaries\n v1\nEnd\n", encoding="utf-8")
    with pytest.raises(ScenarioFileError):
        read_lp_file(path)
