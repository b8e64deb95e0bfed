# src/infrastructure/solver/lp_format.py

from __future__ import annotations

import logging
import re
from pathlib import Path

from src.domain.affine import AffineExpr
from src.domain.decision import Variable, VariableKind
from src.domain.exceptions import ScenarioFileError
from src.domain.problem import LinearConstraint, MilpProblem, Relation, Sense

logger = logging.getLogger(__name__)

_VARIABLE = re.compile(r"^v(\d+)$")
_SECTIONS = {
    "minimize": "objective",
    "maximize": "objective",
    "subject to": "constraints",
    "bounds": "bounds",
    "binaries": "binaries",
    "end": "end",
}


def format_number(value: float) -> str:
    """Shortest round-tripping text, without a trailing '.0'."""
    value = float(value) + 0.0
    text = repr(value)
    return text[:-2] if text.endswith(".0") else text


def _format_terms(terms: tuple[tuple[int, float], ...]) -> str:
    parts = []
    for var_id, coeff in terms:
        magnitude = format_number(abs(coeff))
        if not parts:
            parts.append(f"{'-' if coeff < 0 else ''}{magnitude} v{var_id}")
        else:
            parts.append(f"{'-' if coeff < 0 else '+'} {magnitude} v{var_id}")
    return " ".join(parts)


def _format_objective(expr: AffineExpr) -> str:
    text = _format_terms(expr.terms)
    if not text:
        return format_number(expr.constant)
    if expr.constant:
        sign = "-" if expr.constant < 0 else "+"
        text += f" {sign} {format_number(abs(expr.constant))}"
    return text


def render_lp(problem: MilpProblem) -> str:
    lines = ["Maximize" if problem.sense is Sense.MAX else "Minimize"]
    lines.append(f" obj: {_format_objective(problem.objective)}")

    lines.append("Subject To")
    for i, constraint in enumerate(problem.constraints):
        expr = constraint.expr
        lhs = _format_terms(expr.terms) or ("0 v0" if problem.variables else "0")
        relation = "=" if constraint.relation is Relation.EQ else "<="
        lines.append(f" c{i}: {lhs} {relation} {format_number(-expr.constant)}")

    lines.append("Bounds")
    for i, var in enumerate(problem.variables):
        if not var.is_binary:
            lines.append(f" {format_number(var.lower)} <= v{i} <= {format_number(var.upper)}")

    lines.append("Binaries")
    for i in problem.binary_ids:
        lines.append(f" v{i}")

    lines.append("End")
    return "\n".join(lines) + "\n"


def export_lp_file(problem: MilpProblem, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(render_lp(problem), encoding="utf-8")
    logger.info(
        "Wrote LP file %s (%d variables, %d constraints)",
        path,
        len(problem.variables),
        len(problem.constraints),
    )
    return path


# -----------------------------
# Parsing
# -----------------------------
def _parse_expression(tokens: list[str], path: str, line_no: int) -> AffineExpr:
    terms: dict[int, float] = {}
    constant = 0.0
    sign = 1.0
    pending: float | None = None

    for token in tokens:
        if token in ("+", "-"):
            if pending is not None:
                constant += pending
                pending = None
            sign = -1.0 if token == "-" else 1.0
            continue
        match = _VARIABLE.match(token)
        if match:
            var_id = int(match.group(1))
            coeff = pending if pending is not None else sign
            terms[var_id] = terms.get(var_id, 0.0) + coeff
            pending = None
            sign = 1.0
            continue
        try:
            pending = sign * float(token)
        except ValueError:
            raise ScenarioFileError(path, f"unexpected token {token!r}", f"line {line_no}") from None
        sign = 1.0

    if pending is not None:
        constant += pending
    return AffineExpr.build(constant, terms)


def read_lp_file(path: str | Path) -> MilpProblem:
    """Parses the LP text written by `export_lp_file` back into a problem."""
    path = Path(path)
    section = None
    sense = Sense.MIN
    objective = AffineExpr()
    constraints: list[LinearConstraint] = []
    bounds: dict[int, tuple[float, float]] = {}
    binaries: set[int] = set()

    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        keyword = line.lower()
        if keyword in _SECTIONS:
            section = _SECTIONS[keyword]
            if keyword == "maximize":
                sense = Sense.MAX
            continue

        if section == "objective":
            body = line.split(":", 1)[1] if ":" in line else line
            objective = _parse_expression(body.split(), str(path), line_no)
        elif section == "constraints":
            name, _, body = line.partition(":")
            tokens = body.split()
            for relation in ("<=", ">=", "="):
                if relation in tokens:
                    at = tokens.index(relation)
                    break
            else:
                raise ScenarioFileError(str(path), f"row {name.strip()!r} has no relation", f"line {line_no}")
            lhs = _parse_expression(tokens[:at], str(path), line_no)
            rhs = _parse_expression(tokens[at + 1:], str(path), line_no)
            tag = name.strip()
            if relation == "=":
                constraints.append(LinearConstraint.eq(lhs, rhs, tag))
            elif relation == "<=":
                constraints.append(LinearConstraint.le(lhs, rhs, tag))
            else:
                constraints.append(LinearConstraint.ge(lhs, rhs, tag))
        elif section == "bounds":
            tokens = line.split()
            if len(tokens) != 5 or tokens[1] != "<=" or tokens[3] != "<=":
                raise ScenarioFileError(str(path), f"malformed bound {line!r}", f"line {line_no}")
            match = _VARIABLE.match(tokens[2])
            if not match:
                raise ScenarioFileError(str(path), f"unknown variable {tokens[2]!r}", f"line {line_no}")
            bounds[int(match.group(1))] = (float(tokens[0]), float(tokens[4]))
        elif section == "binaries":
            for token in line.split():
                match = _VARIABLE.match(token)
                if not match:
                    raise ScenarioFileError(str(path), f"unknown variable {token!r}", f"line {line_no}")
                binaries.add(int(match.group(1)))
        elif section == "end":
            break
        else:
            raise ScenarioFileError(str(path), "content before the objective section", f"line {line_no}")

    count = len(bounds) + len(binaries)
    variables = []
    for i in range(count):
        if i in binaries:
            variables.append(Variable(f"v{i}", VariableKind.BINARY, 0.0, 1.0))
        elif i in bounds:
            lower, upper = bounds[i]
            variables.append(Variable(f"v{i}", VariableKind.AUXILIARY, lower, upper))
        else:
            raise ScenarioFileError(str(path), f"variable v{i} has no bounds")
    return MilpProblem(tuple(variables), tuple(constraints), objective, sense)
