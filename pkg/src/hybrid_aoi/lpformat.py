"""CPLEX LP text format: writer for :class:`LinearModel` and a small reader.

The reader understands the subset the writer emits (objective with an
optional constant, named rows, ``Bounds``, ``Binaries``/``Generals``) which is
enough for structural round-trip checks.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .milp import LinearModel

_MAX_LINE = 250


def _num(v: float) -> str:
    return repr(float(v))


def _terms(coeffs, names) -> list[str]:
    out = []
    for v, c in coeffs:
        sign = "-" if c < 0 else "+"
        out.append(f"{sign} {_num(abs(c))} {names[v]}")
    return out


def _wrap(head: str, parts: list[str]) -> list[str]:
    lines, cur = [], head
    for p in parts:
        if len(cur) + 1 + len(p) > _MAX_LINE:
            lines.append(cur)
            cur = "   " + p
        else:
            cur = f"{cur} {p}" if cur else p
    lines.append(cur)
    return lines


def write_lp(model: LinearModel) -> str:
    names = [v.name for v in model.variables]
    lines = [f"\\ {model.name}: {model.n_variables} variables, {model.n_constraints} constraints", "Minimize"]
    obj = _terms(sorted(model.objective.items()), names)
    if model.objective_constant:
        sign = "-" if model.objective_constant < 0 else "+"
        obj.append(f"{sign} {_num(abs(model.objective_constant))}")
    if not obj:
        obj = ["0"]
    lines += _wrap(" obj:", obj)
    lines.append("Subject To")
    for con in model.constraints:
        body = _terms(sorted(con.coeffs.items()), names)
        lines += _wrap(f" {con.name}:", body + [con.sense, _num(con.rhs)])
    lines.append("Bounds")
    for v in model.variables:
        if v.kind == "binary":
            continue
        lo = "-inf" if v.lower == float("-inf") else _num(v.lower)
        hi = "+inf" if v.upper == float("inf") else _num(v.upper)
        lines.append(f" {lo} <= {v.name} <= {hi}")
    binaries = [v.name for v in model.variables if v.kind == "binary"]
    generals = [v.name for v in model.variables if v.kind == "integer"]
    if binaries:
        lines.append("Binaries")
        lines += _wrap("", binaries)
    if generals:
        lines.append("Generals")
        lines += _wrap("", generals)
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_lp(model: LinearModel, path: str | Path) -> None:
    Path(path).write_text(write_lp(model))


@dataclass
class ParsedLP:
    objective: dict[str, float] = field(default_factory=dict)
    objective_constant: float = 0.0
    constraints: list[tuple[str, dict[str, float], str, float]] = field(default_factory=list)
    bounds: dict[str, tuple[float, float]] = field(default_factory=dict)
    binaries: list[str] = field(default_factory=list)
    generals: list[str] = field(default_factory=list)

    @property
    def variables(self) -> set[str]:
        names = set(self.objective) | set(self.bounds) | set(self.binaries) | set(self.generals)
        for _, coeffs, _, _ in self.constraints:
            names |= set(coeffs)
        return names

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)


_SECTION = re.compile(
    r"^(minimize|minimise|min|maximize|maximise|max|subject to|such that|st|s\.t\.|bounds|binaries|binary|bin|"
    r"generals|general|gen|end)$",
    re.IGNORECASE,
)
_TOKEN = re.compile(r"[<>=]=?|(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|[+-]|[^\s+<>=-]+")


def _parse_expr(tokens: list[str]) -> tuple[dict[str, float], float]:
    coeffs: dict[str, float] = {}
    constant = 0.0
    sign, coef = 1.0, None
    for tok in tokens:
        if tok in "+-":
            sign = -1.0 if tok == "-" else 1.0
            continue
        try:
            val = float(tok)
        except ValueError:
            val = None
        if val is not None and tok.lower() not in ("inf", "infinity", "nan"):
            if coef is not None:
                constant += sign * coef
                sign = 1.0
            coef = val
            continue
        coeffs[tok] = coeffs.get(tok, 0.0) + sign * (1.0 if coef is None else coef)
        sign, coef = 1.0, None
    if coef is not None:
        constant += sign * coef
    return coeffs, constant


def _bound_value(tok: str) -> float:
    t = tok.lower().lstrip("+")
    if t in ("inf", "infinity"):
        return float("inf")
    if t in ("-inf", "-infinity"):
        return float("-inf")
    return float(tok)


def parse_lp(text: str) -> ParsedLP:
    out = ParsedLP()
    section = None
    statements: list[tuple[str, str]] = []
    buf: list[str] = []

    def flush():
        if buf and section is not None:
            statements.append((section, " ".join(buf)))
        buf.clear()

    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        if _SECTION.match(line):
            flush()
            section = line.lower()
            if section == "end":
                break
            continue
        if section and section.startswith(("bin", "gen")):
            flush()
            statements.append((section, line))
            continue
        if section in ("bounds",):
            flush()
            statements.append((section, line))
            continue
        # objective and rows may wrap; a new row starts with "name:"
        if re.match(r"^[A-Za-z_][\w.\[\]]*\s*:", line) and buf:
            flush()
        buf.append(line)
    flush()

    for section, stmt in statements:
        if section.startswith(("min", "max")):
            body = stmt.split(":", 1)[1] if ":" in stmt else stmt
            out.objective, out.objective_constant = _parse_expr(_TOKEN.findall(body))
        elif section in ("subject to", "such that", "st", "s.t."):
            name, body = (stmt.split(":", 1) if ":" in stmt else (f"R{len(out.constraints)}", stmt))
            toks = _TOKEN.findall(body)
            k = next(i for i, t in enumerate(toks) if t in ("<=", ">=", "=", "<", ">", "=<", "=>"))
            sense = {"<": "<=", "=<": "<=", ">": ">=", "=>": ">="}.get(toks[k], toks[k])
            coeffs, const = _parse_expr(toks[:k])
            rhs_coeffs, rhs = _parse_expr(toks[k + 1:])
            if rhs_coeffs:
                raise ValueError(f"variables on the right-hand side of row {name.strip()} are not supported")
            out.constraints.append((name.strip(), coeffs, sense, rhs - const))
        elif section == "bounds":
            parts = stmt.split()
            if len(parts) == 5 and parts[1] in ("<=", "<") and parts[3] in ("<=", "<"):
                out.bounds[parts[2]] = (_bound_value(parts[0]), _bound_value(parts[4]))
            elif len(parts) == 3 and parts[1] == "=":
                v = _bound_value(parts[2])
                out.bounds[parts[0]] = (v, v)
            elif len(parts) == 2 and parts[1].lower() == "free":
                out.bounds[parts[0]] = (float("-inf"), float("inf"))
            elif len(parts) == 3 and parts[1] in ("<=", ">="):
                lo, hi = out.bounds.get(parts[0], (0.0, float("inf")))
                v = _bound_value(parts[2])
                out.bounds[parts[0]] = (lo, v) if parts[1] == "<=" else (v, hi)
            else:
                raise ValueError(f"unsupported bound statement: {stmt!r}")
        elif section.startswith("bin"):
            out.binaries += stmt.split()
        elif section.startswith("gen"):
            out.generals += stmt.split()
    return out


def read_lp(path: str | Path) -> ParsedLP:
    return parse_lp(Path(path).read_text())
