"""
CPLEX LP-file text for a Model and its cuts.

Columns are written as x<k>, model rows as c<i> and cuts as pc<k>; every
number uses 17 significant digits so a read/write cycle is exact.
Perspective terms follow ``End`` as ``\\ PERSPECTIVE`` comment lines, which
LP readers skip.
"""

import json
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..cuts import Cut
from ..errors import ExternalSolverError
from ..formulation import Model, VarKind
from .simplex import LinearProgram

logger = logging.getLogger(__name__)

SENSE_TOKENS = ("<=", ">=", "=<", "=>", "=", "<", ">")
_NORMAL_SENSE = {"<=": "<=", "=<": "<=", "<": "<=", ">=": ">=", "=>": ">=", ">": ">=", "=": "="}
_SECTIONS = {
    "minimize": "objective",
    "minimise": "objective",
    "minimum": "objective",
    "min": "objective",
    "maximize": "objective",
    "maximise": "objective",
    "maximum": "objective",
    "max": "objective",
    "subject to": "rows",
    "such that": "rows",
    "st": "rows",
    "s.t.": "rows",
    "bounds": "bounds",
    "bound": "bounds",
    "generals": "integers",
    "general": "integers",
    "integers": "integers",
    "binaries": "binaries",
    "binary": "binaries",
    "end": "end",
}


def fmt(value: float) -> str:
    if math.isinf(value):
        return "+inf" if value > 0 else "-inf"
    return f"{value:.17g}"


def _signed(value: float) -> str:
    text = fmt(value)
    return text if text.startswith("-") else f"+{text}"


def _linear(coefs: Iterable[Tuple[int, float]]) -> str:
    parts = [f"{_signed(c)} x{j}" for j, c in coefs if c != 0.0]
    return " ".join(parts) if parts else "0 x0"


def write_lp(model: Model, cuts: Sequence[Cut] = (), relax: bool = False) -> str:
    """LP-file text of the model's linear part plus the given cuts.

    Args:
        model: Model to export
        cuts: Perspective cuts added as extra >= rows
        relax: Omit the integrality section

    Returns:
        The LP-file text, perspective sidecar included
    """
    lines = [
        f"\\ Problem: {model.name or 'model'}",
        f"\\ Formulation: {model.formulation.value} {model.strengthening.value}",
        "Minimize",
        f" obj: {_linear(model.objective)}",
        "Subject To",
    ]
    for i, row in enumerate(model.rows):
        lines.append(f" c{i}: {_linear(row.coefs)} {row.sense} {fmt(row.rhs)}")
    for k, cut in enumerate(cuts):
        coefs, sense, rhs = cut.row(model.terms[cut.term])
        lines.append(f" pc{k}: {_linear(sorted(coefs.items()))} {sense} {fmt(rhs)}")

    lines.append("Bounds")
    for j, v in enumerate(model.variables):
        if v.lower == v.upper:
            lines.append(f" x{j} = {fmt(v.lower)}")
        else:
            lines.append(f" {fmt(v.lower)} <= x{j} <= {fmt(v.upper)}")

    integers = [j for j, v in enumerate(model.variables) if v.kind != VarKind.CONTINUOUS]
    if integers and not relax:
        lines.append("Generals")
        lines.extend(f" x{j}" for j in integers)
    lines.append("End")

    for k, t in enumerate(model.terms):
        record = json.dumps(t.g.to_records(), separators=(",", ":"), sort_keys=True)
        lines.append(
            f"\\ PERSPECTIVE {k} x=x{t.x} y=x{t.y} z=x{t.z} anchor={fmt(t.anchor)} "
            f"q_lo={fmt(t.q_lo)} q_hi={fmt(t.q_hi)} offset={fmt(t.offset_value)} "
            f"mode={t.mode.value} g={record}"
        )
    return "\n".join(lines) + "\n"


@dataclass
class LPFile:
    """Parsed LP-file content."""

    sense: str = "min"
    objective: Dict[str, float] = field(default_factory=dict)
    rows: List[Tuple[str, Dict[str, float], str, float]] = field(default_factory=list)
    bounds: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    integers: List[str] = field(default_factory=list)
    perspective: List[Dict] = field(default_factory=list)

    def columns(self) -> List[str]:
        seen: Dict[str, None] = {}
        for name in self.objective:
            seen.setdefault(name)
        for _, coefs, _, _ in self.rows:
            for name in coefs:
                seen.setdefault(name)
        for name in self.bounds:
            seen.setdefault(name)
        return sorted(seen, key=_column_key)

    def to_linear_program(self) -> Tuple[LinearProgram, List[str]]:
        names = self.columns()
        index = {name: k for k, name in enumerate(names)}
        sign = -1.0 if self.sense == "max" else 1.0
        c = np.zeros(len(names))
        for name, value in self.objective.items():
            c[index[name]] = sign * value
        lower = np.array([self.bounds.get(n, (0.0, math.inf))[0] for n in names])
        upper = np.array([self.bounds.get(n, (0.0, math.inf))[1] for n in names])
        lp = LinearProgram(c, lower, upper)
        for _, coefs, sense, rhs in self.rows:
            lp.add_row({index[n]: v for n, v in coefs.items()}, sense, rhs)
        return lp, names


def _column_key(name: str):
    match = re.fullmatch(r"([A-Za-z_]+)(\d+)", name)
    if match:
        return match.group(1), int(match.group(2))
    return name, -1


def _parse_number(token: str) -> float:
    lowered = token.lower()
    if lowered in ("inf", "+inf", "infinity", "+infinity"):
        return math.inf
    if lowered in ("-inf", "-infinity"):
        return -math.inf
    return float(token)


def _is_number(token: str) -> bool:
    try:
        _parse_number(token)
        return True
    except ValueError:
        return False


def _parse_terms(tokens: List[str]) -> Dict[str, float]:
    coefs: Dict[str, float] = {}
    sign, coef = 1.0, None
    for token in tokens:
        if token in ("+", "-"):
            sign = -sign if token == "-" else sign
            continue
        if _is_number(token):
            coef = _parse_number(token)
            continue
        value = sign * (1.0 if coef is None else coef)
        coefs[token] = coefs.get(token, 0.0) + value
        sign, coef = 1.0, None
    return coefs


def _tokenize(text: str) -> List[str]:
    spaced = re.sub(r"(<=|>=|=<|=>)", r" \1 ", text)
    spaced = re.sub(r"(?<![<>=])([<>]?=|[<>])(?![<>=])", r" \1 ", spaced)
    return spaced.split()


def _parse_perspective(line: str) -> Dict:
    body = line.split("PERSPECTIVE", 1)[1].strip()
    head, _, g = body.partition(" g=")
    parts = head.split()
    record: Dict = {"term": int(parts[0])}
    for part in parts[1:]:
        key, _, value = part.partition("=")
        record[key] = value if key in ("x", "y", "z", "mode") else _parse_number(value)
    record["g"] = json.loads(g)
    return record


def read_lp(text: str) -> LPFile:
    """Parse the LP subset write_lp emits (plus common spelling variants).

    Raises:
        ExternalSolverError: on malformed rows or bounds
    """
    out = LPFile()
    section = None
    pending: List[str] = []
    pending_name: Optional[str] = None

    def flush_row():
        nonlocal pending, pending_name
        if not pending:
            return
        senses = [k for k, tok in enumerate(pending) if tok in SENSE_TOKENS]
        if not senses:
            raise ExternalSolverError(f"row {pending_name} has no sense: {' '.join(pending)}")
        k = senses[0]
        if k + 1 >= len(pending):
            raise ExternalSolverError(f"row {pending_name} has no right-hand side")
        coefs = _parse_terms(pending[:k])
        rhs = _parse_number(pending[k + 1])
        out.rows.append((pending_name or f"r{len(out.rows)}", coefs, _NORMAL_SENSE[pending[k]], rhs))
        pending, pending_name = [], None

    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            if "PERSPECTIVE" in line:
                out.perspective.append(_parse_perspective(line))
            continue
        lowered = line.lower()
        if lowered in _SECTIONS:
            flush_row()
            section = _SECTIONS[lowered]
            if section == "objective":
                out.sense = "max" if lowered.startswith("max") else "min"
            continue

        if section == "objective":
            if ":" in line:
                line = line.split(":", 1)[1]
            for name, value in _parse_terms(_tokenize(line)).items():
                out.objective[name] = out.objective.get(name, 0.0) + value
        elif section == "rows":
            if ":" in line and not pending:
                pending_name, line = (part.strip() for part in line.split(":", 1))
            pending.extend(_tokenize(line))
            if any(tok in SENSE_TOKENS for tok in pending[:-1]) and _is_number(pending[-1]):
                flush_row()
        elif section == "bounds":
            _parse_bound(_tokenize(line), out)
        elif section in ("integers", "binaries"):
            for name in line.split():
                out.integers.append(name)
                if section == "binaries":
                    out.bounds[name] = (0.0, 1.0)
    flush_row()
    return out


def _parse_bound(tokens: List[str], out: LPFile) -> None:
    if len(tokens) == 2 and tokens[1].lower() == "free":
        out.bounds[tokens[0]] = (-math.inf, math.inf)
        return
    if len(tokens) == 5:
        lo, _, name, _, hi = tokens
        out.bounds[name] = (_parse_number(lo), _parse_number(hi))
        return
    if len(tokens) == 3:
        a, sense, b = tokens
        sense = _NORMAL_SENSE.get(sense)
        if _is_number(a):
            a, b = b, a
            sense = {"<=": ">=", ">=": "<=", "=": "="}[sense]
        lo, hi = out.bounds.get(a, (0.0, math.inf))
        value = _parse_number(b)
        if sense == "=":
            lo = hi = value
        elif sense == "<=":
            hi = value
        else:
            lo = value
        out.bounds[a] = (lo, hi)
        return
    raise ExternalSolverError(f"unreadable bound: {' '.join(tokens)}")
