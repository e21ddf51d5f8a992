"""
Incremental, Multiple-Choice and Convex-Combination models of
piecewise-convex separable MINLPs.

A ``SeparableProblem`` holds linear rows plus univariate terms g_ij(x_j).
The builders replace each term by segment variables: load x^s, indicator
y^s and, on convex segments, an epigraph variable z^s governed by a
``PerspectiveTerm``. Concave segments enter the rows through their secants.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .errors import FormulationError
from .univariate import PiecewiseDecomposition, UnivariateFunction, decompose

logger = logging.getLogger(__name__)

FEAS_TOL = 1e-7


class Formulation(str, Enum):
    IM = "im"
    MCM = "mcm"
    CCM = "ccm"


class Strengthening(str, Enum):
    PLAIN = "plain"
    PERSPECTIVE = "perspective"


class TermMode(str, Enum):
    """How a convex-segment term is linearised.

    PERSPECTIVE: z >= y [g(anchor + x/y) - g(anchor)]
    TANGENT:     z >= g(anchor + x) - g(anchor), y-free (plain IM)
    BIG_M:       z >= g(x) - g(0) when y = 1, switched off by big-M (plain MCM)
    """

    PERSPECTIVE = "perspective"
    TANGENT = "tangent"
    BIG_M = "big_m"


class VarKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"
    INTEGER = "integer"


# ---------------------------------------------------------------------------
# Problem
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NonlinearTerm:
    var: int
    g: UnivariateFunction
    decomposition: Optional[PiecewiseDecomposition] = None


@dataclass(frozen=True)
class ProblemConstraint:
    """sum coefs[j] x_j + sum g(x_j) (sense) rhs. Nonlinear rows are always <=."""

    coefs: Tuple[Tuple[int, float], ...]
    terms: Tuple[NonlinearTerm, ...] = ()
    sense: str = "<="
    rhs: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.sense not in ("<=", "="):
            raise FormulationError(f"unsupported sense {self.sense!r}")
        if self.terms and self.sense != "<=":
            raise FormulationError(f"nonlinear row {self.name} must be <=")


@dataclass(frozen=True)
class SeparableProblem:
    """min/max c.x  s.t.  linear(x) + sum_j g_ij(x_j) <= b_i,  l <= x <= u."""

    var_names: Tuple[str, ...]
    objective_coeffs: Tuple[float, ...]
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    constraints: Tuple[ProblemConstraint, ...]
    integer_set: FrozenSet[int] = frozenset()
    maximize: bool = False
    name: str = ""

    def __post_init__(self):
        n = len(self.var_names)
        if not (len(self.objective_coeffs) == len(self.lower) == len(self.upper) == n):
            raise FormulationError("inconsistent variable dimensions")
        for c in self.constraints:
            for t in c.terms:
                if not (np.isfinite(self.lower[t.var]) and np.isfinite(self.upper[t.var])):
                    raise FormulationError(
                        f"{self.var_names[t.var]} appears in {c.name} but has infinite bounds"
                    )

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def objective_sign(self) -> float:
        return -1.0 if self.maximize else 1.0

    def nonlinear_vars(self) -> List[int]:
        return sorted({t.var for c in self.constraints for t in c.terms})

    def objective_value(self, x: Sequence[float]) -> float:
        """Objective in the problem's own orientation."""
        return float(np.dot(self.objective_coeffs, np.asarray(x, dtype=float)[: self.n_vars]))

    def is_feasible(self, x: Sequence[float], tol: float = FEAS_TOL, relaxed: bool = False) -> bool:
        """Check bounds, integrality and every row with exact (or relaxed) g."""
        return self.max_violation(x, relaxed=relaxed) <= tol

    def row_value(self, i: int, x: Sequence[float], relaxed: bool = False) -> float:
        from .univariate import relaxed_eval

        c = self.constraints[i]
        total = sum(coef * x[j] for j, coef in c.coefs)
        for t in c.terms:
            if relaxed:
                total += float(relaxed_eval(t.g, t.decomposition, x[t.var]))
            else:
                total += float(t.g(x[t.var]))
        return total

    def max_violation(self, x: Sequence[float], relaxed: bool = False) -> float:
        x = np.asarray(x, dtype=float)
        worst = 0.0
        worst = max(worst, float(np.max(np.asarray(self.lower) - x, initial=0.0)))
        worst = max(worst, float(np.max(x - np.asarray(self.upper), initial=0.0)))
        for j in self.integer_set:
            worst = max(worst, abs(x[j] - round(x[j])))
        for i, c in enumerate(self.constraints):
            value = self.row_value(i, x, relaxed=relaxed) - c.rhs
            worst = max(worst, abs(value) if c.sense == "=" else value)
        return worst


def decomposed(
    p: SeparableProblem, grid_n: int = 512, root_tol: float = 1e-10
) -> SeparableProblem:
    """Return p with a decomposition attached to every nonlinear term.

    Identical (g, l, u) triples share one decomposition.
    """
    cache: Dict[Tuple, PiecewiseDecomposition] = {}
    constraints = []
    for c in p.constraints:
        terms = []
        for t in c.terms:
            if t.decomposition is None:
                key = (t.g, p.lower[t.var], p.upper[t.var])
                if key not in cache:
                    cache[key] = decompose(
                        t.g, p.lower[t.var], p.upper[t.var], grid_n=grid_n, root_tol=root_tol
                    )
                t = replace(t, decomposition=cache[key])
            terms.append(t)
        constraints.append(replace(c, terms=tuple(terms)))
    return replace(p, constraints=tuple(constraints))


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Variable:
    name: str
    kind: VarKind
    lower: float
    upper: float
    fixed: bool = False


@dataclass(frozen=True)
class LinearRow:
    coefs: Tuple[Tuple[int, float], ...]
    sense: str
    rhs: float
    name: str = ""

    def activity(self, values: np.ndarray) -> float:
        return float(sum(c * values[j] for j, c in self.coefs))

    def violation(self, values: np.ndarray) -> float:
        lhs = self.activity(values)
        if self.sense == "<=":
            return max(0.0, lhs - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


@dataclass(frozen=True)
class PerspectiveTerm:
    """Convex-segment term z >= y [g(anchor + x/y) - g(anchor)] (or its plain form).

    The per-unit domain [q_lo, q_hi] is the segment [l^s, l^{s+1}]; the point
    reached by (x, y) is anchor + x / y (anchor + x in TANGENT mode).
    """

    g: UnivariateFunction
    anchor: float
    q_lo: float
    q_hi: float
    x: int
    y: int
    z: int
    offset_value: float
    mode: TermMode = TermMode.PERSPECTIVE
    name: str = ""

    def __post_init__(self):
        if not self.q_lo < self.q_hi:
            raise FormulationError(f"empty per-unit domain for {self.name}")

    def point(self, x: float, y: float) -> float:
        if self.mode == TermMode.TANGENT:
            return self.anchor + x
        return self.anchor + x / y

    def value(self, x: float, y: float, eps: float = 1e-12) -> float:
        """Exact value of the nonlinear term at (x, y)."""
        if self.mode == TermMode.TANGENT:
            return float(self.g(self.anchor + x)) - self.offset_value
        if y <= eps:
            return 0.0
        q = self.anchor + x / y
        return y * (float(self.g(q)) - self.offset_value)


@dataclass(frozen=True)
class SegmentBlock:
    """Variables of one (i, j) pair; lists are indexed by segment s (0-based)."""

    constraint: int
    var: int
    decomposition: PiecewiseDecomposition
    x: Tuple[int, ...]
    y: Tuple[int, ...]
    z: Dict[int, int]
    terms: Dict[int, int]
    row: int
    constant: float
    mu: Dict[int, int] = field(default_factory=dict)
    lam: Dict[int, int] = field(default_factory=dict)

    @property
    def g(self) -> UnivariateFunction:
        return self.decomposition.function

    def variables(self) -> List[int]:
        out = list(self.x) + list(self.y) + list(self.z.values())
        return out + list(self.mu.values()) + list(self.lam.values())


@dataclass(frozen=True)
class Model:
    """Convex MI model: linear rows + perspective terms + binaries (minimisation)."""

    formulation: Formulation
    strengthening: Strengthening
    variables: Tuple[Variable, ...]
    rows: Tuple[LinearRow, ...]
    terms: Tuple[PerspectiveTerm, ...]
    objective: Tuple[Tuple[int, float], ...]
    objective_sign: float
    blocks: Tuple[SegmentBlock, ...]
    n_original: int
    constraint_rows: Tuple[int, ...]
    name: str = ""

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def tag(self) -> str:
        suffix = "" if self.strengthening == Strengthening.PERSPECTIVE else "-plain"
        return f"{self.formulation.value}{suffix}"

    def var_index(self, name: str) -> int:
        for k, v in enumerate(self.variables):
            if v.name == name:
                return k
        raise KeyError(name)

    def integer_vars(self) -> List[int]:
        return [
            k
            for k, v in enumerate(self.variables)
            if v.kind != VarKind.CONTINUOUS and v.lower < v.upper
        ]

    def objective_value(self, values: np.ndarray) -> float:
        return float(sum(c * values[j] for j, c in self.objective))

    def max_violation(self, values: np.ndarray, integral: bool = False) -> float:
        """Largest bound, row or term violation at values."""
        values = np.asarray(values, dtype=float)
        worst = 0.0
        for k, v in enumerate(self.variables):
            worst = max(worst, v.lower - values[k], values[k] - v.upper)
            if integral and v.kind != VarKind.CONTINUOUS:
                worst = max(worst, abs(values[k] - round(values[k])))
        for row in self.rows:
            worst = max(worst, row.violation(values))
        for t in self.terms:
            worst = max(worst, t.value(values[t.x], values[t.y]) - values[t.z])
        return worst


@dataclass
class Assignment:
    """Dense value per model variable and the (internal, minimisation) objective."""

    values: np.ndarray
    objective: float

    @classmethod
    def of(cls, model: Model, values: Sequence[float]) -> "Assignment":
        arr = np.asarray(values, dtype=float)
        return cls(arr, model.objective_value(arr))


class _ModelBuilder:
    def __init__(self, p: SeparableProblem, formulation: Formulation, strengthening: Strengthening):
        self.p = p
        self.formulation = formulation
        self.strengthening = strengthening
        self.variables: List[Variable] = []
        self.rows: List[LinearRow] = []
        self.terms: List[PerspectiveTerm] = []
        self.blocks: List[SegmentBlock] = []
        self.constraint_rows: List[int] = []

        for j, name in enumerate(p.var_names):
            if j in p.integer_set:
                binary = p.lower[j] >= 0.0 and p.upper[j] <= 1.0
                kind = VarKind.BINARY if binary else VarKind.INTEGER
            else:
                kind = VarKind.CONTINUOUS
            self.add_var(name, kind, p.lower[j], p.upper[j])

    def add_var(self, name, kind, lower, upper, fixed=False) -> int:
        self.variables.append(Variable(name, kind, float(lower), float(upper), fixed))
        return len(self.variables) - 1

    def add_row(self, coefs: Dict[int, float], sense: str, rhs: float, name: str) -> int:
        packed = tuple((j, float(c)) for j, c in coefs.items() if c != 0.0)
        self.rows.append(LinearRow(packed, sense, float(rhs), name))
        return len(self.rows) - 1

    def add_z(self, tag: str, g: UnivariateFunction, anchor: float, a: float, b: float) -> int:
        lower, upper = _z_bounds(g, anchor, a, b)
        return self.add_var(f"z{tag}", VarKind.CONTINUOUS, lower, upper)

    def add_term(self, tag, g, anchor, a, b, x, y, z, mode) -> int:
        self.terms.append(
            PerspectiveTerm(g, float(anchor), float(a), float(b), x, y, z, float(g(anchor)), mode, f"t{tag}")
        )
        return len(self.terms) - 1

    def build(self, name: str) -> Model:
        sign = self.p.objective_sign
        objective = tuple(
            (j, sign * c) for j, c in enumerate(self.p.objective_coeffs) if c != 0.0
        )
        return Model(
            formulation=self.formulation,
            strengthening=self.strengthening,
            variables=tuple(self.variables),
            rows=tuple(self.rows),
            terms=tuple(self.terms),
            objective=objective,
            objective_sign=sign,
            blocks=tuple(self.blocks),
            n_original=self.p.n_vars,
            constraint_rows=tuple(self.constraint_rows),
            name=name,
        )


def _z_bounds(g: UnivariateFunction, anchor: float, a: float, b: float) -> Tuple[float, float]:
    q = np.linspace(a, b, 65)
    vals = np.asarray(g(q)) - float(g(anchor))
    slope = float(np.max(np.abs(np.asarray(g(q, 1)))))
    margin = max(1e-6, 0.01 * float(np.ptp(vals)) + slope * (b - a) / 64.0)
    return min(0.0, float(vals.min())) - margin, max(0.0, float(vals.max())) + margin


def _require_decomposition(p: SeparableProblem, i: int, t: NonlinearTerm) -> PiecewiseDecomposition:
    d = t.decomposition
    if d is None:
        raise FormulationError(
            f"missing decomposition for {p.var_names[t.var]} in constraint {i}"
        )
    if d.s_count == 0:
        raise FormulationError(f"no segments for {p.var_names[t.var]} in constraint {i}")
    return d


def _im_block(b: _ModelBuilder, i: int, t: NonlinearTerm, d, row_coefs, fix_first: bool):
    j, g = t.var, t.g
    S = d.s_count
    pts = d.breakpoints
    lengths = [pts[s + 1] - pts[s] for s in range(S)]
    mode = TermMode.PERSPECTIVE if b.strengthening == Strengthening.PERSPECTIVE else TermMode.TANGENT

    xs = [b.add_var(f"x[{i},{j},{s + 1}]", VarKind.CONTINUOUS, 0.0, lengths[s]) for s in range(S)]
    ys = []
    for s in range(S):
        if s == 0 and fix_first:
            ys.append(b.add_var(f"y[{i},{j},1]", VarKind.BINARY, 1.0, 1.0, fixed=True))
        else:
            ys.append(b.add_var(f"y[{i},{j},{s + 1}]", VarKind.BINARY, 0.0, 1.0))

    link = {j: 1.0}
    for x in xs:
        link[x] = -1.0
    b.add_row(link, "=", pts[0], f"link[{i},{j}]")
    for s in range(S):
        b.add_row({xs[s]: 1.0, ys[s]: -lengths[s]}, "<=", 0.0, f"fill_ub[{i},{j},{s + 1}]")
        if s + 1 < S:
            # y^{S+1} = 0 is implicit: the last segment has no lower fill row
            b.add_row({ys[s + 1]: lengths[s], xs[s]: -1.0}, "<=", 0.0, f"fill_lb[{i},{j},{s + 1}]")

    zs, terms = {}, {}
    for s in range(S):
        tag = f"[{i},{j},{s + 1}]"
        if d.is_convex(s):
            zs[s] = b.add_z(tag, g, pts[s], pts[s], pts[s + 1])
            terms[s] = b.add_term(tag, g, pts[s], pts[s], pts[s + 1], xs[s], ys[s], zs[s], mode)
            row_coefs[zs[s]] = row_coefs.get(zs[s], 0.0) + 1.0
        else:
            row_coefs[xs[s]] = row_coefs.get(xs[s], 0.0) + d.secant_slopes[s]
    constant = float(g(pts[0]))
    return SegmentBlock(i, j, d, tuple(xs), tuple(ys), zs, terms, -1, constant)


def _choice_block(b: _ModelBuilder, i: int, t: NonlinearTerm, d, row_coefs, convex_combination: bool):
    j, g = t.var, t.g
    S = d.s_count
    pts = d.breakpoints
    g0 = float(g(0.0))
    if b.strengthening == Strengthening.PERSPECTIVE:
        mode = TermMode.PERSPECTIVE
    else:
        mode = TermMode.BIG_M

    xs = [
        b.add_var(
            f"x[{i},{j},{s + 1}]", VarKind.CONTINUOUS, min(0.0, pts[s]), max(0.0, pts[s + 1])
        )
        for s in range(S)
    ]
    ys = [b.add_var(f"y[{i},{j},{s + 1}]", VarKind.BINARY, 0.0, 1.0) for s in range(S)]

    link = {j: 1.0}
    for x in xs:
        link[x] = -1.0
    b.add_row(link, "=", 0.0, f"link[{i},{j}]")

    mu, lam = {}, {}
    for s in range(S):
        if convex_combination:
            mu[s] = b.add_var(f"mu[{i},{j},{s + 1}]", VarKind.CONTINUOUS, 0.0, 1.0)
            lam[s] = b.add_var(f"lam[{i},{j},{s + 1}]", VarKind.CONTINUOUS, 0.0, 1.0)
            b.add_row(
                {xs[s]: 1.0, mu[s]: -pts[s], lam[s]: -pts[s + 1]}, "=", 0.0, f"combo[{i},{j},{s + 1}]"
            )
            b.add_row({ys[s]: 1.0, mu[s]: -1.0, lam[s]: -1.0}, "=", 0.0, f"weight[{i},{j},{s + 1}]")
        else:
            b.add_row({ys[s]: pts[s], xs[s]: -1.0}, "<=", 0.0, f"seg_lb[{i},{j},{s + 1}]")
            b.add_row({xs[s]: 1.0, ys[s]: -pts[s + 1]}, "<=", 0.0, f"seg_ub[{i},{j},{s + 1}]")
    b.add_row({y: 1.0 for y in ys}, "=", 1.0, f"choice[{i},{j}]")

    zs, terms = {}, {}
    for s in range(S):
        tag = f"[{i},{j},{s + 1}]"
        if d.is_convex(s):
            zs[s] = b.add_z(tag, g, 0.0, pts[s], pts[s + 1])
            terms[s] = b.add_term(tag, g, 0.0, pts[s], pts[s + 1], xs[s], ys[s], zs[s], mode)
            row_coefs[zs[s]] = row_coefs.get(zs[s], 0.0) + 1.0
            row_coefs[ys[s]] = row_coefs.get(ys[s], 0.0) + g0
        else:
            alpha = d.secant_slopes[s]
            row_coefs[xs[s]] = row_coefs.get(xs[s], 0.0) + alpha
            row_coefs[ys[s]] = row_coefs.get(ys[s], 0.0) + float(g(pts[s])) - alpha * pts[s]
    return SegmentBlock(i, j, d, tuple(xs), tuple(ys), zs, terms, -1, 0.0, mu, lam)


def _build(p: SeparableProblem, formulation: Formulation, strengthening: Strengthening, fix_first: bool = True) -> Model:
    b = _ModelBuilder(p, formulation, strengthening)
    for i, c in enumerate(p.constraints):
        row_coefs: Dict[int, float] = {j: coef for j, coef in c.coefs}
        blocks = []
        for t in c.terms:
            d = _require_decomposition(p, i, t)
            if formulation == Formulation.IM:
                blocks.append(_im_block(b, i, t, d, row_coefs, fix_first))
            else:
                blocks.append(
                    _choice_block(b, i, t, d, row_coefs, formulation == Formulation.CCM)
                )
        constant = sum(blk.constant for blk in blocks)
        row = b.add_row(row_coefs, c.sense, c.rhs - constant, c.name or f"c[{i}]")
        b.constraint_rows.append(row)
        b.blocks.extend(replace(blk, row=row) for blk in blocks)

    model = b.build(p.name)
    logger.debug(
        f"built {model.tag} for {p.name or 'problem'}: {model.n_vars} variables, "
        f"{len(model.rows)} rows, {len(model.terms)} perspective terms"
    )
    return model


def build_im(p: SeparableProblem, strengthened: bool = True, fix_first: bool = True) -> Model:
    """Incremental Model; y^1 is fixed to 1 unless fix_first is False."""
    strengthening = Strengthening.PERSPECTIVE if strengthened else Strengthening.PLAIN
    return _build(p, Formulation.IM, strengthening, fix_first=fix_first)


def build_mcm(p: SeparableProblem, strengthened: bool = True) -> Model:
    """Multiple-Choice Model."""
    strengthening = Strengthening.PERSPECTIVE if strengthened else Strengthening.PLAIN
    return _build(p, Formulation.MCM, strengthening)


def build_ccm(p: SeparableProblem) -> Model:
    """Convex-Combination Model (always perspective-strengthened)."""
    return _build(p, Formulation.CCM, Strengthening.PERSPECTIVE)


def build_model(p: SeparableProblem, formulation: Formulation, strengthened: bool = True) -> Model:
    formulation = Formulation(formulation)
    if formulation == Formulation.IM:
        return build_im(p, strengthened)
    if formulation == Formulation.MCM:
        return build_mcm(p, strengthened)
    if not strengthened:
        logger.warning("CCM has no plain variant; building the perspective model")
    return build_ccm(p)


def free_binary_count(model: Model) -> int:
    return sum(
        1
        for blk in model.blocks
        for y in blk.y
        if not model.variables[y].fixed
    )


def block_contribution(model: Model, values: np.ndarray, block: SegmentBlock) -> float:
    """What an (i, j) block adds to its constraint row at values."""
    owned = set(block.variables())
    row = model.rows[block.row]
    return block.constant + sum(c * values[j] for j, c in row.coefs if j in owned)


# ---------------------------------------------------------------------------
# Solution mappings
# ---------------------------------------------------------------------------


def _check_blocks_match(m_from: Model, m_to: Model) -> None:
    if len(m_from.blocks) != len(m_to.blocks) or m_from.n_original != m_to.n_original:
        raise FormulationError("models were not built from the same problem")


def map_mcm_to_ccm(
    a: Assignment, m_mcm: Model, m_ccm: Model, feas_tol: float = FEAS_TOL
) -> Assignment:
    """Convex-combination weights mu = (l^{s+1} y - x)/(l^{s+1} - l^s), lam = (x - l^s y)/(...)."""
    _check_blocks_match(m_mcm, m_ccm)
    src = np.asarray(a.values, dtype=float)
    out = np.zeros(m_ccm.n_vars)
    out[: m_mcm.n_original] = src[: m_mcm.n_original]
    for bm, bc in zip(m_mcm.blocks, m_ccm.blocks):
        pts = bm.decomposition.breakpoints
        for s in range(bm.decomposition.s_count):
            x, y = src[bm.x[s]], src[bm.y[s]]
            lo, hi = pts[s], pts[s + 1]
            if x < lo * y - feas_tol or x > hi * y + feas_tol:
                raise FormulationError(
                    f"x^{s + 1}={x} outside [{lo * y}, {hi * y}] in block ({bm.constraint}, {bm.var})"
                )
            out[bc.x[s]] = x
            out[bc.y[s]] = y
            out[bc.mu[s]] = (hi * y - x) / (hi - lo)
            out[bc.lam[s]] = (x - lo * y) / (hi - lo)
            if s in bm.z:
                out[bc.z[s]] = src[bm.z[s]]
    return Assignment.of(m_ccm, out)


def map_im_to_mcm(
    a: Assignment, m_im: Model, m_mcm: Model, feas_tol: float = 1e-6
) -> Assignment:
    """Telescoping map y^s = psi^s - psi^{s+1}, x^s = phi^s + l^s psi^s - l^{s+1} psi^{s+1}.

    z^s is recomputed from the perspective formula at the mapped point.
    """
    _check_blocks_match(m_im, m_mcm)
    src = np.asarray(a.values, dtype=float)
    violation = m_im.max_violation(src)
    if violation > feas_tol:
        raise FormulationError(f"input assignment violates the IM model by {violation:.3g}")

    out = np.zeros(m_mcm.n_vars)
    out[: m_im.n_original] = src[: m_im.n_original]
    for bi, bm in zip(m_im.blocks, m_mcm.blocks):
        d = bi.decomposition
        pts = d.breakpoints
        S = d.s_count
        psi = [src[bi.y[s]] for s in range(S)] + [0.0]
        phi = [src[bi.x[s]] for s in range(S)]
        for s in range(S):
            y = max(0.0, psi[s] - psi[s + 1])
            x = phi[s] + pts[s] * psi[s] - pts[s + 1] * psi[s + 1]
            out[bm.y[s]] = y
            out[bm.x[s]] = x
            if s in bm.z:
                out[bm.z[s]] = m_mcm.terms[bm.terms[s]].value(x, y)
    return Assignment.of(m_mcm, out)
