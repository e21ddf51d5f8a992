"""
Brute-force ground truth: grid convex-hull envelopes, relaxation profiles,
tangency bisection and exhaustive grid search over tiny problems.

Nothing here shares code with the LP engine beyond building the model whose
profile is measured, so the checks stay independent.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import DomainError, InfeasibleLPError, OracleError
from .formulation import (
    Formulation,
    Model,
    NonlinearTerm,
    ProblemConstraint,
    SeparableProblem,
    build_model,
)
from .solver.config import SolveConfig
from .solver.relaxation import add_initial_cuts, cutting_plane_loop, model_to_lp
from .solver.simplex import LPStatus
from .cuts import CutPool
from .univariate import PiecewiseDecomposition, UnivariateFunction, named_function, relaxed_eval

logger = logging.getLogger(__name__)

DEFAULT_ENVELOPE_SAMPLES = 4096
DEFAULT_PROFILE_POINTS = 101
MIN_ENVELOPE_SAMPLES = 64
TANGENCY_TOL = 1e-12
MAX_GRID_DIM = 3
MAX_INTEGER_VARS = 2
MAX_GRID_N = 10_000
MAX_GRID_POINTS = 50_000_000
CHUNK = 1_000_000
REFINE_POINTS = 21


# ---------------------------------------------------------------------------
# Envelope
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnvelopeOracle:
    """Lower convex hull of sampled relaxed values, evaluated by interpolation."""

    samples: int
    vertices: Tuple[Tuple[float, float], ...]

    @property
    def xs(self) -> np.ndarray:
        return np.array([v[0] for v in self.vertices])

    @property
    def values(self) -> np.ndarray:
        return np.array([v[1] for v in self.vertices])

    def __call__(self, x):
        out = np.interp(np.asarray(x, dtype=float), self.xs, self.values)
        return float(out) if np.ndim(out) == 0 else out

    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.xs)


def lower_hull(xs: np.ndarray, ys: np.ndarray) -> List[Tuple[float, float]]:
    """Monotone-chain lower hull of points sorted by x."""
    hull: List[Tuple[float, float]] = []
    for x, y in zip(xs, ys):
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point unless it turns counter-clockwise
            if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) <= 0.0:
                hull.pop()
            else:
                break
        hull.append((float(x), float(y)))
    return hull


def envelope(
    f: UnivariateFunction, d: PiecewiseDecomposition, samples: int = DEFAULT_ENVELOPE_SAMPLES
) -> EnvelopeOracle:
    """Convex envelope of the piecewise-convex relaxation of f on d's domain."""
    if samples < MIN_ENVELOPE_SAMPLES:
        raise OracleError(f"envelope needs at least {MIN_ENVELOPE_SAMPLES} samples, got {samples}")
    xs = np.linspace(d.lower, d.upper, samples)
    ys = np.asarray(relaxed_eval(f, d, xs), dtype=float)
    return EnvelopeOracle(samples, tuple(lower_hull(xs, ys)))


def tangent_point(
    f: UnivariateFunction,
    px: float,
    py: float,
    lo: float,
    hi: float,
    tol: float = TANGENCY_TOL,
) -> float:
    """t in [lo, hi] where the tangent of f at t passes through (px, py).

    Solves f(t) + f'(t) (px - t) = py by bisection.

    Raises:
        OracleError: if the condition does not change sign on [lo, hi]
    """

    def residual(t: float) -> float:
        return float(f(t)) + float(f(t, 1)) * (px - t) - py

    r_lo, r_hi = residual(lo), residual(hi)
    if r_lo == 0.0:
        return lo
    if r_hi == 0.0:
        return hi
    if math.copysign(1.0, r_lo) == math.copysign(1.0, r_hi):
        raise OracleError(f"no tangency on [{lo}, {hi}] through ({px}, {py})")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        r_mid = residual(mid)
        if math.copysign(1.0, r_mid) == math.copysign(1.0, r_lo):
            lo, r_lo = mid, r_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def neg_sin_envelope(x):
    """Envelope of the relaxed -sin on [0, 2pi]: -sin up to t*, then the line to (2pi, 0)."""
    g = named_function("neg-sin")[0]
    t = tangent_point(g, 2.0 * math.pi, 0.0, 0.5 * math.pi, math.pi)
    arr = np.asarray(x, dtype=float)
    line = -math.sin(t) - math.cos(t) * (arr - t)
    out = np.where(arr <= t, -np.sin(arr), line)
    return float(out) if np.ndim(out) == 0 else out


def neg_sin_im_profile(x):
    """Incremental-model relaxation of -sin on [0, 2pi] with the first binary fixed.

    -sin(x) on [0, pi/2], -1 on [pi/2, pi], -sin(x/2) on [pi, 2pi].
    """
    arr = np.asarray(x, dtype=float)
    out = np.where(arr <= 0.5 * math.pi, -np.sin(arr), np.where(arr <= math.pi, -1.0, -np.sin(0.5 * arr)))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Relaxation profiles
# ---------------------------------------------------------------------------


def profile_problem(
    f: UnivariateFunction, d: PiecewiseDecomposition, name: str = "profile"
) -> SeparableProblem:
    """min t  s.t.  f(x) - t <= 0 on d's domain; variable 0 is x."""
    values = np.asarray(f(np.linspace(d.lower, d.upper, 1025)))
    margin = 1.0 + 0.05 * float(np.ptp(values))
    return SeparableProblem(
        var_names=("x", "t"),
        objective_coeffs=(0.0, 1.0),
        lower=(d.lower, float(values.min()) - margin),
        upper=(d.upper, float(values.max()) + margin),
        constraints=(ProblemConstraint(((1, -1.0),), (NonlinearTerm(0, f, d),), "<=", 0.0, "epigraph"),),
        name=name,
    )


def profile_point(m: Model, x_fixed: float, cfg: Optional[SolveConfig] = None) -> float:
    """Root relaxation bound of m with the row x = x_fixed added.

    Raises:
        DomainError: if x_fixed is outside the variable's bounds
        OracleError: if m has more than one nonlinear variable
    """
    cfg = cfg or SolveConfig()
    nonlinear = {blk.var for blk in m.blocks}
    if len(nonlinear) != 1:
        raise OracleError(f"profile needs one nonlinear variable, model has {len(nonlinear)}")
    j = nonlinear.pop()
    v = m.variables[j]
    if not (v.lower - 1e-12 <= x_fixed <= v.upper + 1e-12):
        raise DomainError(f"{v.name}={x_fixed} outside [{v.lower}, {v.upper}]")

    pool = CutPool()
    lp = model_to_lp(m)
    lp.add_row({j: 1.0}, "=", float(x_fixed))
    add_initial_cuts(m, lp, pool, cfg.initial_cut_k)
    result = cutting_plane_loop(m, lp, pool, cfg, cfg.max_root_rounds)
    if result.status == LPStatus.INFEASIBLE:
        raise InfeasibleLPError(f"{m.tag} relaxation infeasible at {v.name}={x_fixed}")
    if result.status != LPStatus.OPTIMAL:
        raise OracleError(f"{m.tag} relaxation ended {result.status.value} at {v.name}={x_fixed}")
    return m.objective_sign * result.bound


def relaxation_profile(
    f: UnivariateFunction,
    d: PiecewiseDecomposition,
    formulation: Union[Formulation, str],
    xs: Optional[Sequence[float]] = None,
    cfg: Optional[SolveConfig] = None,
    strengthened: bool = True,
) -> np.ndarray:
    """profile_point of the single-function model over a grid (101 points by default)."""
    if xs is None:
        xs = np.linspace(d.lower, d.upper, DEFAULT_PROFILE_POINTS)
    model = build_model(profile_problem(f, d), Formulation(formulation), strengthened)
    return np.array([profile_point(model, float(x), cfg) for x in xs])


def export_series(path: Union[str, Path], x: Sequence[float], **columns: Sequence[float]) -> Path:
    """Write x plus named value columns as CSV for the plotter."""
    frame = pd.DataFrame({"x": np.asarray(x, dtype=float)})
    for name, values in columns.items():
        frame[name] = np.asarray(values, dtype=float)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


# ---------------------------------------------------------------------------
# Brute-force MINLP
# ---------------------------------------------------------------------------


@dataclass
class BruteForceResult:
    """Grid optimum in the problem's orientation (None when infeasible)."""

    objective: Optional[float]
    point: Optional[np.ndarray]
    error_bound: float = 0.0
    infeasible: bool = False
    evaluated: int = 0

    def __iter__(self):
        return iter((self.objective, self.point))


@dataclass
class _Component:
    free: List[int] = field(default_factory=list)
    rows: List[int] = field(default_factory=list)
    dependents: List[int] = field(default_factory=list)
    aux: List[int] = field(default_factory=list)


class _GridSearch:
    """Exhaustive search with integer values fixed to one pattern."""

    def __init__(self, p: SeparableProblem, fixed: Dict[int, float], grid_n: int, relaxed: bool):
        self.p = p
        self.fixed = fixed
        self.grid_n = grid_n
        self.relaxed = relaxed
        self.cost = p.objective_sign * np.asarray(p.objective_coeffs, dtype=float)
        self.lower = np.asarray(p.lower, dtype=float).copy()
        self.upper = np.asarray(p.upper, dtype=float).copy()
        for j, v in fixed.items():
            self.lower[j] = self.upper[j] = v
        self.base = np.where(np.isfinite(self.lower), self.lower, 0.0)
        self.aux: Dict[int, Tuple[int, float]] = {}
        self.dependents: Dict[int, Tuple[int, float]] = {}
        self.order: List[int] = []
        self._classify()

    # -- structure --------------------------------------------------------

    def _rows_of(self) -> Dict[int, List[int]]:
        rows: Dict[int, List[int]] = {j: [] for j in range(self.p.n_vars)}
        for i, c in enumerate(self.p.constraints):
            for j in {j for j, _ in c.coefs} | {t.var for t in c.terms}:
                rows[j].append(i)
        return rows

    def _classify(self) -> None:
        p = self.p
        rows_of = self._rows_of()
        nonlinear = set(p.nonlinear_vars())
        for j in range(p.n_vars):
            if j in self.fixed or j in nonlinear or self.cost[j] == 0.0 or len(rows_of[j]) != 1:
                continue
            i = rows_of[j][0]
            c = p.constraints[i]
            a = dict(c.coefs).get(j, 0.0)
            if c.sense == "<=" and a * self.cost[j] < 0.0:
                self.aux[j] = (i, a)

        referenced: set = set()
        for i, c in enumerate(p.constraints):
            if c.sense != "=" or c.terms:
                continue
            names = [j for j, a in c.coefs if a != 0.0]
            if any(j in self.aux for j in names):
                continue
            candidates = [
                j for j in names if self._is_free(j) and j not in referenced and j not in self.dependents
            ]
            if not candidates:
                continue
            dep = candidates[-1]
            self.dependents[dep] = (i, dict(c.coefs)[dep])
            self.order.append(dep)
            referenced.update(j for j in names if j != dep)

        self.free = [j for j in range(p.n_vars) if self._is_free(j) and j not in self.dependents]
        self._tighten_bounds()

    def _is_free(self, j: int) -> bool:
        return j not in self.fixed and j not in self.aux and self.lower[j] < self.upper[j]

    def _tighten_bounds(self) -> None:
        """Linear <= rows over one free variable become bounds."""
        constant = self._constant_vars()
        for c in self.p.constraints:
            if c.sense != "<=" or c.terms:
                continue
            live = [(j, a) for j, a in c.coefs if a != 0.0 and j not in constant]
            if len(live) != 1 or live[0][0] not in self.free:
                continue
            j, a = live[0]
            rest = sum(a_k * self.base[k] for k, a_k in c.coefs if k != j)
            bound = (c.rhs - rest) / a
            if a > 0:
                self.upper[j] = min(self.upper[j], bound)
            else:
                self.lower[j] = max(self.lower[j], bound)
            self.base[j] = self.lower[j]

    def _constant_vars(self) -> set:
        return {j for j in range(self.p.n_vars) if self.lower[j] == self.upper[j] and j not in self.aux}

    def _sources(self, j: int, memo: Dict[int, frozenset]) -> frozenset:
        if j in memo:
            return memo[j]
        if j in self.free:
            out = frozenset([j])
        elif j in self.dependents:
            i, _ = self.dependents[j]
            c = self.p.constraints[i]
            out = frozenset().union(*[self._sources(k, memo) for k, _ in c.coefs if k != j])
        elif j in self.aux:
            i, _ = self.aux[j]
            out = self._row_sources(i, memo, skip=j)
        else:
            out = frozenset()
        memo[j] = out
        return out

    def _row_sources(self, i: int, memo: Dict[int, frozenset], skip: int = -1) -> frozenset:
        c = self.p.constraints[i]
        names = {j for j, _ in c.coefs} | {t.var for t in c.terms}
        return frozenset().union(*[self._sources(j, memo) for j in names if j != skip])

    def components(self) -> List[_Component]:
        parent = {j: j for j in self.free}

        def find(j):
            while parent[j] != j:
                parent[j] = parent[parent[j]]
                j = parent[j]
            return j

        memo: Dict[int, frozenset] = {}
        row_sources = [self._row_sources(i, memo) for i in range(len(self.p.constraints))]
        for sources in row_sources:
            items = sorted(sources)
            for a, b in zip(items, items[1:]):
                parent[find(a)] = find(b)

        groups: Dict[int, _Component] = {}
        constant = _Component()
        for j in self.free:
            groups.setdefault(find(j), _Component()).free.append(j)

        def owner(sources: frozenset) -> _Component:
            return groups[find(min(sources))] if sources else constant

        for i, sources in enumerate(row_sources):
            owner(sources).rows.append(i)
        for j in self.order:
            owner(self._sources(j, memo)).dependents.append(j)
        for j in self.aux:
            owner(self._sources(j, memo)).aux.append(j)
        out = [groups[k] for k in sorted(groups)]
        if constant.rows or constant.dependents or constant.aux:
            out.append(constant)
        return out

    # -- evaluation -------------------------------------------------------

    def _term_value(self, t: NonlinearTerm, x: np.ndarray) -> np.ndarray:
        if self.relaxed:
            return np.asarray(relaxed_eval(t.g, t.decomposition, x), dtype=float)
        return np.asarray(t.g(x), dtype=float)

    def _row_lhs(self, i: int, X: np.ndarray, skip: int = -1) -> np.ndarray:
        c = self.p.constraints[i]
        total = np.zeros(X.shape[0])
        for j, a in c.coefs:
            if j != skip:
                total = total + a * X[:, j]
        for t in c.terms:
            lo, hi = self.lower[t.var], self.upper[t.var]
            total = total + self._term_value(t, np.clip(X[:, t.var], lo, hi))
        return total

    def evaluate(self, comp: _Component, X: np.ndarray) -> np.ndarray:
        """Component objective at each row of X (inf where infeasible); fills X in place."""
        ok = np.ones(X.shape[0], dtype=bool)
        for j in comp.dependents:
            i, a = self.dependents[j]
            X[:, j] = (self.p.constraints[i].rhs - self._row_lhs(i, X, skip=j)) / a
            slack = 1e-12 * max(1.0, abs(self.lower[j]), abs(self.upper[j]))
            ok &= (X[:, j] >= self.lower[j] - slack) & (X[:, j] <= self.upper[j] + slack)
        for j in comp.aux:
            i, a = self.aux[j]
            limit = (self.p.constraints[i].rhs - self._row_lhs(i, X, skip=j)) / a
            if a < 0:
                X[:, j] = np.maximum(self.lower[j], limit)
                ok &= X[:, j] <= self.upper[j]
            else:
                X[:, j] = np.minimum(self.upper[j], limit)
                ok &= X[:, j] >= self.lower[j]
        for i in comp.rows:
            c = self.p.constraints[i]
            tol = 1e-9 * max(1.0, abs(c.rhs))
            lhs = self._row_lhs(i, X)
            if c.sense == "=":
                ok &= np.abs(lhs - c.rhs) <= tol
            else:
                ok &= lhs <= c.rhs + tol
        owned = comp.free + comp.dependents + comp.aux
        value = X[:, owned] @ self.cost[owned] if owned else np.zeros(X.shape[0])
        return np.where(ok, value, np.inf)

    def scan(self, comp: _Component, axes: List[np.ndarray]) -> Tuple[float, Optional[np.ndarray], np.ndarray]:
        """Best value and point over the product grid of axes; also the full value array."""
        shape = tuple(len(a) for a in axes)
        total = int(np.prod(shape)) if shape else 1
        if total > MAX_GRID_POINTS:
            raise OracleError(f"grid of {total} points exceeds {MAX_GRID_POINTS}")
        values = np.empty(total)
        best, best_point = math.inf, None
        for start in range(0, total, CHUNK):
            idx = np.arange(start, min(total, start + CHUNK))
            X = np.tile(self.base, (idx.size, 1))
            if shape:
                coords = np.unravel_index(idx, shape)
                for k, j in enumerate(comp.free):
                    X[:, j] = axes[k][coords[k]]
            chunk = self.evaluate(comp, X)
            values[idx] = chunk
            k = int(np.argmin(chunk))
            if chunk[k] < best:
                best, best_point = float(chunk[k]), X[k].copy()
        return best, best_point, values.reshape(shape) if shape else values

    def solve_component(self, comp: _Component) -> Tuple[float, Optional[np.ndarray], float]:
        if len(comp.free) > MAX_GRID_DIM:
            raise OracleError(f"{len(comp.free)} coupled grid variables exceed {MAX_GRID_DIM}")
        for j in comp.free:
            if not (np.isfinite(self.lower[j]) and np.isfinite(self.upper[j])):
                raise OracleError(f"{self.p.var_names[j]} needs finite bounds for a grid search")
            if self.lower[j] > self.upper[j] + 1e-12:
                return math.inf, None, 0.0
        axes =[np.linspace(self.lower[j], self.upper[j], self.grid_n) for j in comp.free]
        best, point, _ = self.scan(comp, axes)
        if point is None:
            return math.inf, None, 0.0
        steps = [(self.upper[j] - self.lower[j]) / (self.grid_n - 1) for j in comp.free]
        fine = [
            np.linspace(max(self.lower[j], point[j] - h), min(self.upper[j], point[j] + h), REFINE_POINTS)
            for j, h in zip(comp.free, steps)
        ]
        refined, refined_point, grid = self.scan(comp, fine)
        if refined < best:
            best, point = refined, refined_point
        return best, point, _lipschitz_error(grid, fine)

    def merge(self, point: np.ndarray, comp: _Component, out: np.ndarray) -> None:
        for j in comp.free + comp.dependents + comp.aux:
            out[j] = point[j]


def _lipschitz_error(grid: np.ndarray, axes: List[np.ndarray]) -> float:
    """Largest finite-difference slope times the refined step, summed over axes."""
    total = 0.0
    for k, axis in enumerate(axes):
        if len(axis) < 2:
            continue
        h = float(axis[1] - axis[0])
        if h <= 0:
            continue
        diff = np.diff(grid, axis=k)
        finite = diff[np.isfinite(diff)]
        if finite.size:
            total += float(np.max(np.abs(finite)))
    return total


def _integer_patterns(p: SeparableProblem) -> List[Dict[int, float]]:
    ints = sorted(p.integer_set)
    if len(ints) > MAX_INTEGER_VARS:
        raise OracleError(f"{len(ints)} integer variables exceed {MAX_INTEGER_VARS}")
    ranges = [range(int(math.ceil(p.lower[j])), int(math.floor(p.upper[j])) + 1) for j in ints]
    return [dict(zip(ints, map(float, combo))) for combo in itertools.product(*ranges)]


def brute_force_minlp(p: SeparableProblem, grid_n: int = 1001, relaxed: bool = False) -> BruteForceResult:
    """Exhaustive grid optimum of a tiny separable problem.

    Integer variables are enumerated. Auxiliary variables that sit in a single
    row with an objective pushing them onto it are set in closed form,
    equality rows over grid variables eliminate one variable each, and the
    rest splits into row-connected components searched independently on a
    grid_n grid followed by a 10x finer pass around the best cell.

    Args:
        p: Problem with at most 3 coupled grid variables per component
        grid_n: Grid points per variable
        relaxed: Evaluate the piecewise-convex relaxation instead of g

    Returns:
        BruteForceResult, infeasible when no grid point satisfies every row

    Raises:
        OracleError: on dimensionality or grid-size limits
    """
    if not 2 <= grid_n <= MAX_GRID_N:
        raise OracleError(f"grid_n must be in [2, {MAX_GRID_N}], got {grid_n}")
    if relaxed and any(t.decomposition is None for c in p.constraints for t in c.terms):
        raise OracleError("relaxed search needs decompositions on every term")

    best = BruteForceResult(None, None, infeasible=True)
    evaluated = 0
    for fixed in _integer_patterns(p):
        search = _GridSearch(p, fixed, grid_n, relaxed)
        point = search.base.copy()
        owned = set(search.free) | set(search.dependents) | set(search.aux)
        total = float(sum(search.cost[j] * point[j] for j in range(p.n_vars) if j not in owned))
        error = 0.0
        feasible = True
        for comp in search.components():
            value, comp_point, comp_error = search.solve_component(comp)
            evaluated += grid_n ** len(comp.free)
            if comp_point is None:
                feasible = False
                break
            search.merge(comp_point, comp, point)
            total += value
            error += comp_error
        if not feasible:
            logger.debug(f"pattern {fixed}: no feasible grid point")
            continue
        if best.infeasible or total < p.objective_sign * best.objective:
            best = BruteForceResult(p.objective_sign * total, point, error, False)
    best.evaluated = evaluated
    if best.infeasible:
        logger.info(f"{p.name or 'problem'}: no feasible grid point")
    return best
