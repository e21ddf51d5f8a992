"""
Benchmark families: nonlinear continuous knapsack (NCK) and uncapacitated
facility location with nonconvex shipping costs (UFL).

Instances are drawn with SplitMix64 so a (size, seed) pair means the same
instance everywhere. Draw order is fixed: NCK draws every weight first, then
(a, b, c, d) per item for the logistic family; UFL draws fixed costs in
facility order.
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigurationError, RepairError
from .formulation import (
    NonlinearTerm,
    ProblemConstraint,
    SeparableProblem,
    build_model,
    decomposed,
)
from .univariate import (
    PiecewiseDecomposition,
    SegmentKind,
    UnivariateFunction,
    logistic_function,
    named_function,
    relaxed_eval,
)

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
NCK_UPPER = 100.0
NCK_CAPACITY_FACTOR = 50.0
UFL_TYPES = {1: (15.0, 2.0, 1.0), 2: (25.0, 5.0, 5.0), 3: (25.0, 10.0, 5.0)}
UFL_STANDARD_SIZES = ((6, 12), (12, 24), (24, 48))
FLOW_OPEN_TOL = 1e-4
FAMILIES = ("nck-logistic", "nck-trig", "ufl-1", "ufl-2", "ufl-3")


class SplitMix64:
    """64-bit SplitMix generator; uniforms are (next >> 11) * 2^-53."""

    GAMMA = 0x9E3779B97F4A7C15
    MIX1 = 0xBF58476D1CE4E5B9
    MIX2 = 0x94D049BB133111EB

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + self.GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * self.MIX1) & MASK64
        z = ((z ^ (z >> 27)) * self.MIX2) & MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()


@dataclass(frozen=True)
class NckInstance:
    """max sum p_j  s.t.  p_j <= g_j(x_j),  sum w_j x_j <= C,  0 <= x_j <= U_j."""

    n: int
    family: str
    seed: int
    weights: Tuple[float, ...]
    params: Tuple[Tuple[float, float, float, float], ...] = ()

    @property
    def capacity(self) -> float:
        return NCK_CAPACITY_FACTOR * sum(self.weights)

    @property
    def upper(self) -> float:
        return NCK_UPPER

    @property
    def name(self) -> str:
        return f"nck-{self.family}-n{self.n}-s{self.seed}"

    def function(self, j: int) -> UnivariateFunction:
        if self.family == "trig":
            return named_function("nck-trig")[0]
        return logistic_function(*self.params[j])


@dataclass(frozen=True)
class UflInstance:
    """min sum C_k y_k + sum s_kt  s.t.  s_kt >= g(w_kt),  sum_k w_kt = 1,  w_kt <= y_k."""

    k: int
    t: int
    type: int
    seed: int
    fixed_costs: Tuple[float, ...]

    @property
    def name(self) -> str:
        return f"ufl-{self.type}-{self.k}x{self.t}-s{self.seed}"

    @property
    def shipping(self) -> Tuple[float, float, float]:
        return UFL_TYPES[self.type]

    def function(self) -> UnivariateFunction:
        return named_function(f"ufl-{self.type}")[0]


Instance = Union[NckInstance, UflInstance]


def gen_nck(n: int, family: str = "logistic", seed: int = 0) -> NckInstance:
    """Draw an NCK instance.

    Args:
        n: Number of items
        family: 'logistic' (at most 2 intervals per function) or 'trig' (4 intervals)
        seed: SplitMix64 seed

    Returns:
        NckInstance
    """
    if n < 1:
        raise ConfigurationError(f"n must be at least 1, got {n}")
    if family not in ("logistic", "trig"):
        raise ConfigurationError(f"Unknown NCK family: {family}")
    rng = SplitMix64(seed)
    weights = tuple(rng.uniform(1.0, 100.0) for _ in range(n))
    params: Tuple = ()
    if family == "logistic":
        params = tuple(
            (
                rng.uniform(0.1, 0.2),
                rng.uniform(0.0, 100.0),
                rng.uniform(0.0, 100.0),
                rng.uniform(-100.0, 0.0),
            )
            for _ in range(n)
        )
    return NckInstance(n, family, int(seed), weights, params)


def gen_ufl(k: int, t: int, type: int = 1, seed: int = 0) -> UflInstance:
    """Draw a UFL instance with K facilities, T consumers and shipping type 1-3."""
    if k < 1 or t < 1:
        raise ConfigurationError(f"k and t must be at least 1, got ({k}, {t})")
    if type not in UFL_TYPES:
        raise ConfigurationError(f"Unknown UFL type: {type}")
    if (k, t) not in UFL_STANDARD_SIZES:
        logger.debug(f"UFL size ({k}, {t}) is not one of the standard sizes")
    rng = SplitMix64(seed)
    fixed_costs = tuple(rng.uniform(1.0, 100.0) for _ in range(k))
    return UflInstance(k, t, int(type), int(seed), fixed_costs)


def generate(family: str, size: Union[int, Sequence[int]], seed: int) -> Instance:
    """Instance for a harness family name ('nck-trig', 'ufl-3', ...)."""
    if family in ("nck-logistic", "nck-trig"):
        return gen_nck(int(size), family.split("-", 1)[1], seed)
    if family in ("ufl-1", "ufl-2", "ufl-3"):
        k, t = size
        return gen_ufl(int(k), int(t), int(family[-1]), seed)
    raise ConfigurationError(f"Unknown family: {family} (choose from {', '.join(FAMILIES)})")


def _range_bounds(g: UnivariateFunction, lo: float, hi: float) -> Tuple[float, float]:
    values = np.asarray(g(np.linspace(lo, hi, 1025)))
    margin = 1.0 + 0.05 * float(np.ptp(values))
    return float(values.min()) - margin, float(values.max()) + margin


def to_separable(inst: Instance, capacity: Optional[float] = None) -> SeparableProblem:
    """SeparableProblem of an instance (no decompositions attached yet)."""
    if isinstance(inst, NckInstance):
        return _nck_problem(inst, capacity)
    return _ufl_problem(inst)


def _nck_problem(inst: NckInstance, capacity: Optional[float]) -> SeparableProblem:
    n = inst.n
    names = [f"x{j}" for j in range(n)] + [f"p{j}" for j in range(n)]
    lower = [0.0] * n
    upper = [inst.upper] * n
    for j in range(n):
        lo, hi = _range_bounds(inst.function(j), 0.0, inst.upper)
        lower.append(lo)
        upper.append(hi)
    constraints = [
        ProblemConstraint(
            coefs=((n + j, 1.0),),
            terms=(NonlinearTerm(j, inst.function(j).scaled(-1.0, name=f"-g{j}")),),
            rhs=0.0,
            name=f"profit[{j}]",
        )
        for j in range(n)
    ]
    constraints.append(
        ProblemConstraint(
            coefs=tuple((j, w) for j, w in enumerate(inst.weights)),
            rhs=inst.capacity if capacity is None else float(capacity),
            name="knapsack",
        )
    )
    return SeparableProblem(
        var_names=tuple(names),
        objective_coeffs=tuple([0.0] * n + [1.0] * n),
        lower=tuple(lower),
        upper=tuple(upper),
        constraints=tuple(constraints),
        maximize=True,
        name=inst.name,
    )


def ufl_index(inst: UflInstance) -> Dict[str, int]:
    """Column offsets: y_k at k, w_kt at y_end + k*T + t, s_kt after the w block."""
    return {"y": 0, "w": inst.k, "s": inst.k + inst.k * inst.t}


def _ufl_problem(inst: UflInstance) -> SeparableProblem:
    K, T = inst.k, inst.t
    g = inst.function()
    off = ufl_index(inst)
    s_lo, s_hi = _range_bounds(g, 0.0, 1.0)

    names = [f"y{k}" for k in range(K)]
    names += [f"w{k}_{t}" for k in range(K) for t in range(T)]
    names += [f"s{k}_{t}" for k in range(K) for t in range(T)]
    lower = [0.0] * K + [0.0] * (K * T) + [s_lo] * (K * T)
    upper = [1.0] * K + [1.0] * (K * T) + [s_hi] * (K * T)
    objective = list(inst.fixed_costs) + [0.0] * (K * T) + [1.0] * (K * T)

    constraints: List[ProblemConstraint] = []
    for k in range(K):
        for t in range(T):
            w = off["w"] + k * T + t
            s = off["s"] + k * T + t
            constraints.append(
                ProblemConstraint(((s, -1.0),), (NonlinearTerm(w, g),), "<=", 0.0, f"ship[{k},{t}]")
            )
    for t in range(T):
        constraints.append(
            ProblemConstraint(
                tuple((off["w"] + k * T + t, 1.0) for k in range(K)), (), "=", 1.0, f"demand[{t}]"
            )
        )
    for k in range(K):
        for t in range(T):
            constraints.append(
                ProblemConstraint(
                    ((off["w"] + k * T + t, 1.0), (off["y"] + k, -1.0)), (), "<=", 0.0, f"open[{k},{t}]"
                )
            )
    return SeparableProblem(
        var_names=tuple(names),
        objective_coeffs=tuple(objective),
        lower=tuple(lower),
        upper=tuple(upper),
        constraints=tuple(constraints),
        integer_set=frozenset(range(K)),
        maximize=False,
        name=inst.name,
    )


def evaluate_original(inst: Instance, point: Sequence[float]) -> float:
    """Exact objective of the original problem (problem orientation)."""
    point = np.asarray(point, dtype=float)
    if isinstance(inst, NckInstance):
        return float(point[inst.n : 2 * inst.n].sum())
    off = ufl_index(inst)
    KT = inst.k * inst.t
    return float(np.dot(inst.fixed_costs, point[: inst.k]) + point[off["s"] : off["s"] + KT].sum())


def evaluate_and_repair(inst: Instance, values: Sequence[float]) -> Tuple[np.ndarray, float]:
    """Turn a relaxation point into a feasible point of the original problem.

    NCK: p_j = g_j(x_j). UFL: open every facility with flow above 1e-4,
    renormalise the demand columns and set s_kt = g(w_kt).

    Returns:
        (point, objective) with the objective in the problem's orientation

    Raises:
        RepairError: if no feasible point can be derived
    """
    values = np.asarray(getattr(values, "values", values), dtype=float)
    if isinstance(inst, NckInstance):
        return _repair_nck(inst, values)
    return _repair_ufl(inst, values)


def _repair_nck(inst: NckInstance, values: np.ndarray) -> Tuple[np.ndarray, float]:
    n = inst.n
    x = np.clip(values[:n], 0.0, inst.upper)
    load = float(np.dot(inst.weights, x))
    if load > inst.capacity:
        if load > inst.capacity * (1.0 + 1e-6) + 1e-9:
            raise RepairError(f"knapsack load {load:.6g} exceeds capacity {inst.capacity:.6g}")
        x = x * (inst.capacity / load)
    p = np.array([float(inst.function(j)(x[j])) for j in range(n)])
    point = np.concatenate([x, p])
    return point, float(p.sum())


def _repair_ufl(inst: UflInstance, values: np.ndarray) -> Tuple[np.ndarray, float]:
    K, T = inst.k, inst.t
    off = ufl_index(inst)
    w = np.clip(values[off["w"] : off["w"] + K * T], 0.0, 1.0).reshape(K, T)
    y = (w.max(axis=1) > FLOW_OPEN_TOL).astype(float)
    w = w * y[:, None]
    column = w.sum(axis=0)
    if np.any(column <= 0.0):
        raise RepairError(f"consumers {np.flatnonzero(column <= 0.0).tolist()} have no open facility")
    w = w / column
    g = inst.function()
    s = np.asarray(g(w.ravel()), dtype=float)
    point = np.concatenate([y, w.ravel(), s])
    return point, float(np.dot(inst.fixed_costs, y) + s.sum())


def make_primal_hook(inst: Instance):
    """Primal hook for branch-and-cut; repair failures yield no incumbent."""

    def hook(model, values):
        try:
            point, objective = evaluate_and_repair(inst, values[: model.n_original])
        except RepairError as e:
            logger.debug(f"repair failed: {e}")
            return None
        return objective, point

    return hook


def refine_intervals(d: PiecewiseDecomposition, x_star: float) -> PiecewiseDecomposition:
    """Split the concave segment holding x_star at x_star.

    A point on a breakpoint, outside the domain or inside a convex segment
    leaves the decomposition unchanged.
    """
    if not (d.lower < x_star < d.upper):
        logger.info(f"x*={x_star} outside ({d.lower}, {d.upper}); nothing to refine")
        return d
    s = d.segment_of(x_star)
    a, b = d.segment_bounds(s)
    tol = 1e-9 * max(1.0, abs(a), abs(b))
    if x_star - a <= tol or b - x_star <= tol:
        logger.info(f"x*={x_star} is a breakpoint; nothing to refine")
        return d
    if d.is_convex(s):
        logger.info(f"x*={x_star} lies in convex segment [{a}, {b}]; nothing to refine")
        return d
    points = list(d.breakpoints[: s + 1]) + [float(x_star)] + list(d.breakpoints[s + 1 :])
    kinds = list(d.segment_kinds[:s]) + [SegmentKind.CONCAVE, SegmentKind.CONCAVE] + list(d.segment_kinds[s + 1 :])
    return PiecewiseDecomposition.from_breakpoints(d.function, points, kinds)


def instance_problem(inst: Instance, grid_n: int = 512, root_tol: float = 1e-10) -> SeparableProblem:
    return decomposed(to_separable(inst), grid_n=grid_n, root_tol=root_tol)


def intervals_per_function(p: SeparableProblem) -> float:
    """Mean segment count over the nonlinear terms (the 'Int.' column)."""
    counts = [t.decomposition.s_count for c in p.constraints for t in c.terms if t.decomposition]
    return float(np.mean(counts)) if counts else 0.0


@dataclass
class SequentialStep:
    iteration: int
    bound: Optional[float]
    incumbent: Optional[float]
    segments: int
    refined: int


def sequential_bounds(
    p: SeparableProblem,
    formulation: str,
    cfg=None,
    iterations: int = 3,
    primal_hook=None,
) -> List[SequentialStep]:
    """Lower-bounding loop: solve, split concave segments at the solution, resolve.

    Bounds are reported in the problem's orientation; for a minimisation they
    never decrease across iterations.
    """
    from .solver import SolveConfig, branch_and_cut

    cfg = cfg or SolveConfig()
    steps: List[SequentialStep] = []
    refined = 0
    for it in range(iterations):
        model = build_model(p, formulation)
        report = branch_and_cut(model, cfg, primal_hook)
        segments = sum(t.decomposition.s_count for c in p.constraints for t in c.terms)
        steps.append(SequentialStep(it, report.final_bound, report.primal_value, segments, refined))
        logger.info(f"iteration {it}: bound {report.final_bound}, {segments} segments")
        if report.solution is None:
            break
        x = report.solution[: p.n_vars]
        constraints = []
        refined = 0
        for c in p.constraints:
            terms = []
            for t in c.terms:
                d = refine_intervals(t.decomposition, float(x[t.var]))
                refined += d is not t.decomposition
                terms.append(replace(t, decomposition=d))
            constraints.append(replace(c, terms=tuple(terms)))
        if refined == 0:
            break
        p = replace(p, constraints=tuple(constraints))
    return steps


def save_instance(inst: Instance, path: Union[str, Path]) -> None:
    """Write every drawn parameter and the seed as JSON."""
    if isinstance(inst, NckInstance):
        record = {
            "problem": "nck",
            "n": inst.n,
            "family": inst.family,
            "seed": inst.seed,
            "capacity": inst.capacity,
            "weights": list(inst.weights),
            "params": [list(p) for p in inst.params],
        }
    else:
        record = {
            "problem": "ufl",
            "k": inst.k,
            "t": inst.t,
            "type": inst.type,
            "seed": inst.seed,
            "shipping": list(inst.shipping),
            "fixed_costs": list(inst.fixed_costs),
        }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(record, f, indent=2)


def load_instance(path: Union[str, Path]) -> Instance:
    with open(path, "r") as f:
        record = json.load(f)
    kind = record.get("problem")
    if kind == "nck":
        return NckInstance(
            int(record["n"]),
            record["family"],
            int(record["seed"]),
            tuple(float(w) for w in record["weights"]),
            tuple(tuple(float(v) for v in p) for p in record.get("params", [])),
        )
    if kind == "ufl":
        return UflInstance(
            int(record["k"]),
            int(record["t"]),
            int(record["type"]),
            int(record["seed"]),
            tuple(float(c) for c in record["fixed_costs"]),
        )
    raise ConfigurationError(f"{path}: unknown instance kind {kind!r}")
