"""
Dense bounded-variable revised simplex.

Each row i gets a logical variable r_i = a_i . x whose bounds come from the
row sense, so the working system is [A, -I] (x, r) = 0 with l <= (x, r) <= u.
Phase 1 minimises the sum of bound violations of basic variables; phase 2
minimises the objective. The basis inverse is kept explicitly, updated by
eta transformations and refactorised periodically.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import LPError

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
DEGENERATE_STEP = 1e-12
SENSES = ("<=", ">=", "=")


class LPStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL = "numerical"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class Basis:
    """Warm-start handle: basic indices (structural j or n + row) and nonbasics at upper."""

    basic: Tuple[int, ...]
    at_upper: FrozenSet[int]
    n_vars: int


@dataclass
class LPResult:
    status: LPStatus
    x: np.ndarray
    objective: float
    basis: Optional[Basis] = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == LPStatus.OPTIMAL


@dataclass
class LinearProgram:
    """min c.x  s.t.  rows (sense) rhs,  lower <= x <= upper."""

    objective: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    rows: List[Dict[int, float]] = field(default_factory=list)
    senses: List[str] = field(default_factory=list)
    rhs: List[float] = field(default_factory=list)
    basis: Optional[Basis] = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float).copy()
        self.upper = np.asarray(self.upper, dtype=float).copy()
        n = self.objective.shape[0]
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise LPError("objective and bounds must have the same length")
        if not (len(self.rows) == len(self.senses) == len(self.rhs)):
            raise LPError("rows, senses and rhs must have the same length")

    @property
    def n_vars(self) -> int:
        return self.objective.shape[0]

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def add_row(self, coefs: Dict[int, float], sense: str, rhs: float) -> int:
        if sense not in SENSES:
            raise LPError(f"unknown row sense {sense!r}")
        if any(j < 0 or j >= self.n_vars for j in coefs):
            raise LPError(f"row references a column outside 0..{self.n_vars - 1}")
        self.rows.append(dict(coefs))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        return len(self.rows) - 1

    def copy(self) -> "LinearProgram":
        return LinearProgram(
            self.objective,
            self.lower.copy(),
            self.upper.copy(),
            list(self.rows),
            list(self.senses),
            list(self.rhs),
            self.basis,
        )

    def matrix(self) -> np.ndarray:
        A = np.zeros((self.n_rows, self.n_vars))
        for i, row in enumerate(self.rows):
            for j, c in row.items():
                A[i, j] += c
        return A

    def row_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        rhs = np.asarray(self.rhs, dtype=float)
        senses = np.asarray(self.senses, dtype=object)
        lo = np.where(senses == "<=", -np.inf, rhs)
        hi = np.where(senses == ">=", np.inf, rhs)
        return lo.astype(float), hi.astype(float)


class BoundedSimplex:
    """One solve of a LinearProgram; not reusable."""

    def __init__(
        self,
        lp: LinearProgram,
        feas_tol: float = 1e-7,
        opt_tol: float = 1e-7,
        max_iter: int = 50000,
        refactor_every: int = 64,
        bland_after: int = 50,
    ):
        self.lp = lp
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.max_iter = max_iter
        self.refactor_every = refactor_every
        self.bland_after = bland_after

        A = lp.matrix()
        row_lo, row_hi = lp.row_bounds()
        norms = np.max(np.abs(A), axis=1) if lp.n_rows else np.zeros(0)
        self.row_scale = np.where(norms > 0.0, 1.0 / np.where(norms > 0.0, norms, 1.0), 1.0)
        A = A * self.row_scale[:, None]

        self.n = lp.n_vars
        self.m = lp.n_rows
        self.M = np.hstack([A, -np.eye(self.m)])
        self.lo = np.concatenate([lp.lower, row_lo * self.row_scale])
        self.hi = np.concatenate([lp.upper, row_hi * self.row_scale])
        self.cost = np.concatenate([lp.objective, np.zeros(self.m)])
        self.iterations = 0

    # -- basis handling ---------------------------------------------------

    def _slack_basis(self) -> Tuple[List[int], set]:
        return [self.n + i for i in range(self.m)], set()

    def _initial_basis(self) -> Tuple[List[int], set]:
        handle = self.lp.basis
        if handle is None or handle.n_vars != self.n or len(handle.basic) > self.m:
            return self._slack_basis()
        basic = list(handle.basic)
        # rows appended since the handle was taken enter with their logical basic
        basic.extend(self.n + i for i in range(len(handle.basic), self.m))
        if len(set(basic)) != self.m or max(basic) >= self.n + self.m:
            return self._slack_basis()
        return basic, set(handle.at_upper) - set(basic)

    def _nonbasic_value(self, j: int, at_upper: set) -> float:
        if j in at_upper and np.isfinite(self.hi[j]):
            return self.hi[j]
        if np.isfinite(self.lo[j]):
            return self.lo[j]
        if np.isfinite(self.hi[j]):
            at_upper.add(j)
            return self.hi[j]
        return 0.0

    def _factor(self, basic: List[int]) -> Optional[np.ndarray]:
        B = self.M[:, basic]
        try:
            inverse = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return None
        residual = np.max(np.abs(B @ inverse - np.eye(self.m)), initial=0.0)
        if not np.isfinite(residual) or residual > 1e-6:
            return None
        return inverse

    # -- main loop --------------------------------------------------------

    def solve(self) -> LPResult:
        lp = self.lp
        if np.any(lp.lower > lp.upper + self.feas_tol):
            return self._result(LPStatus.INFEASIBLE, None, None, None)
        if self.m == 0:
            return self._solve_unconstrained()

        basic, at_upper = self._initial_basis()
        Binv = self._factor(basic)
        if Binv is None and lp.basis is not None:
            logger.debug("warm-start basis is singular; starting from the slack basis")
            basic, at_upper = self._slack_basis()
            Binv = self._factor(basic)
        if Binv is None:
            return self._result(LPStatus.NUMERICAL, None, None, None)

        is_basic = np.zeros(self.n + self.m, dtype=bool)
        is_basic[basic] = True
        x = np.zeros(self.n + self.m)
        for j in np.flatnonzero(~is_basic):
            x[j] = self._nonbasic_value(int(j), at_upper)

        degenerate_run = 0
        since_refactor = 0
        rechecks = 0
        while True:
            if self.iterations >= self.max_iter:
                return self._result(LPStatus.ITERATION_LIMIT, x, basic, at_upper)
            if since_refactor >= self.refactor_every:
                Binv = self._factor(basic)
                if Binv is None:
                    return self._result(LPStatus.NUMERICAL, x, basic, at_upper)
                since_refactor = 0

            x[basic] = 0.0
            x[basic] = -Binv @ (self.M @ x)
            xb = x[basic]
            lo_b, hi_b = self.lo[basic], self.hi[basic]
            below = xb < lo_b - self.feas_tol
            above = xb > hi_b + self.feas_tol
            phase = 1 if (below.any() or above.any()) else 2

            if phase == 1:
                cost_b = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                cost = np.zeros(self.n + self.m)
            else:
                cost_b = self.cost[basic]
                cost = self.cost
            duals = cost_b @ Binv
            reduced = cost - duals @ self.M

            entering = self._price(reduced, x, is_basic, degenerate_run > self.bland_after)
            if entering < 0:
                if since_refactor > 0 and rechecks < 3:
                    # confirm on a fresh factorisation before declaring the outcome
                    rechecks += 1
                    since_refactor = self.refactor_every
                    continue
                status = LPStatus.INFEASIBLE if phase == 1 else LPStatus.OPTIMAL
                return self._result(status, x, basic, at_upper)

            direction = 1.0 if reduced[entering] < 0 else -1.0
            alpha = Binv @ self.M[:, entering]
            delta = -direction * alpha
            leave, step, to_upper = self._ratio_test(
                xb, lo_b, hi_b, delta, phase, basic, degenerate_run > self.bland_after
            )
            flip = self.hi[entering] - self.lo[entering]
            if leave < 0 and not np.isfinite(flip):
                if phase == 2:
                    return self._result(LPStatus.UNBOUNDED, x, basic, at_upper)
                return self._result(LPStatus.NUMERICAL, x, basic, at_upper)

            self.iterations += 1
            since_refactor += 1
            if leave < 0 or flip <= step:
                step = flip
                if direction > 0:
                    at_upper.add(entering)
                    x[entering] = self.hi[entering]
                else:
                    at_upper.discard(entering)
                    x[entering] = self.lo[entering]
            else:
                leaving = basic[leave]
                x[entering] += direction * step
                x[leaving] = self.hi[leaving] if to_upper else self.lo[leaving]
                if to_upper:
                    at_upper.add(leaving)
                else:
                    at_upper.discard(leaving)
                at_upper.discard(entering)
                basic[leave] = entering
                is_basic[leaving] = False
                is_basic[entering] = True

                pivot = alpha[leave]
                pivot_row = Binv[leave] / pivot
                Binv -= np.outer(alpha, pivot_row)
                Binv[leave] = pivot_row

            degenerate_run = degenerate_run + 1 if step <= DEGENERATE_STEP else 0

    def _price(self, reduced, x, is_basic, bland: bool) -> int:
        movable = ~is_basic & (self.hi > self.lo)
        can_up = x < self.hi
        can_down = x > self.lo
        eligible = movable & (
            ((reduced < -self.opt_tol) & can_up) | ((reduced > self.opt_tol) & can_down)
        )
        candidates = np.flatnonzero(eligible)
        if candidates.size == 0:
            return -1
        if bland:
            return int(candidates[0])
        return int(candidates[np.argmax(np.abs(reduced[candidates]))])

    def _ratio_test(self, xb, lo_b, hi_b, delta, phase, basic, bland: bool):
        tol = self.feas_tol
        ratios = np.full(xb.shape, np.inf)
        to_upper = np.zeros(xb.shape, dtype=bool)
        inc = delta > PIVOT_TOL
        dec = delta < -PIVOT_TOL
        below = xb < lo_b - tol
        above = xb > hi_b + tol
        with np.errstate(invalid="ignore", divide="ignore"):
            if phase == 1:
                # an infeasible variable stops where it becomes feasible
                m = inc & below
                ratios[m] = (lo_b[m] - xb[m]) / delta[m]
                m = dec & above
                ratios[m] = (hi_b[m] - xb[m]) / delta[m]
                to_upper[m] = True
            m = inc & ~below & ~above & np.isfinite(hi_b)
            ratios[m] = np.maximum(hi_b[m] - xb[m], 0.0) / delta[m]
            to_upper[m] = True
            m = dec & ~below & ~above & np.isfinite(lo_b)
            ratios[m] = np.maximum(xb[m] - lo_b[m], 0.0) / -delta[m]
        best = float(np.min(ratios)) if ratios.size else np.inf
        if not np.isfinite(best):
            return -1, np.inf, False
        ties = np.flatnonzero(ratios <= best + DEGENERATE_STEP)
        if bland:
            leave = int(min(ties, key=lambda i: basic[i]))
        else:
            leave = int(ties[np.argmax(np.abs(delta[ties]))])
        return leave, best, bool(to_upper[leave])

    def _solve_unconstrained(self) -> LPResult:
        c = self.lp.objective
        lower, upper = self.lp.lower, self.lp.upper
        x = np.where(c < 0, upper, lower)
        if not np.all(np.isfinite(x)):
            return self._result(LPStatus.UNBOUNDED, None, None, None)
        at_upper = frozenset(int(j) for j in np.flatnonzero(c < 0))
        basis = Basis((), at_upper, self.n)
        return LPResult(LPStatus.OPTIMAL, x, float(c @ x), basis, 0)

    def _result(self, status, x, basic, at_upper) -> LPResult:
        if x is None:
            return LPResult(status, np.full(self.n, np.nan), np.nan, None, self.iterations)
        structural = x[: self.n].copy()
        basis = Basis(tuple(basic), frozenset(at_upper), self.n)
        objective = float(self.lp.objective @ structural)
        if status != LPStatus.OPTIMAL:
            logger.debug(f"LP ended {status.value} after {self.iterations} iterations")
        return LPResult(status, structural, objective, basis, self.iterations)


def solve_lp(
    lp: LinearProgram,
    feas_tol: float = 1e-7,
    opt_tol: float = 1e-7,
    max_iter: int = 50000,
) -> LPResult:
    """Solve lp from its warm-start basis (or the slack basis).

    Returns:
        LPResult with status, structural values, objective and the final basis
    """
    return BoundedSimplex(lp, feas_tol=feas_tol, opt_tol=opt_tol, max_iter=max_iter).solve()


def lp_from_arrays(
    c: Sequence[float],
    A: Sequence[Sequence[float]],
    senses: Sequence[str],
    b: Sequence[float],
    lower: Sequence[float],
    upper: Sequence[float],
) -> LinearProgram:
    """Build a LinearProgram from dense data."""
    lp = LinearProgram(np.asarray(c, dtype=float), np.asarray(lower), np.asarray(upper))
    for row, sense, rhs in zip(np.atleast_2d(np.asarray(A, dtype=float)) if len(A) else [], senses, b):
        lp.add_row({j: float(v) for j, v in enumerate(row) if v != 0.0}, sense, rhs)
    return lp
