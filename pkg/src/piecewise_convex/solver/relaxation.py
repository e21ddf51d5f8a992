"""Continuous relaxation of a Model solved by LP plus perspective-cut separation."""

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..cuts import CutPool, CutTrace, initial_cuts, separate
from ..errors import InfeasibleLPError, NumericalError
from ..formulation import Assignment, Model
from .config import SolveConfig
from .simplex import LinearProgram, LPResult, LPStatus, solve_lp

logger = logging.getLogger(__name__)


@dataclass
class RelaxationResult:
    """Outcome of one cutting-plane loop (internal minimisation orientation)."""

    bound: float
    assignment: Optional[Assignment]
    cuts_used: int
    rounds: int
    converged: bool
    status: LPStatus = LPStatus.OPTIMAL
    history: List[float] = field(default_factory=list)
    lp: Optional[LinearProgram] = field(default=None, repr=False)
    pool: Optional[CutPool] = field(default=None, repr=False)


def model_to_lp(model: Model) -> LinearProgram:
    """Linear part of the model with binaries relaxed to their bounds."""
    objective = np.zeros(model.n_vars)
    for j, c in model.objective:
        objective[j] += c
    lower = np.array([v.lower for v in model.variables])
    upper = np.array([v.upper for v in model.variables])
    lp = LinearProgram(objective, lower, upper)
    for row in model.rows:
        lp.add_row(dict(row.coefs), row.sense, row.rhs)
    return lp


def add_initial_cuts(model: Model, lp: LinearProgram, pool: CutPool, k: int) -> int:
    if k < 2:
        return 0
    added = 0
    for index, t in enumerate(model.terms):
        for cut in initial_cuts(t, k, term=index):
            if pool.add(cut):
                lp.add_row(*cut.row(t))
                added += 1
    return added


def cutting_plane_loop(
    model: Model,
    lp: LinearProgram,
    pool: CutPool,
    cfg: SolveConfig,
    max_rounds: int,
    node: int = 0,
    deadline: Optional[float] = None,
) -> RelaxationResult:
    """Solve, separate every term at the LP point, add violated cuts, repeat.

    The lp and pool are extended in place.
    """
    history: List[float] = []
    cuts_used = 0
    result: Optional[LPResult] = None
    converged = False
    rounds = 0
    while rounds < max_rounds:
        rounds += 1
        result = solve_lp(lp, cfg.feas_tol, cfg.opt_tol, cfg.max_lp_iterations)
        if not result.optimal:
            return RelaxationResult(np.nan, None, cuts_used, rounds, False, result.status, history, lp, pool)
        lp.basis = result.basis
        history.append(result.objective)

        values = result.x
        added = 0
        for index, t in enumerate(model.terms):
            cut = separate(
                t,
                values[t.x],
                values[t.y],
                values[t.z],
                eps_y=cfg.eps_y,
                eps_cut=cfg.cut_eps,
                term=index,
            )
            if cut is not None and pool.add(cut, node):
                lp.add_row(*cut.row(t))
                added += 1
        cuts_used += added
        if added == 0:
            converged = True
            break
        if deadline is not None and time.perf_counter() > deadline:
            break

    if not converged:
        # the last cuts are not yet reflected in the LP value
        result = solve_lp(lp, cfg.feas_tol, cfg.opt_tol, cfg.max_lp_iterations)
        if not result.optimal:
            return RelaxationResult(np.nan, None, cuts_used, rounds, False, result.status, history, lp, pool)
        lp.basis = result.basis
        history.append(result.objective)
        logger.debug(f"node {node}: cut loop stopped after {rounds} rounds without converging")

    assignment = Assignment.of(model, result.x)
    return RelaxationResult(result.objective, assignment, cuts_used, rounds, converged, result.status, history, lp, pool)


def solve_root_relaxation(model: Model, cfg: Optional[SolveConfig] = None) -> RelaxationResult:
    """Root bound of the model's continuous relaxation.

    Binaries are relaxed to [0, 1]; fixed variables keep their value.

    Raises:
        InfeasibleLPError: if the relaxation has no feasible point
        NumericalError: if the simplex cannot keep an accurate basis
    """
    cfg = cfg or SolveConfig()
    trace = CutTrace(cfg.cut_trace_path) if cfg.cut_trace_path else None
    pool = CutPool(trace)
    lp = model_to_lp(model)
    add_initial_cuts(model, lp, pool, cfg.initial_cut_k)
    deadline = time.perf_counter() + cfg.time_limit_seconds

    result = cutting_plane_loop(model, lp, pool, cfg, cfg.max_root_rounds, node=0, deadline=deadline)
    if result.status == LPStatus.INFEASIBLE:
        raise InfeasibleLPError(f"relaxation of {model.tag} {model.name} is infeasible")
    if result.status != LPStatus.OPTIMAL:
        raise NumericalError(f"relaxation of {model.tag} {model.name} ended {result.status.value}")
    logger.info(
        f"{model.tag} root bound {result.bound:.8g} after {result.rounds} rounds, "
        f"{result.cuts_used} cuts"
    )
    return result
