"""
Branch-and-cut over the binaries (and integer x_j) of a Model.

Every node runs the cutting-plane loop on its parent's final LP plus the
branching bound changes. Cuts found at a node are inherited by its
descendants only.
"""

import heapq
import itertools
import logging
import math
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from ..cuts import CutPool, CutTrace
from ..formulation import Formulation, Model
from .config import SolveConfig, SolveReport, SolveStatus
from .relaxation import RelaxationResult, add_initial_cuts, cutting_plane_loop, model_to_lp
from .simplex import LinearProgram, LPStatus

logger = logging.getLogger(__name__)

# (model, values) -> (objective in the problem's orientation, original point) or None
PrimalHook = Callable[[Model, np.ndarray], Optional[Tuple[float, np.ndarray]]]

BOUND_TOL = 1e-9
PRIMAL_TOL = 1e-6


@dataclass(order=True)
class _Node:
    priority: Tuple[float, int]
    id: int = field(compare=False)
    depth: int = field(compare=False)
    bound: float = field(compare=False)
    lp: LinearProgram = field(compare=False, repr=False)
    pool: CutPool = field(compare=False, repr=False)
    branch: Optional[Tuple[int, bool, float]] = field(default=None, compare=False)


class BranchAndCut:
    """Best-bound (or depth-first) branch-and-cut on one Model."""

    def __init__(self, model: Model, cfg: Optional[SolveConfig] = None, primal_hook: Optional[PrimalHook] = None):
        self.model = model
        self.cfg = cfg or SolveConfig()
        self.primal_hook = primal_hook
        self.sign = model.objective_sign
        self.integer_vars = np.array(model.integer_vars(), dtype=int)

        self.incumbent: Optional[float] = None
        self.incumbent_values: Optional[np.ndarray] = None
        self.primal: Optional[float] = None
        self.total_cuts = 0
        self.nodes = 0
        self.numerical_failures = 0
        self.requeued = 0
        self.rng = np.random.default_rng(self.cfg.seed)
        self._ids = itertools.count(1)
        self._heap: List[_Node] = []
        self._pseudo: Dict[bool, Dict[int, List[float]]] = {True: defaultdict(list), False: defaultdict(list)}

    # -- incumbents -------------------------------------------------------

    def cutoff(self) -> float:
        if self.incumbent is None:
            return math.inf
        return self.incumbent - self.cfg.mip_rel_gap * max(1.0, abs(self.incumbent))

    def pruned(self, bound: float) -> bool:
        """True when a node with this bound cannot hold a better incumbent.

        The primal value never lies below the piecewise-convex optimum, so it
        prunes only bounds strictly above it.
        """
        if bound >= self.cutoff():
            return True
        return self.primal is not None and bound > self.primal + PRIMAL_TOL * max(1.0, abs(self.primal))

    def _offer(self, value: float, values: np.ndarray, source: str) -> None:
        if self.incumbent is None or value < self.incumbent - BOUND_TOL:
            self.incumbent = value
            self.incumbent_values = values.copy()
            logger.debug(f"new incumbent {self.sign * value:.10g} from {source}")

    def _run_hook(self, values: np.ndarray) -> None:
        if self.primal_hook is None:
            return
        found = self.primal_hook(self.model, values)
        if found is None:
            return
        objective, _ = found
        internal = self.sign * objective
        if self.primal is None or internal < self.primal:
            self.primal = internal
            logger.debug(f"primal hook value {objective:.10g}")

    # -- propagation ------------------------------------------------------

    def propagate(self, lp: LinearProgram) -> bool:
        """Tighten segment bounds implied by fixed binaries; False if a node is empty."""
        lo, hi = lp.lower, lp.upper
        incremental = self.model.formulation == Formulation.IM
        for blk in self.model.blocks:
            S = len(blk.y)
            ones = [s for s in range(S) if lo[blk.y[s]] >= 1.0 - BOUND_TOL]
            zeros = [s for s in range(S) if hi[blk.y[s]] <= BOUND_TOL]
            pts = blk.decomposition.breakpoints
            if incremental:
                if ones:
                    for s in range(max(ones)):
                        lo[blk.y[s]] = 1.0
                        lo[blk.x[s]] = max(lo[blk.x[s]], pts[s + 1] - pts[s])
                if zeros:
                    for s in range(min(zeros), S):
                        hi[blk.y[s]] = 0.0
                        hi[blk.x[s]] = min(hi[blk.x[s]], 0.0)
            else:
                if ones:
                    for s in range(S):
                        if s != ones[0]:
                            hi[blk.y[s]] = 0.0
                    zeros = [s for s in range(S) if s != ones[0]]
                for s in zeros:
                    hi[blk.y[s]] = 0.0
                    lo[blk.x[s]] = max(lo[blk.x[s]], 0.0)
                    hi[blk.x[s]] = min(hi[blk.x[s]], 0.0)
                    for extra in (blk.mu.get(s), blk.lam.get(s)):
                        if extra is not None:
                            hi[extra] = 0.0
        return not np.any(lo > hi + self.cfg.feas_tol)

    # -- branching --------------------------------------------------------

    def select_branch(self, values: np.ndarray) -> Optional[Tuple[int, float]]:
        if self.integer_vars.size == 0:
            return None
        v = values[self.integer_vars]
        frac = v - np.floor(v)
        dist = np.minimum(frac, 1.0 - frac)
        fractional = dist > self.cfg.integrality_tol
        if not fractional.any():
            return None
        candidates = self.integer_vars[fractional]
        if self.cfg.branching == "pseudo-cost" and any(self._pseudo[d] for d in (True, False)):
            scores = np.array([self._pseudo_score(int(j), float(f)) for j, f in zip(candidates, frac[fractional])])
            tied = np.flatnonzero(scores >= scores.max() * (1.0 - 1e-12))
            best = int(tied[0]) if tied.size == 1 else int(self.rng.choice(tied))
        else:
            best = int(np.argmax(dist[fractional]))
        j = int(candidates[best])
        return j, float(values[j])

    def _pseudo_score(self, j: int, f: float) -> float:
        def estimate(up: bool) -> float:
            history = self._pseudo[up]
            if history.get(j):
                return float(np.mean(history[j]))
            pooled = [g for gains in history.values() for g in gains]
            return float(np.mean(pooled)) if pooled else 1.0

        down = estimate(False) * f
        up = estimate(True) * (1.0 - f)
        return max(down, 1e-6) * max(up, 1e-6)

    def _record_pseudo(self, node: _Node, bound: float) -> None:
        if node.branch is None or not np.isfinite(bound):
            return
        j, up, distance = node.branch
        if distance > 0:
            self._pseudo[up][j].append(max(0.0, bound - node.bound) / distance)

    def _push_children(self, parent_id: int, depth: int, result: RelaxationResult, j: int, value: float) -> None:
        floor = math.floor(value)
        for up in (False, True):
            lp = result.lp.copy()
            if up:
                lp.lower[j] = floor + 1.0
            else:
                lp.upper[j] = floor
            distance = (floor + 1.0 - value) if up else (value - floor)
            counter = next(self._ids)
            if self.cfg.node_order == "depth-first":
                priority = (-(depth + 1), counter)
            else:
                priority = (result.bound, counter)
            node = _Node(priority, counter, depth + 1, result.bound, lp, result.pool.child(), (j, up, distance))
            heapq.heappush(self._heap, node)
        logger.debug(f"node {parent_id}: branch on {self.model.variables[j].name}={value:.6g}")

    def _requeue(self, node_id: int, depth: int, result: RelaxationResult) -> None:
        counter = next(self._ids)
        priority = (-depth, counter) if self.cfg.node_order == "depth-first" else (result.bound, counter)
        heapq.heappush(self._heap, _Node(priority, node_id, depth, result.bound, result.lp, result.pool))
        self.requeued += 1
        logger.debug(f"node {node_id}: integral LP point before cut convergence; requeued")

    # -- node processing --------------------------------------------------

    def _process(self, node_id: int, depth: int, result: RelaxationResult) -> None:
        self.total_cuts += result.cuts_used
        if result.status == LPStatus.INFEASIBLE:
            return
        if result.status != LPStatus.OPTIMAL:
            self.numerical_failures += 1
            logger.warning(f"node {node_id}: LP ended {result.status.value}; node dropped")
            return
        if self.pruned(result.bound):
            return
        values = result.assignment.values
        self._run_hook(values)
        choice = self.select_branch(values)
        if choice is None:
            if result.converged:
                self._offer(result.bound, values, f"node {node_id}")
            else:
                # z still underestimates the terms; separate again before accepting
                self._requeue(node_id, depth, result)
            return
        if self.pruned(result.bound):
            return
        self._push_children(node_id, depth, result, *choice)

    def solve(self) -> SolveReport:
        cfg = self.cfg
        start = time.perf_counter()
        deadline = start + cfg.time_limit_seconds
        report = SolveReport(formulation=self.model.tag, maximize=self.sign < 0, instance=self.model.name)

        trace = CutTrace(cfg.cut_trace_path) if cfg.cut_trace_path else None
        pool = CutPool(trace)
        lp = model_to_lp(self.model)
        add_initial_cuts(self.model, lp, pool, cfg.initial_cut_k)
        if not self.propagate(lp):
            report.status = SolveStatus.INFEASIBLE
            return report

        root = cutting_plane_loop(self.model, lp, pool, cfg, cfg.max_root_rounds, node=0, deadline=deadline)
        self.nodes = 1
        report.root_time = time.perf_counter() - start
        report.root_cuts = root.cuts_used
        report.root_rounds = root.rounds
        report.root_converged = root.converged
        if root.status == LPStatus.INFEASIBLE:
            report.status = SolveStatus.INFEASIBLE
            report.total_time = report.root_time
            return report
        if root.status != LPStatus.OPTIMAL:
            report.status = SolveStatus.ERROR
            report.total_time = report.root_time
            logger.error(f"{self.model.tag}: root LP ended {root.status.value}")
            return report
        report.root_bound = self.sign * root.bound
        self._process(0, 0, root)

        status = SolveStatus.OPTIMAL
        while self._heap:
            if time.perf_counter() > deadline:
                status = SolveStatus.TIME_LIMIT
                break
            if self.nodes >= cfg.node_limit:
                status = SolveStatus.NODE_LIMIT
                break
            node = heapq.heappop(self._heap)
            if self.pruned(node.bound):
                continue
            self.nodes += 1
            if not self.propagate(node.lp):
                continue
            result = cutting_plane_loop(
                self.model, node.lp, node.pool, cfg, cfg.max_node_rounds, node=node.id, deadline=deadline
            )
            if result.status == LPStatus.OPTIMAL:
                self._record_pseudo(node, result.bound)
            self._process(node.id, node.depth, result)

        report.total_time = time.perf_counter() - start
        report.nodes = self.nodes
        report.total_cuts = self.total_cuts
        if self.incumbent is None:
            report.status = SolveStatus.INFEASIBLE if status == SolveStatus.OPTIMAL else status
            open_bounds = [n.bound for n in self._heap]
            if open_bounds:
                report.final_bound = self.sign * min(open_bounds)
            return report

        if status == SolveStatus.OPTIMAL:
            final = self.incumbent
        else:
            final = min([n.bound for n in self._heap] + [self.incumbent])
        report.status = status
        report.incumbent_value = self.sign * self.incumbent
        report.final_bound = self.sign * final
        report.primal_value = None if self.primal is None else self.sign * self.primal
        report.solution = self.incumbent_values
        if self.numerical_failures:
            logger.warning(f"{self.model.tag}: {self.numerical_failures} nodes dropped on numerical trouble")
        logger.info(
            f"{self.model.tag} {status.value}: incumbent {report.incumbent_value:.10g}, "
            f"bound {report.final_bound:.10g}, {self.nodes} nodes, {self.total_cuts} cuts"
        )
        return report


def branch_and_cut(
    model: Model, cfg: Optional[SolveConfig] = None, primal_hook: Optional[PrimalHook] = None
) -> SolveReport:
    """Solve the MILP defined by model and its perspective cuts."""
    return BranchAndCut(model, cfg, primal_hook).solve()
