"""
Bridge to an external MILP solver (CBC) through LP files.

The model is written with its current cuts, solved by the external process,
separated at the returned point and re-solved until no cut is violated.
"""

import io
import logging
import re
import shutil
import subprocess
import tempfile
import time
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..cuts import Cut, CutPool, initial_cuts, separate
from ..errors import ConfigurationError, ExternalSolverError
from ..formulation import Model
from .config import SolveConfig, SolveReport, SolveStatus
from .lpfile import write_lp

logger = logging.getLogger(__name__)


class CbcAdapter:
    """Runs ``cbc -printingOptions all -import <lp> -solve -solu <sol>``."""

    def __init__(self, executable: str = "cbc", work_dir: Optional[str] = None, timeout: Optional[float] = None):
        self.executable = executable
        self.work_dir = work_dir
        self.timeout = timeout

    def resolve(self) -> str:
        path = shutil.which(self.executable)
        if path is None:
            raise ConfigurationError(
                f"External solver '{self.executable}' not found; install CBC or set solver_path"
            )
        return path

    def solve_file(self, lp_path: Path, solution_path: Path) -> Tuple[str, Optional[float], Dict[str, float]]:
        """Solve one LP file; returns (status, objective, column values)."""
        command = [
            self.resolve(),
            "-printingOptions",
            "all",
            "-import",
            str(lp_path),
            "-solve",
            "-solu",
            str(solution_path),
        ]
        logger.debug(f"running {' '.join(command)}")
        try:
            proc = subprocess.run(command, capture_output=True, text=True, timeout=self.timeout)
        except FileNotFoundError as e:
            raise ConfigurationError(f"External solver could not be started: {e}")
        except subprocess.TimeoutExpired:
            raise ExternalSolverError(f"{self.executable} exceeded {self.timeout} s")
        if proc.returncode != 0:
            raise ExternalSolverError(
                f"{self.executable} exited with code {proc.returncode}: {proc.stderr.strip()[:500]}"
            )
        if not solution_path.exists():
            raise ExternalSolverError(f"{self.executable} wrote no solution file")
        return parse_cbc_solution(solution_path.read_text())


def parse_cbc_solution(text: str) -> Tuple[str, Optional[float], Dict[str, float]]:
    """Read a CBC solution file: status line, then 'index name value reduced' rows."""
    lines = text.splitlines()
    if not lines:
        raise ExternalSolverError("empty solution file")
    head = lines[0]
    if head.startswith("Optimal - objective value"):
        status = "optimal"
    elif "Infeasible" in head or "infeasible" in head:
        return "infeasible", None, {}
    else:
        raise ExternalSolverError(f"unrecognised solver status: {head}")

    try:
        objective = float(head[len("Optimal - objective value ") :].split()[0])
        trimmed = re.sub(r"\*\*\s+", "", "\n".join(lines[1:]))
        if not trimmed.strip():
            return status, objective, {}
        frame = pd.read_csv(
            io.StringIO(trimmed),
            header=None,
            sep=r"\s+",
            usecols=[1, 2],
            index_col=0,
        )
    except (ValueError, IndexError, pd.errors.ParserError) as e:
        raise ExternalSolverError(f"unreadable solution file: {e}")
    columns = frame[frame.index.str.match(r"^x\d+$")]
    return status, objective, {str(k): float(v) for k, v in columns[2].items()}


def external_milp_adapter(
    m: Model,
    cuts: Sequence[Cut] = (),
    cfg: Optional[SolveConfig] = None,
    adapter: Optional[CbcAdapter] = None,
) -> SolveReport:
    """Solve the model with an external MILP solver, re-invoking it for new cuts.

    Raises:
        ConfigurationError: if the solver executable is missing
        ExternalSolverError: on process or parse failure
    """
    cfg = cfg or SolveConfig()
    adapter = adapter or CbcAdapter(cfg.solver_path or "cbc", cfg.work_dir, cfg.time_limit_seconds)
    adapter.resolve()

    start = time.perf_counter()
    pool = CutPool()
    for cut in cuts:
        pool.add(cut)
    if cfg.initial_cut_k >= 2:
        for index, t in enumerate(m.terms):
            for cut in initial_cuts(t, cfg.initial_cut_k, term=index):
                pool.add(cut)

    report = SolveReport(formulation=f"{m.tag}-cbc", maximize=m.objective_sign < 0, instance=m.name)
    work = Path(cfg.work_dir) if cfg.work_dir else Path(tempfile.mkdtemp(prefix="pcx-"))
    work.mkdir(parents=True, exist_ok=True)

    values: Optional[np.ndarray] = None
    objective: Optional[float] = None
    rounds = 0
    converged = False
    while rounds < cfg.max_root_rounds:
        rounds += 1
        lp_path = work / f"round{rounds}.lp"
        sol_path = work / f"round{rounds}.sol"
        lp_path.write_text(write_lp(m, list(pool)))
        status, objective, columns = adapter.solve_file(lp_path, sol_path)
        if status == "infeasible":
            report.status = SolveStatus.INFEASIBLE
            report.total_time = time.perf_counter() - start
            return report

        values = np.array([columns.get(f"x{j}", 0.0) for j in range(m.n_vars)])
        added = 0
        for index, t in enumerate(m.terms):
            cut = separate(t, values[t.x], values[t.y], values[t.z], cfg.eps_y, cfg.cut_eps, term=index)
            if cut is not None and pool.add(cut):
                added += 1
        report.total_cuts += added
        if added == 0:
            converged = True
            break

    report.total_time = time.perf_counter() - start
    report.root_rounds = rounds
    report.root_converged = converged
    report.incumbent_value = m.objective_sign * objective
    report.final_bound = report.incumbent_value
    report.status = SolveStatus.OPTIMAL if converged else SolveStatus.ERROR
    report.solution = values
    logger.info(f"{report.formulation}: {report.incumbent_value:.10g} after {rounds} solver calls")
    return report
