"""Solver settings and the per-solve report."""

import logging
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import yaml

from ..errors import ConfigurationError

logger = logging.getLogger(__name__)

BRANCHING_RULES = ("most-fractional", "pseudo-cost")
NODE_ORDERS = ("best-bound", "depth-first")


@dataclass
class SolveConfig:
    """Tolerances, limits and strategy choices for one solve.

    Keys of the YAML file (and CLI flags) use the field names.
    """

    feas_tol: float = 1e-7
    opt_tol: float = 1e-7
    cut_eps: float = 1e-6
    eps_y: float = 1e-6
    integrality_tol: float = 1e-6
    mip_rel_gap: float = 1e-7
    max_root_rounds: int = 200
    max_node_rounds: int = 50
    max_lp_iterations: int = 50000
    time_limit_seconds: float = 10000.0
    node_limit: int = 100000
    branching: str = "most-fractional"
    node_order: str = "best-bound"
    initial_cut_k: int = 3
    seed: int = 0  # breaks ties between equal pseudo-cost scores
    grid_n: int = 512
    root_tol: float = 1e-10
    cut_trace_path: Optional[str] = None
    solver_path: Optional[str] = None
    work_dir: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("feas_tol", "opt_tol", "cut_eps", "eps_y", "integrality_tol"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.time_limit_seconds > 0:
            raise ConfigurationError(
                f"time_limit_seconds must be positive, got {self.time_limit_seconds}"
            )
        if self.branching not in BRANCHING_RULES:
            raise ConfigurationError(
                f"branching must be one of {', '.join(BRANCHING_RULES)}, got {self.branching}"
            )
        if self.node_order not in NODE_ORDERS:
            raise ConfigurationError(
                f"node_order must be one of {', '.join(NODE_ORDERS)}, got {self.node_order}"
            )
        if self.initial_cut_k == 1 or self.initial_cut_k < 0:
            raise ConfigurationError(
                f"initial_cut_k must be 0 (none) or at least 2, got {self.initial_cut_k}"
            )
        if self.max_root_rounds < 1 or self.max_node_rounds < 1 or self.node_limit < 1:
            raise ConfigurationError("max_root_rounds, max_node_rounds and node_limit must be at least 1")

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "SolveConfig":
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"Unknown solve config keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> "SolveConfig":
        with open(path, "r") as f:
            data = yaml.safe_load(f) or {}
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path} must contain a mapping")
        return cls.from_dict(data)

    def with_overrides(self, **overrides) -> "SolveConfig":
        merged = asdict(self)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return self.from_dict(merged)


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    TIME_LIMIT = "time_limit"
    NODE_LIMIT = "node_limit"
    INFEASIBLE = "infeasible"
    ERROR = "error"


def gap_percent(incumbent: Optional[float], bound: Optional[float]) -> Optional[float]:
    """100 |incumbent - bound| / (1e-10 + |incumbent|)."""
    if incumbent is None or bound is None:
        return None
    return 100.0 * abs(incumbent - bound) / (1e-10 + abs(incumbent))


@dataclass
class SolveReport:
    """One solve; values are in the problem's own orientation (re-negated for max)."""

    formulation: str
    status: SolveStatus = SolveStatus.OPTIMAL
    maximize: bool = False
    root_bound: Optional[float] = None
    root_cuts: int = 0
    root_rounds: int = 0
    root_converged: bool = True
    root_time: float = 0.0
    incumbent_value: Optional[float] = None
    primal_value: Optional[float] = None
    final_bound: Optional[float] = None
    total_cuts: int = 0
    total_time: float = 0.0
    nodes: int = 0
    instance: str = ""
    solution: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def mip_gap_percent(self) -> Optional[float]:
        return gap_percent(self.incumbent_value, self.final_bound)

    @property
    def root_gap_percent(self) -> Optional[float]:
        return gap_percent(self.incumbent_value, self.root_bound)

    def to_dict(self) -> Dict[str, Any]:
        """Flat record for CSV export (solution vector dropped)."""
        record = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "solution"}
        record["status"] = self.status.value
        record["mip_gap_percent"] = self.mip_gap_percent
        record["root_gap_percent"] = self.root_gap_percent
        return record

    def deterministic_view(self) -> Dict[str, Any]:
        """to_dict without wall-clock fields."""
        record = self.to_dict()
        for key in ("root_time", "total_time"):
            record.pop(key)
        return record
