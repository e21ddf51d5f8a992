"""
Experiment runner: instance batches, every requested formulation per
instance, per-instance report records and per-size aggregate tables.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import yaml

from .errors import ConfigurationError
from .formulation import Formulation, build_model
from .problems import (
    FAMILIES,
    generate,
    instance_problem,
    intervals_per_function,
    make_primal_hook,
)
from .solver import SolveConfig, SolveStatus, branch_and_cut, gap_percent, solve_root_relaxation

logger = logging.getLogger(__name__)

CONSISTENCY_TOL = 1e-5
REPORT_COLUMNS = [
    "family",
    "size",
    "seed",
    "formulation",
    "success",
    "error",
    "intervals",
    "status",
    "root_bound",
    "root_cuts",
    "root_time",
    "incumbent",
    "primal",
    "final_bound",
    "nodes",
    "cuts",
    "time",
    "gap",
    "relax_gap",
]
NUMERIC_COLUMNS = REPORT_COLUMNS[8:]


def size_label(size: Union[int, Sequence[int]]) -> str:
    if isinstance(size, (list, tuple)):
        return "x".join(str(int(s)) for s in size)
    return str(int(size))


def parse_size(text: str) -> Union[int, Tuple[int, int]]:
    """'10' -> 10, '6x12' -> (6, 12)."""
    if "x" in text:
        k, t = text.split("x", 1)
        return int(k), int(t)
    return int(text)


def formulation_tag(formulation: str, strengthened: bool) -> str:
    return formulation if strengthened else f"{formulation}-plain"


@dataclass
class ExperimentSpec:
    """One batch: a family, its sizes, seeds and the formulations to run."""

    family: str
    sizes: List[Any]
    instances: int = 10
    seeds: Optional[List[int]] = None
    formulations: List[str] = field(default_factory=lambda: ["im", "mcm"])
    strengthening: List[bool] = field(default_factory=lambda: [True])
    solve: Dict[str, Any] = field(default_factory=dict)
    output_dir: Optional[str] = None
    workers: int = 1
    relax_only: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise ConfigurationError(f"Unknown family: {self.family} (choose from {', '.join(FAMILIES)})")
        if not self.sizes:
            raise ConfigurationError("sizes must not be empty")
        if not self.formulations:
            raise ConfigurationError("formulations must not be empty")
        for f in self.formulations:
            if f not in [m.value for m in Formulation]:
                raise ConfigurationError(f"Unknown formulation: {f}")
        if self.instances < 1:
            raise ConfigurationError(f"instances must be at least 1, got {self.instances}")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be at least 1, got {self.workers}")

    @property
    def seed_list(self) -> List[int]:
        if self.seeds:
            return [int(s) for s in self.seeds]
        return list(range(1, self.instances + 1))

    def variants(self) -> List[Tuple[str, bool]]:
        out = []
        for f in self.formulations:
            for strengthened in self.strengthening:
                # CCM has no plain variant
                if f == "ccm" and not strengthened:
                    continue
                out.append((f, bool(strengthened)))
        return out

    def solve_config(self) -> SolveConfig:
        return SolveConfig.from_dict(self.solve)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"Unknown experiment keys: {', '.join(sorted(unknown))}")
        data = dict(data)
        data["sizes"] = [parse_size(s) if isinstance(s, str) else s for s in data.get("sizes", [])]
        return cls(**data)

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> "ExperimentSpec":
        """Load an experiment description.

        Raises:
            ConfigurationError: if the file is missing or has unknown keys
        """
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"Experiment file not found: {path}")
        with open(path, "r") as f:
            data = yaml.safe_load(f) or {}
        return cls.from_dict(data)


@dataclass
class FormulationStats:
    time: float
    cuts: float
    optimal: int
    gap: float
    relax_gap: float
    relax_time: float
    relax_cuts: float


@dataclass
class TableRow:
    """Batch averages for one size, keyed by formulation tag."""

    family: str
    size: str
    intervals: float
    instances: int
    stats: Dict[str, FormulationStats]
    flagged: int = 0

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {"Family": self.family, "Int.": self.intervals, "Size": self.size}
        for tag, s in self.stats.items():
            label = tag.upper()
            record[f"{label} Time"] = s.time
            record[f"{label} Cuts"] = s.cuts
            record[f"{label} #O"] = s.optimal
            record[f"{label} Gap"] = s.gap
        for tag, s in self.stats.items():
            label = tag.upper()
            record[f"{label} Relax Gap"] = s.relax_gap
            record[f"{label} Relax Time"] = s.relax_time
            record[f"{label} Relax Cuts"] = s.relax_cuts
        record["flagged"] = self.flagged
        return record


@dataclass
class ExperimentResult:
    rows: List[TableRow]
    reports: pd.DataFrame

    def table(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_record() for r in self.rows])


def _failure(family: str, size: str, seed: int, tag: str, error: Exception) -> Dict[str, Any]:
    return {"family": family, "size": size, "seed": seed, "formulation": tag, "success": False, "error": str(error)}


def run_instance(
    family: str,
    size: Any,
    seed: int,
    variants: Sequence[Tuple[str, bool]],
    cfg: SolveConfig,
    relax_only: bool = False,
) -> List[Dict[str, Any]]:
    """Every variant on one instance; failures become records, never exceptions."""
    label = size_label(size)
    try:
        inst = generate(family, size, seed)
        problem = instance_problem(inst, cfg.grid_n, cfg.root_tol)
    except Exception as e:
        logger.error(f"{family} {label} seed {seed}: {e}")
        return [_failure(family, label, seed, formulation_tag(f, s), e) for f, s in variants]

    intervals = intervals_per_function(problem)
    hook = make_primal_hook(inst)
    records = []
    for formulation, strengthened in variants:
        tag = formulation_tag(formulation, strengthened)
        record: Dict[str, Any] = {
            "family": family,
            "size": label,
            "seed": seed,
            "formulation": tag,
            "intervals": intervals,
        }
        try:
            model = build_model(problem, Formulation(formulation), strengthened)
            if relax_only:
                start = time.perf_counter()
                root = solve_root_relaxation(model, cfg)
                record.update(
                    success=True,
                    status="relaxed",
                    root_bound=model.objective_sign * root.bound,
                    root_cuts=root.cuts_used,
                    root_time=time.perf_counter() - start,
                )
            else:
                report = branch_and_cut(model, cfg, hook)
                record.update(
                    success=report.status != SolveStatus.ERROR,
                    status=report.status.value,
                    root_bound=report.root_bound,
                    root_cuts=report.root_cuts,
                    root_time=report.root_time,
                    incumbent=report.incumbent_value,
                    primal=report.primal_value,
                    final_bound=report.final_bound,
                    nodes=report.nodes,
                    cuts=report.total_cuts,
                    time=report.total_time,
                    gap=report.mip_gap_percent,
                )
        except Exception as e:
            logger.error(f"{family} {label} seed {seed} {tag}: {e}")
            records.append(_failure(family, label, seed, tag, e))
            continue
        records.append(record)
    return records


def _run_task(task: Tuple) -> List[Dict[str, Any]]:
    return run_instance(*task)


def instance_reference(records: List[Dict[str, Any]], maximize: bool) -> Optional[float]:
    """Best incumbent over the variants of one instance (problem orientation)."""
    values = [r["incumbent"] for r in records if r.get("success") and r.get("incumbent") is not None]
    if not values:
        return None
    return max(values) if maximize else min(values)


def consistent(records: List[Dict[str, Any]]) -> bool:
    """Incumbents of solved variants agree to 1e-5 relative."""
    solved = [r["incumbent"] for r in records if r.get("status") == SolveStatus.OPTIMAL.value]
    if len(solved) < 2:
        return True
    first = solved[0]
    return all(abs(v - first) <= CONSISTENCY_TOL * (1.0 + abs(first)) for v in solved[1:])


def _finish_instance(records: List[Dict[str, Any]], family: str) -> None:
    maximize = family.startswith("nck")
    reference = instance_reference(records, maximize)
    flagged = not consistent(records)
    if flagged:
        logger.warning(f"{records[0]['family']} {records[0]['size']} seed {records[0]['seed']}: incumbents disagree")
    for r in records:
        r["flagged"] = flagged
        if r.get("success") and r.get("root_bound") is not None:
            r["relax_gap"] = gap_percent(reference, r["root_bound"])


def aggregate(frame: pd.DataFrame, family: str) -> List[TableRow]:
    """Average successful records per size and formulation, in size order."""
    rows = []
    ok = frame[frame["success"] == True]  # noqa: E712
    for size in dict.fromkeys(frame["size"]):
        batch = ok[ok["size"] == size]
        stats = {}
        for tag in dict.fromkeys(frame["formulation"]):
            sub = batch[batch["formulation"] == tag]
            if sub.empty:
                continue
            stats[tag] = FormulationStats(
                time=float(sub["time"].mean()),
                cuts=float(sub["cuts"].mean()),
                optimal=int((sub["status"] == SolveStatus.OPTIMAL.value).sum()),
                gap=float(sub["gap"].mean()),
                relax_gap=float(sub["relax_gap"].mean()),
                relax_time=float(sub["root_time"].mean()),
                relax_cuts=float(sub["root_cuts"].mean()),
            )
        seeds = batch.drop_duplicates("seed")
        rows.append(
            TableRow(
                family=family,
                size=str(size),
                intervals=float(seeds["intervals"].mean()) if not seeds.empty else float("nan"),
                instances=int(seeds["seed"].nunique()),
                stats=stats,
                flagged=int(batch.drop_duplicates("seed")["flagged"].sum()) if not batch.empty else 0,
            )
        )
    return rows


def run_experiment(spec: ExperimentSpec, cfg: Optional[SolveConfig] = None) -> ExperimentResult:
    """Run every (size, seed, variant) of the spec and aggregate.

    Reports are merged in (size, seed) order whatever the worker count.
    """
    cfg = cfg or spec.solve_config()
    variants = spec.variants()
    tasks = [
        (spec.family, size, seed, variants, cfg, spec.relax_only) for size in spec.sizes for seed in spec.seed_list
    ]
    logger.info(f"{spec.family}: {len(tasks)} instances x {len(variants)} variants")

    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            batches = list(pool.map(_run_task, tasks))
    else:
        batches = [_run_task(task) for task in tasks]

    for records in batches:
        _finish_instance(records, spec.family)
    frame = pd.DataFrame([r for records in batches for r in records])
    for column in REPORT_COLUMNS:
        if column not in frame.columns:
            frame[column] = np.nan
    for column in NUMERIC_COLUMNS:
        frame[column] = pd.to_numeric(frame[column], errors="coerce")
    frame = frame[REPORT_COLUMNS + [c for c in frame.columns if c not in REPORT_COLUMNS]]
    rows = aggregate(frame, spec.family)
    result = ExperimentResult(rows, frame)

    if spec.output_dir:
        out = Path(spec.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out / "reports.csv", index=False)
        result.table().to_csv(out / "table.csv", index=False)
        logger.info(f"wrote {out / 'reports.csv'} and {out / 'table.csv'}")
    return result


def parse_seeds(text: str) -> List[int]:
    """'1..10' or '1,2,5'."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",") if s.strip()]
