#!/usr/bin/env python3
"""CLI for piecewise-convex formulations: generate, solve, relax, compare, profile, certify."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from .errors import ConfigurationError, PiecewiseError
from .formulation import Formulation, build_model
from .harness import ExperimentSpec, parse_seeds, parse_size, run_experiment
from .problems import (
    FAMILIES,
    gen_nck,
    gen_ufl,
    generate,
    instance_problem,
    load_instance,
    make_primal_hook,
    save_instance,
)
from .solver import SolveConfig, SolveStatus, branch_and_cut, solve_root_relaxation
from .univariate import UnivariateFunction, decompose, named_function, NAMED_FUNCTIONS

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOLVE = 2


class UsageError(Exception):
    """Bad flag combination detected after parsing."""


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits with code 1 and names the offending flag."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"❌ {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _solve_config(args, base: Optional[SolveConfig] = None) -> SolveConfig:
    if getattr(args, "config", None):
        cfg = SolveConfig.from_yaml(args.config)
    else:
        cfg = base or SolveConfig()
    overrides = {}
    if getattr(args, "time_limit", None) is not None:
        overrides["time_limit_seconds"] = args.time_limit
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return cfg.with_overrides(**overrides) if overrides else cfg


def _load_instance(args):
    if args.instance:
        return load_instance(args.instance)
    if not args.family or args.size is None:
        raise UsageError("give an instance file or --family with --size")
    return generate(args.family, parse_size(args.size), args.seed or 0)


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.10g}"


def gen_instance(args) -> int:
    """Generate an instance file."""
    seed = args.seed or 0
    if args.problem == "nck":
        inst = gen_nck(args.n, args.family, seed)
    else:
        inst = gen_ufl(args.k, args.t, args.type, seed)
    if args.out:
        save_instance(inst, args.out)
        print(f"✅ Wrote {inst.name} to {args.out}")
    else:
        print(f"✅ Generated {inst.name}")
    return EXIT_OK


def solve_instance(args) -> int:
    """Branch-and-cut on one instance."""
    cfg = _solve_config(args)
    inst = _load_instance(args)
    problem = instance_problem(inst, cfg.grid_n, cfg.root_tol)
    model = build_model(problem, Formulation(args.formulation), not args.no_pr)
    report = branch_and_cut(model, cfg, make_primal_hook(inst))

    if args.out:
        with open(args.out, "w") as f:
            json.dump(report.to_dict(), f, indent=2)
    if report.status in (SolveStatus.ERROR, SolveStatus.INFEASIBLE):
        print(f"❌ {model.tag} on {inst.name}: {report.status.value}")
        return EXIT_SOLVE
    print(f"✅ {model.tag} on {inst.name}: {report.status.value}")
    print(f"   incumbent {_fmt(report.incumbent_value)}  bound {_fmt(report.final_bound)}  gap {_fmt(report.mip_gap_percent)}%")
    print(f"   root bound {_fmt(report.root_bound)}  nodes {report.nodes}  cuts {report.total_cuts}  time {report.total_time:.2f}s")
    if report.primal_value is not None:
        print(f"   original objective {report.primal_value:.10g}")
    return EXIT_OK


def relax_instance(args) -> int:
    """Root relaxation bound only."""
    cfg = _solve_config(args)
    inst = _load_instance(args)
    problem = instance_problem(inst, cfg.grid_n, cfg.root_tol)
    model = build_model(problem, Formulation(args.formulation), not args.no_pr)
    result = solve_root_relaxation(model, cfg)
    bound = model.objective_sign * result.bound
    print(f"✅ {model.tag} root bound on {inst.name}: {bound:.10g}")
    print(f"   {result.rounds} rounds, {result.cuts_used} cuts, converged {result.converged}")
    if args.out:
        with open(args.out, "w") as f:
            json.dump({"instance": inst.name, "formulation": model.tag, "bound": bound}, f, indent=2)
    return EXIT_OK


def compare_formulations(args) -> int:
    """Formulation comparison table over a batch of instances."""
    if args.experiment:
        spec = ExperimentSpec.from_yaml(args.experiment)
    else:
        if not args.family or not args.sizes:
            raise UsageError("compare needs --experiment or --family with --sizes")
        spec = ExperimentSpec(
            family=args.family,
            sizes=[parse_size(s) for s in args.sizes.split(",")],
            seeds=parse_seeds(args.seeds),
            formulations=args.formulations.split(","),
            strengthening=[False] if args.no_pr else [True],
            workers=args.workers,
            relax_only=args.relax_only,
        )
    if args.out:
        spec.output_dir = str(Path(args.out).parent)
    cfg = _solve_config(args, spec.solve_config())
    result = run_experiment(spec, cfg)
    table = result.table()
    if args.out:
        table.to_csv(args.out, index=False)
        print(f"✅ Wrote {args.out}")
    print(table.to_string(index=False))
    failures = int(result.reports["success"].eq(False).sum())
    if failures:
        print(f"❌ {failures} runs failed")
        return EXIT_SOLVE
    return EXIT_OK


def profile_function(args) -> int:
    """Relaxation profiles of one function as an SVG figure."""
    from .plotting import plot_profiles

    if args.function_file:
        f = UnivariateFunction.load(args.function_file)
        if args.lower is None or args.upper is None:
            raise UsageError("--function-file needs --lower and --upper")
        lo, hi = args.lower, args.upper
    else:
        f, (lo, hi) = named_function(args.fn)
        lo = lo if args.lower is None else args.lower
        hi = hi if args.upper is None else args.upper
    d = decompose(f, lo, hi)
    out = plot_profiles(f, d, args.out, _solve_config(args), csv_path=args.csv)
    print(f"✅ Wrote {out} ({d.pattern()} on [{lo:g}, {hi:g}])")
    return EXIT_OK


def certify(args) -> int:
    """Run the acceptance criteria and print a pass/fail matrix."""
    from .certify import run_certification

    only = [int(n) for n in args.only.split(",")] if args.only else None
    results = run_certification(quick=args.quick, only=only)
    for r in results:
        mark = "✅" if r["success"] else "❌"
        detail = r.get("detail") or r.get("error", "")
        print(f"{mark} {r['criterion']:>2} {r['name']:<45} {r.get('seconds', 0.0):7.1f}s  {detail}")
    if args.out:
        import pandas as pd

        pd.DataFrame(results).to_csv(args.out, index=False)
    return EXIT_OK if all(r["success"] for r in results) else EXIT_SOLVE


def _add_model_flags(parser):
    parser.add_argument("instance", nargs="?", help="Instance file (JSON)")
    parser.add_argument("--family", choices=FAMILIES, help="Generate the instance instead")
    parser.add_argument("--size", help="Size: n for NCK, KxT for UFL")
    parser.add_argument(
        "--formulation", "-f", choices=[f.value for f in Formulation], default="mcm", help="Formulation"
    )
    parser.add_argument("--no-pr", action="store_true", help="Plain (non-perspective) terms")
    parser.add_argument("--config", "-c", help="Solve config YAML")
    parser.add_argument("--out", "-o", help="Write the report as JSON")


def _common_flags(parser, default=None):
    parser.add_argument("--verbose", "-v", action="store_true", default=default or False, help="Debug logging")
    parser.add_argument("--seed", type=int, default=default, help="Random seed")
    parser.add_argument("--time-limit", type=float, default=default, help="Time limit in seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(description="Piecewise-convex MINLP formulations")
    _common_flags(parser)
    # Subcommands accept the same flags without clobbering values given before them
    common = argparse.ArgumentParser(add_help=False)
    _common_flags(common, default=argparse.SUPPRESS)

    subparsers = parser.add_subparsers(dest="command", help="Commands", parser_class=_Parser)

    # Generate
    gen = subparsers.add_parser("gen", parents=[common], help="Generate an instance")
    gen.add_argument("problem", choices=["nck", "ufl"], help="Problem family")
    gen.add_argument("--n", type=int, default=10, help="NCK items")
    gen.add_argument("--family", choices=["logistic", "trig"], default="logistic", help="NCK function family")
    gen.add_argument("--k", type=int, default=6, help="UFL facilities")
    gen.add_argument("--t", type=int, default=12, help="UFL consumers")
    gen.add_argument("--type", type=int, choices=[1, 2, 3], default=1, help="UFL shipping type")
    gen.add_argument("--out", "-o", help="Instance file to write")

    # Solve / relax
    solve = subparsers.add_parser("solve", parents=[common], help="Branch-and-cut on one instance")
    _add_model_flags(solve)
    relax = subparsers.add_parser("relax", parents=[common], help="Root relaxation bound")
    _add_model_flags(relax)

    # Compare
    compare = subparsers.add_parser("compare", parents=[common], help="Compare formulations over a batch")
    compare.add_argument("--experiment", "-e", help="Experiment YAML")
    compare.add_argument("--family", choices=FAMILIES, help="Instance family")
    compare.add_argument("--sizes", help="Comma-separated sizes, e.g. 10,20 or 6x12,12x24")
    compare.add_argument("--seeds", default="1..10", help="Seeds, e.g. 1..10 or 1,2,3")
    compare.add_argument("--formulations", default="im,mcm", help="Comma-separated formulations")
    compare.add_argument("--no-pr", action="store_true", help="Plain (non-perspective) terms")
    compare.add_argument("--relax-only", action="store_true", help="Root relaxations only")
    compare.add_argument("--workers", type=int, default=1, help="Worker processes")
    compare.add_argument("--config", "-c", help="Solve config YAML")
    compare.add_argument("--out", "-o", help="Table CSV to write")

    # Profile
    profile = subparsers.add_parser("profile", parents=[common], help="Plot IM and MCM relaxation profiles")
    profile.add_argument("--fn", choices=sorted(NAMED_FUNCTIONS), default="neg-sin", help="Library function")
    profile.add_argument("--function-file", help="Function spec (JSON)")
    profile.add_argument("--lower", type=float, help="Domain lower end")
    profile.add_argument("--upper", type=float, help="Domain upper end")
    profile.add_argument("--out", "-o", required=True, help="SVG file to write")
    profile.add_argument("--csv", help="Also write the series as CSV")
    profile.add_argument("--config", "-c", help="Solve config YAML")

    # Certify
    cert = subparsers.add_parser("certify", parents=[common], help="Run the acceptance suite")
    cert.add_argument("--quick", action="store_true", help="Reduced sizes and seeds")
    cert.add_argument("--only", help="Comma-separated criterion numbers")
    cert.add_argument("--out", "-o", help="Result CSV to write")
    return parser


COMMANDS = {
    "gen": gen_instance,
    "solve": solve_instance,
    "relax": relax_instance,
    "compare": compare_formulations,
    "profile": profile_function,
    "certify": certify,
}


def main(argv=None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )

    if not args.command:
        parser.print_help()
        return EXIT_USAGE

    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigurationError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE
    except (PiecewiseError, OSError) as e:
        print(f"❌ Error: {e}")
        return EXIT_SOLVE


if __name__ == "__main__":
    sys.exit(main())
