#!/usr/bin/env python3
"""
Tests for solve configuration, the root cutting-plane loop and branch-and-cut.
"""

import math
import tempfile
import unittest
from dataclasses import replace
from pathlib import Path

import numpy as np

from piecewise_convex.errors import ConfigurationError, InfeasibleLPError
from piecewise_convex.formulation import ProblemConstraint, build_ccm, build_im, build_mcm
from piecewise_convex.oracles import profile_problem
from piecewise_convex.problems import gen_nck, gen_ufl, instance_problem, make_primal_hook
from piecewise_convex.solver import (
    BranchAndCut,
    SolveConfig,
    SolveReport,
    SolveStatus,
    branch_and_cut,
    gap_percent,
    solve_root_relaxation,
)
from piecewise_convex.univariate import decompose, named_function


def neg_sin_problem():
    f, (lo, hi) = named_function("neg-sin")
    return profile_problem(f, decompose(f, lo, hi))


class TestSolveConfig(unittest.TestCase):
    """Validation and YAML loading."""

    def test_defaults(self):
        cfg = SolveConfig()
        self.assertEqual(cfg.cut_eps, 1e-6)
        self.assertEqual(cfg.branching, "most-fractional")
        self.assertEqual(cfg.node_order, "best-bound")

    def test_invalid_values(self):
        with self.assertRaises(ConfigurationError):
            SolveConfig(cut_eps=0.0)
        with self.assertRaises(ConfigurationError):
            SolveConfig(branching="strong")
        with self.assertRaises(ConfigurationError):
            SolveConfig(initial_cut_k=1)
        with self.assertRaises(ConfigurationError):
            SolveConfig(time_limit_seconds=-1.0)
        with self.assertRaises(ConfigurationError):
            SolveConfig(max_node_rounds=0)

    def test_unknown_key(self):
        with self.assertRaises(ConfigurationError) as ctx:
            SolveConfig.from_dict({"cut_epsilon": 1e-6})
        self.assertIn("cut_epsilon", str(ctx.exception))

    def test_from_yaml(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "solve.yaml"
            path.write_text("node_order: depth-first\nnode_limit: 7\n")
            cfg = SolveConfig.from_yaml(path)
        self.assertEqual(cfg.node_order, "depth-first")
        self.assertEqual(cfg.node_limit, 7)

    def test_with_overrides_skips_none(self):
        cfg = SolveConfig().with_overrides(seed=4, time_limit_seconds=None)
        self.assertEqual(cfg.seed, 4)
        self.assertEqual(cfg.time_limit_seconds, 10000.0)


class TestSolveReport(unittest.TestCase):
    """Gap arithmetic and flat records."""

    def test_gap_percent(self):
        self.assertAlmostEqual(gap_percent(10.0, 9.0), 10.0, places=6)
        self.assertIsNone(gap_percent(None, 1.0))

    def test_to_dict(self):
        report = SolveReport("mcm", SolveStatus.TIME_LIMIT, incumbent_value=2.0, final_bound=1.0)
        record = report.to_dict()
        self.assertEqual(record["status"], "time_limit")
        self.assertNotIn("solution", record)
        self.assertAlmostEqual(record["mip_gap_percent"], 50.0, places=6)
        self.assertNotIn("total_time", report.deterministic_view())


class TestRootRelaxation(unittest.TestCase):
    """Cutting-plane loop at the root."""

    def test_neg_sin_minimum(self):
        p = neg_sin_problem()
        for model in (build_im(p), build_mcm(p), build_ccm(p)):
            result = solve_root_relaxation(model)
            self.assertTrue(result.converged)
            self.assertAlmostEqual(result.bound, -1.0, delta=1e-5)

    def test_history_is_non_decreasing(self):
        result = solve_root_relaxation(build_mcm(neg_sin_problem()))
        for a, b in zip(result.history, result.history[1:]):
            self.assertGreaterEqual(b, a - 1e-9)

    def test_infeasible_relaxation(self):
        p = neg_sin_problem()
        p = replace(p, constraints=p.constraints + (ProblemConstraint(((1, 1.0),), (), "<=", -5.0, "cap"),))
        with self.assertRaises(InfeasibleLPError):
            solve_root_relaxation(build_mcm(p))
        self.assertEqual(branch_and_cut(build_mcm(p)).status, SolveStatus.INFEASIBLE)

    def test_cut_trace(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "cuts.log"
            solve_root_relaxation(build_mcm(neg_sin_problem()), SolveConfig(cut_trace_path=str(path)))
            lines = path.read_text().splitlines()
        self.assertGreater(len(lines), 0)
        self.assertEqual(len(lines[0].split()), 4)


class TestBranchAndCut(unittest.TestCase):
    """Exact solves of small instances."""

    @classmethod
    def setUpClass(cls):
        cls.nck = gen_nck(3, "logistic", 2)
        cls.nck_problem = instance_problem(cls.nck)
        cls.ufl = gen_ufl(2, 3, 2, 4)
        cls.ufl_problem = instance_problem(cls.ufl)

    def test_neg_sin(self):
        report = branch_and_cut(build_mcm(neg_sin_problem()))
        self.assertEqual(report.status, SolveStatus.OPTIMAL)
        self.assertAlmostEqual(report.incumbent_value, -1.0, delta=1e-5)
        self.assertAlmostEqual(report.solution[0], math.pi / 2, delta=1e-2)

    def test_im_and_mcm_agree_on_nck(self):
        im = branch_and_cut(build_im(self.nck_problem))
        mcm = branch_and_cut(build_mcm(self.nck_problem))
        self.assertEqual(im.status, SolveStatus.OPTIMAL)
        self.assertEqual(mcm.status, SolveStatus.OPTIMAL)
        self.assertTrue(im.maximize)
        self.assertAlmostEqual(im.incumbent_value, mcm.incumbent_value, delta=1e-5 * (1 + abs(mcm.incumbent_value)))
        # maximisation: bounds sit above the optimum and MCM is at least as tight
        self.assertGreaterEqual(mcm.root_bound, mcm.incumbent_value - 1e-6)
        self.assertLessEqual(mcm.root_bound, im.root_bound + 1e-6 * (1 + abs(im.root_bound)))

    def test_im_and_mcm_agree_on_ufl(self):
        im = branch_and_cut(build_im(self.ufl_problem))
        mcm = branch_and_cut(build_mcm(self.ufl_problem))
        self.assertFalse(mcm.maximize)
        self.assertAlmostEqual(im.incumbent_value, mcm.incumbent_value, delta=1e-5 * (1 + abs(mcm.incumbent_value)))
        self.assertGreaterEqual(mcm.root_bound, im.root_bound - 1e-6 * (1 + abs(im.root_bound)))

    def test_primal_hook_gives_original_objective(self):
        report = branch_and_cut(build_mcm(self.ufl_problem), primal_hook=make_primal_hook(self.ufl))
        self.assertIsNotNone(report.primal_value)
        # the piecewise-convex optimum bounds the original problem from below
        self.assertGreaterEqual(report.primal_value, report.incumbent_value - 1e-6)

    def test_primal_value_does_not_replace_incumbent(self):
        model = build_mcm(self.ufl_problem)
        plain = branch_and_cut(model)
        hooked = branch_and_cut(model, primal_hook=make_primal_hook(self.ufl))
        self.assertIsNotNone(hooked.solution)
        self.assertAlmostEqual(
            hooked.incumbent_value, model.objective_sign * model.objective_value(hooked.solution), delta=1e-6
        )
        tol = 1e-5 * (1 + abs(plain.incumbent_value))
        self.assertAlmostEqual(hooked.incumbent_value, plain.incumbent_value, delta=tol)

    def test_few_cut_rounds_reach_the_same_optimum(self):
        short = SolveConfig(initial_cut_k=0, max_root_rounds=1, max_node_rounds=1)
        cases = [
            (instance_problem(gen_nck(6, "logistic", 1)), build_im),
            (instance_problem(gen_nck(6, "logistic", 1)), build_mcm),
            (instance_problem(gen_ufl(2, 3, 3, 1)), build_mcm),
        ]
        for p, build in cases:
            model = build(p)
            full = branch_and_cut(model)
            quick = branch_and_cut(model, short)
            self.assertEqual(full.status, SolveStatus.OPTIMAL)
            self.assertEqual(quick.status, SolveStatus.OPTIMAL)
            self.assertAlmostEqual(
                quick.incumbent_value, full.incumbent_value, delta=1e-5 * (1 + abs(full.incumbent_value))
            )
            self.assertLess(model.max_violation(quick.solution), 1e-4)

    def test_search_strategies_agree(self):
        base = branch_and_cut(build_mcm(self.ufl_problem)).incumbent_value
        for cfg in (SolveConfig(node_order="depth-first"), SolveConfig(branching="pseudo-cost")):
            value = branch_and_cut(build_mcm(self.ufl_problem), cfg).incumbent_value
            self.assertAlmostEqual(value, base, delta=1e-5 * (1 + abs(base)))

    def test_node_limit(self):
        report = branch_and_cut(build_mcm(self.ufl_problem), SolveConfig(node_limit=1))
        self.assertIn(report.status, (SolveStatus.NODE_LIMIT, SolveStatus.OPTIMAL))
        self.assertEqual(report.nodes, 1)

    def test_deterministic(self):
        a = branch_and_cut(build_im(self.nck_problem)).deterministic_view()
        b = branch_and_cut(build_im(self.nck_problem)).deterministic_view()
        self.assertEqual(a, b)


class TestPseudoCostTies(unittest.TestCase):
    """Seeded choice among equally scored branching candidates."""

    def setUp(self):
        self.model = build_mcm(instance_problem(gen_ufl(2, 3, 2, 4)))
        self.values = np.zeros(self.model.n_vars)
        self.values[self.model.integer_vars()] = 0.5

    def choose(self, seed):
        bc = BranchAndCut(self.model, SolveConfig(branching="pseudo-cost", seed=seed))
        bc._pseudo[True][int(bc.integer_vars[0])] = [2.0]
        return bc.select_branch(self.values)[0]

    def test_same_seed_same_choice(self):
        self.assertEqual(self.choose(3), self.choose(3))

    def test_seed_spreads_ties(self):
        picks = {self.choose(seed) for seed in range(20)}
        self.assertTrue(picks <= set(self.model.integer_vars()))
        self.assertGreater(len(picks), 1)


if __name__ == "__main__":
    unittest.main()
