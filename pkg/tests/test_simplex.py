#!/usr/bin/env python3
"""
Tests for the bounded-variable simplex, checked against scipy's HiGHS.
"""

import unittest

import numpy as np
from scipy.optimize import linprog

from piecewise_convex.errors import LPError
from piecewise_convex.solver.simplex import LinearProgram, LPStatus, lp_from_arrays, solve_lp


def reference_objective(lp: LinearProgram) -> float:
    A = lp.matrix()
    senses = np.asarray(lp.senses)
    rhs = np.asarray(lp.rhs)
    A_ub = np.vstack([A[senses == "<="], -A[senses == ">="]])
    b_ub = np.concatenate([rhs[senses == "<="], -rhs[senses == ">="]])
    eq = senses == "="
    bounds = [
        (None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi)
        for lo, hi in zip(lp.lower, lp.upper)
    ]
    res = linprog(
        lp.objective,
        A_ub=A_ub if len(b_ub) else None,
        b_ub=b_ub if len(b_ub) else None,
        A_eq=A[eq] if eq.any() else None,
        b_eq=rhs[eq] if eq.any() else None,
        bounds=bounds,
        method="highs",
    )
    assert res.status == 0, res.message
    return float(res.fun)


class TestSolveLP(unittest.TestCase):
    """Optimal, infeasible and unbounded outcomes."""

    def test_small_max_problem(self):
        lp = lp_from_arrays(
            [-1.0, -1.0], [[1.0, 2.0], [3.0, 1.0]], ["<=", "<="], [4.0, 6.0], [0.0, 0.0], [10.0, 10.0]
        )
        result = solve_lp(lp)
        self.assertEqual(result.status, LPStatus.OPTIMAL)
        self.assertAlmostEqual(result.objective, -2.8)
        np.testing.assert_allclose(result.x, [1.6, 1.2], atol=1e-9)

    def test_random_problems_match_highs(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            n, m = rng.integers(2, 7), rng.integers(1, 7)
            A = rng.normal(size=(m, n))
            x0 = rng.uniform(-1.0, 1.0, size=n)
            senses = rng.choice(["<=", ">=", "="], size=m, p=[0.6, 0.3, 0.1])
            activity = A @ x0
            slack = rng.uniform(0.1, 1.0, size=m)
            b = np.where(senses == "<=", activity + slack, np.where(senses == ">=", activity - slack, activity))
            lp = lp_from_arrays(rng.normal(size=n), A, list(senses), b, [-5.0] * n, [5.0] * n)
            result = solve_lp(lp)
            self.assertEqual(result.status, LPStatus.OPTIMAL)
            self.assertAlmostEqual(result.objective, reference_objective(lp), delta=1e-6)
            violation = np.max(np.abs(np.minimum(0.0, 5.0 - np.abs(result.x))))
            self.assertLessEqual(violation, 1e-7)

    def test_degenerate_cycling_example(self):
        lp = lp_from_arrays(
            [-0.75, 20.0, -0.5, 6.0],
            [[0.25, -8.0, -1.0, 9.0], [0.5, -12.0, -0.5, 3.0]],
            ["<=", "<="],
            [0.0, 0.0],
            [0.0] * 4,
            [np.inf, np.inf, 1.0, np.inf],
        )
        result = solve_lp(lp)
        self.assertEqual(result.status, LPStatus.OPTIMAL)
        self.assertAlmostEqual(result.objective, -1.25)

    def test_infeasible(self):
        lp = lp_from_arrays([1.0], [[1.0], [1.0]], [">=", "<="], [2.0, 1.0], [0.0], [10.0])
        self.assertEqual(solve_lp(lp).status, LPStatus.INFEASIBLE)

    def test_crossed_bounds(self):
        lp = LinearProgram(np.array([1.0]), np.array([2.0]), np.array([1.0]))
        self.assertEqual(solve_lp(lp).status, LPStatus.INFEASIBLE)

    def test_unbounded(self):
        lp = lp_from_arrays([-1.0, -1.0], [[1.0, -1.0]], ["<="], [1.0], [0.0, 0.0], [np.inf, np.inf])
        self.assertEqual(solve_lp(lp).status, LPStatus.UNBOUNDED)

    def test_no_rows(self):
        lp = LinearProgram(np.array([1.0, -2.0]), np.array([-1.0, 0.0]), np.array([1.0, 3.0]))
        result = solve_lp(lp)
        self.assertEqual(result.status, LPStatus.OPTIMAL)
        np.testing.assert_allclose(result.x, [-1.0, 3.0])

    def test_warm_start_after_new_row(self):
        rng = np.random.default_rng(5)
        A = rng.uniform(0.1, 1.0, size=(4, 5))
        lp = lp_from_arrays(-np.ones(5), A, ["<="] * 4, np.ones(4), [0.0] * 5, [1.0] * 5)
        first = solve_lp(lp)
        lp.basis = first.basis
        lp.add_row({0: 1.0, 1: 1.0}, "<=", 0.1)
        warm = solve_lp(lp)
        cold = lp.copy()
        cold.basis = None
        self.assertEqual(warm.status, LPStatus.OPTIMAL)
        self.assertAlmostEqual(warm.objective, solve_lp(cold).objective, delta=1e-9)
        self.assertAlmostEqual(warm.objective, reference_objective(lp), delta=1e-7)


class TestLinearProgram(unittest.TestCase):
    """Construction errors."""

    def test_bad_sense(self):
        lp = LinearProgram(np.zeros(2), np.zeros(2), np.ones(2))
        with self.assertRaises(LPError):
            lp.add_row({0: 1.0}, "<", 1.0)

    def test_bad_column(self):
        lp = LinearProgram(np.zeros(2), np.zeros(2), np.ones(2))
        with self.assertRaises(LPError):
            lp.add_row({2: 1.0}, "<=", 1.0)

    def test_shape_mismatch(self):
        with self.assertRaises(LPError):
            LinearProgram(np.zeros(2), np.zeros(3), np.ones(2))

    def test_row_bounds(self):
        lp = lp_from_arrays([0.0], [[1.0], [1.0], [1.0]], ["<=", ">=", "="], [1.0, 2.0, 3.0], [0.0], [5.0])
        lo, hi = lp.row_bounds()
        np.testing.assert_array_equal(lo, [-np.inf, 2.0, 3.0])
        np.testing.assert_array_equal(hi, [1.0, np.inf, 3.0])


if __name__ == "__main__":
    unittest.main()
