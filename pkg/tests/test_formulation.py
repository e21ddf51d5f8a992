#!/usr/bin/env python3
"""
Tests for the IM, MCM and CCM model builders and the solution mappings.
"""

import math
import unittest

import numpy as np

from piecewise_convex.errors import FormulationError
from piecewise_convex.formulation import (
    Assignment,
    Formulation,
    NonlinearTerm,
    ProblemConstraint,
    SeparableProblem,
    Strengthening,
    TermMode,
    block_contribution,
    build_ccm,
    build_im,
    build_mcm,
    build_model,
    decomposed,
    free_binary_count,
    map_im_to_mcm,
    map_mcm_to_ccm,
)
from piecewise_convex.oracles import profile_problem
from piecewise_convex.problems import gen_nck, gen_ufl, instance_problem
from piecewise_convex.solver import solve_root_relaxation
from piecewise_convex.univariate import decompose, named_function, relaxed_eval


def neg_sin_problem():
    f, (lo, hi) = named_function("neg-sin")
    d = decompose(f, lo, hi)
    return f, d, profile_problem(f, d)


def mcm_point(m, f, d, x):
    """Integral MCM point with t on the relaxation at x."""
    values = np.zeros(m.n_vars)
    values[0] = x
    values[1] = relaxed_eval(f, d, x)
    blk = m.blocks[0]
    s = d.segment_of(x)
    values[blk.x[s]] = x
    values[blk.y[s]] = 1.0
    if s in blk.z:
        values[blk.z[s]] = m.terms[blk.terms[s]].value(x, 1.0)
    return values


class TestModelShape(unittest.TestCase):
    """Variables, rows and terms of each builder on -sin."""

    def setUp(self):
        self.f, self.d, self.p = neg_sin_problem()

    def test_im_layout(self):
        m = build_im(self.p)
        # x, t, two loads, two binaries, one epigraph variable
        self.assertEqual(m.n_vars, 7)
        self.assertEqual(len(m.terms), 1)
        self.assertEqual(len(m.rows), 5)
        self.assertEqual(m.n_original, 2)
        self.assertEqual(m.tag, "im")
        y1 = m.var_index("y[0,0,1]")
        self.assertTrue(m.variables[y1].fixed)
        self.assertEqual((m.variables[y1].lower, m.variables[y1].upper), (1.0, 1.0))
        self.assertEqual(free_binary_count(m), 1)

    def test_im_first_binary_free(self):
        m = build_im(self.p, fix_first=False)
        self.assertEqual(free_binary_count(m), 2)

    def test_mcm_layout(self):
        m = build_mcm(self.p)
        self.assertEqual(m.n_vars, 7)
        names = [r.name for r in m.rows]
        self.assertIn("choice[0,0]", names)
        self.assertIn("seg_lb[0,0,2]", names)
        self.assertEqual(m.terms[0].anchor, 0.0)

    def test_ccm_layout(self):
        m = build_ccm(self.p)
        self.assertEqual(m.n_vars, 11)
        self.assertEqual(len(m.blocks[0].mu), 2)
        self.assertEqual(m.strengthening, Strengthening.PERSPECTIVE)

    def test_plain_term_modes(self):
        self.assertEqual(build_im(self.p, strengthened=False).terms[0].mode, TermMode.TANGENT)
        self.assertEqual(build_mcm(self.p, strengthened=False).terms[0].mode, TermMode.BIG_M)
        self.assertEqual(build_mcm(self.p, strengthened=False).tag, "mcm-plain")

    def test_ccm_has_no_plain_variant(self):
        with self.assertLogs("piecewise_convex.formulation", level="WARNING"):
            m = build_model(self.p, Formulation.CCM, strengthened=False)
        self.assertEqual(m.strengthening, Strengthening.PERSPECTIVE)

    def test_maximize_flips_objective(self):
        from dataclasses import replace

        m = build_mcm(replace(self.p, maximize=True))
        self.assertEqual(m.objective_sign, -1.0)
        self.assertEqual(dict(m.objective)[1], -1.0)


class TestModelValidation(unittest.TestCase):
    """Problem-level errors."""

    def test_missing_decomposition(self):
        f, _ = named_function("sin")
        p = SeparableProblem(
            ("x", "t"),
            (0.0, 1.0),
            (0.0, -2.0),
            (1.0, 2.0),
            (ProblemConstraint(((1, -1.0),), (NonlinearTerm(0, f),)),),
        )
        with self.assertRaises(FormulationError):
            build_mcm(p)
        self.assertEqual(build_mcm(decomposed(p)).n_original, 2)

    def test_infinite_bounds_on_nonlinear_variable(self):
        f, _ = named_function("sin")
        with self.assertRaises(FormulationError):
            SeparableProblem(
                ("x", "t"),
                (0.0, 1.0),
                (0.0, -2.0),
                (math.inf, 2.0),
                (ProblemConstraint(((1, -1.0),), (NonlinearTerm(0, f),)),),
            )

    def test_nonlinear_rows_must_be_less_equal(self):
        f, _ = named_function("sin")
        with self.assertRaises(FormulationError):
            ProblemConstraint(((1, -1.0),), (NonlinearTerm(0, f),), "=")
        with self.assertRaises(FormulationError):
            ProblemConstraint(((1, -1.0),), (), ">=")


class TestIntegralPoints(unittest.TestCase):
    """Integral points of MCM and CCM reproduce the relaxation."""

    def setUp(self):
        self.f, self.d, self.p = neg_sin_problem()
        self.mcm = build_mcm(self.p)

    def test_mcm_point_is_feasible_in_each_segment(self):
        for x in (1.0, 4.0, 2 * math.pi):
            values = mcm_point(self.mcm, self.f, self.d, x)
            self.assertLessEqual(self.mcm.max_violation(values, integral=True), 1e-9)

    def test_block_contribution_matches_relaxation(self):
        for x in (0.5, 2.0, 5.0):
            values = mcm_point(self.mcm, self.f, self.d, x)
            contribution = block_contribution(self.mcm, values, self.mcm.blocks[0])
            self.assertAlmostEqual(contribution, relaxed_eval(self.f, self.d, x), places=9)

    def test_map_mcm_to_ccm(self):
        ccm = build_ccm(self.p)
        values = mcm_point(self.mcm, self.f, self.d, 4.0)
        mapped = map_mcm_to_ccm(Assignment.of(self.mcm, values), self.mcm, ccm)
        self.assertLessEqual(ccm.max_violation(mapped.values), 1e-9)
        self.assertAlmostEqual(mapped.objective, Assignment.of(self.mcm, values).objective)

    def test_map_mcm_to_ccm_rejects_out_of_segment_load(self):
        ccm = build_ccm(self.p)
        values = mcm_point(self.mcm, self.f, self.d, 4.0)
        values[self.mcm.blocks[0].x[1]] = 1.0
        with self.assertRaises(FormulationError):
            map_mcm_to_ccm(Assignment.of(self.mcm, values), self.mcm, ccm)

    def test_map_im_to_mcm(self):
        im = build_im(self.p)
        blk = im.blocks[0]
        x = 4.0
        values = np.zeros(im.n_vars)
        values[0] = x
        values[1] = relaxed_eval(self.f, self.d, x)
        values[blk.x[0]] = math.pi
        values[blk.x[1]] = x - math.pi
        values[blk.y[0]] = 1.0
        values[blk.y[1]] = 1.0
        values[blk.z[0]] = im.terms[blk.terms[0]].value(math.pi, 1.0)
        self.assertLessEqual(im.max_violation(values, integral=True), 1e-9)

        mapped = map_im_to_mcm(Assignment.of(im, values), im, self.mcm)
        self.assertLessEqual(self.mcm.max_violation(mapped.values, integral=True), 1e-7)
        self.assertAlmostEqual(mapped.objective, Assignment.of(im, values).objective)
        mb = self.mcm.blocks[0]
        self.assertEqual(mapped.values[mb.y[1]], 1.0)
        self.assertAlmostEqual(mapped.values[mb.x[1]], x)

    def test_map_im_to_mcm_rejects_infeasible_input(self):
        im = build_im(self.p)
        values = np.zeros(im.n_vars)
        values[0] = 3.0
        with self.assertRaises(FormulationError):
            map_im_to_mcm(Assignment.of(im, values), im, self.mcm)

    def test_mismatched_models(self):
        f, (lo, hi) = named_function("sin")
        other = build_mcm(profile_problem(f, decompose(f, lo, hi)))
        two = build_ccm(decomposed(SeparableProblem(
            ("x", "u", "t"),
            (0.0, 0.0, 1.0),
            (0.0, 0.0, -5.0),
            (1.0, 1.0, 5.0),
            (
                ProblemConstraint(((2, -1.0),), (NonlinearTerm(0, f), NonlinearTerm(1, f))),
            ),
        )))
        values = mcm_point(other, f, other.blocks[0].decomposition, 1.0)
        with self.assertRaises(FormulationError):
            map_mcm_to_ccm(Assignment.of(other, values), other, two)

def im_point(m, f, d, x):
    """Integral IM point: segments before x full, the one holding x partly filled."""
    values = np.zeros(m.n_vars)
    values[0] = x
    values[1] = relaxed_eval(f, d, x)
    blk = m.blocks[0]
    pts = d.breakpoints
    last = d.segment_of(x)
    for s in range(last + 1):
        values[blk.y[s]] = 1.0
        values[blk.x[s]] = (pts[s + 1] if s < last else x) - pts[s]
    for s, z in blk.z.items():
        t = m.terms[blk.terms[s]]
        values[z] = t.value(values[t.x], values[t.y])
    return values


class TestFormulationsAgree(unittest.TestCase):
    """Enumerating every segment choice: all three models give the relaxation's value."""

    def test_integer_points(self):
        for name in ("neg-sin", "nck-trig"):
            f, (lo, hi) = named_function(name)
            d = decompose(f, lo, hi)
            p = profile_problem(f, d)
            im, mcm, ccm = build_im(p), build_mcm(p), build_ccm(p)
            for s in range(d.s_count):
                a, b = d.segment_bounds(s)
                for x in np.linspace(a, b, 7):
                    expected = relaxed_eval(f, d, x)
                    v_im = im_point(im, f, d, x)
                    v_mcm = mcm_point(mcm, f, d, x)
                    v_ccm = map_mcm_to_ccm(Assignment.of(mcm, v_mcm), mcm, ccm).values
                    for m, v in ((im, v_im), (mcm, v_mcm), (ccm, v_ccm)):
                        self.assertLessEqual(m.max_violation(v, integral=True), 1e-7, f"{name} {m.tag} x={x}")
                        self.assertAlmostEqual(
                            block_contribution(m, v, m.blocks[0]), expected, delta=1e-8 * (1 + abs(expected))
                        )
                        self.assertAlmostEqual(m.objective_value(v), Assignment.of(mcm, v_mcm).objective)


class TestFirstBinaryFixing(unittest.TestCase):
    """Fixing the first IM indicator to one can only raise the root bound."""

    def test_fixed_bound_is_not_weaker(self):
        f, (lo, hi) = named_function("neg-sin")
        problems = [
            profile_problem(f, decompose(f, lo, hi)),
            instance_problem(gen_nck(3, "trig", 1)),
            instance_problem(gen_ufl(2, 3, 3, 1)),
        ]
        for p in problems:
            fixed = solve_root_relaxation(build_im(p)).bound
            free = solve_root_relaxation(build_im(p, fix_first=False)).bound
            self.assertGreaterEqual(fixed, free - 1e-6 * (1 + abs(free)))


class TestMappingDominance(unittest.TestCase):
    """IM-to-MCM contributions on two-segment blocks with t at its IM value."""

    def fractional_point(self, im, fill, y2, fill2=0.0):
        blk = im.blocks[0]
        pts = blk.decomposition.breakpoints
        values = np.zeros(im.n_vars)
        values[blk.y[0]] = 1.0
        values[blk.y[1]] = y2
        values[blk.x[0]] = fill
        values[blk.x[1]] = fill2
        values[0] = pts[0] + fill + fill2
        for s, z in blk.z.items():
            t = im.terms[blk.terms[s]]
            values[z] = t.value(values[t.x], values[t.y])
        values[1] = block_contribution(im, values, blk)
        return values

    def contributions(self, name, fill, y2, fill2=0.0):
        f, (lo, hi) = named_function(name)
        p = profile_problem(f, decompose(f, lo, hi))
        im, mcm = build_im(p), build_mcm(p)
        values = self.fractional_point(im, fill, y2, fill2)
        self.assertLessEqual(im.max_violation(values), 1e-9)
        mapped = map_im_to_mcm(Assignment.of(im, values), im, mcm)
        im_c = block_contribution(im, values, im.blocks[0])
        mcm_c = block_contribution(mcm, mapped.values, mcm.blocks[0])
        return im_c, mcm_c, mcm.max_violation(mapped.values)

    def test_concave_then_convex_keeps_contribution(self):
        f, (lo, hi) = named_function("sin")
        pts = decompose(f, lo, hi).breakpoints
        rng = np.random.default_rng(5)
        for _ in range(50):
            y2 = rng.uniform(0.0, 1.0)
            fill = rng.uniform((pts[1] - pts[0]) * y2, pts[1] - pts[0])
            fill2 = rng.uniform(0.0, (pts[2] - pts[1]) * y2)
            im_c, mcm_c, violation = self.contributions("sin", fill, y2, fill2)
            self.assertLessEqual(mcm_c, im_c + 1e-9)
            self.assertAlmostEqual(mcm_c, im_c, delta=1e-9)
            self.assertLessEqual(violation, 1e-9)

    def test_convex_then_concave_raises_contribution(self):
        # -sin: half the convex segment filled, the concave one a quarter on
        im_c, mcm_c, violation = self.contributions("neg-sin", 0.5 * math.pi, 0.25)
        self.assertAlmostEqual(im_c, -1.0, delta=1e-12)
        self.assertAlmostEqual(mcm_c, -0.75 * math.sin(math.pi / 3), delta=1e-9)
        self.assertGreater(violation, 0.3)


if __name__ == "__main__":
    unittest.main()
