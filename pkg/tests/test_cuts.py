#!/usr/bin/env python3
"""
Tests for perspective cut generation, separation and the cut pool.
"""

import tempfile
import unittest
from pathlib import Path

import numpy as np

from piecewise_convex.cuts import Cut, CutPool, CutTrace, initial_cuts, make_cut, separate
from piecewise_convex.errors import DomainError
from piecewise_convex.formulation import PerspectiveTerm, TermMode, build_im, build_mcm
from piecewise_convex.oracles import profile_problem
from piecewise_convex.univariate import PolynomialTerm, UnivariateFunction, decompose, named_function


def square_term(mode=TermMode.PERSPECTIVE, anchor=0.0, q_lo=0.0, q_hi=2.0):
    g = UnivariateFunction((PolynomialTerm((0.0, 0.0, 1.0)),), name="square")
    return PerspectiveTerm(g, anchor, q_lo, q_hi, 0, 1, 2, float(g(anchor)), mode, "t")


class TestMakeCut(unittest.TestCase):
    """Tangent planes of the perspective function."""

    def test_perspective_cut_is_tight_at_its_point(self):
        t = square_term()
        cut = make_cut(t, 1.5)
        for y in (0.25, 1.0):
            self.assertAlmostEqual(cut.rhs(1.5 * y, y), t.value(1.5 * y, y))
        self.assertEqual(cut.constant, 0.0)

    def test_perspective_cut_is_valid(self):
        t = square_term(q_lo=0.5, q_hi=2.0)
        rng = np.random.default_rng(3)
        cuts = [make_cut(t, q) for q in np.linspace(0.5, 2.0, 7)]
        for _ in range(500):
            y = rng.uniform(0.0, 1.0)
            x = y * rng.uniform(0.5, 2.0)
            for cut in cuts:
                self.assertLessEqual(cut.rhs(x, y), t.value(x, y) + 1e-9)

    def test_cut_vanishes_at_origin(self):
        cut = make_cut(square_term(), 1.0)
        self.assertEqual(cut.rhs(0.0, 0.0), 0.0)

    def test_tangent_mode_ignores_y(self):
        t = square_term(TermMode.TANGENT, anchor=1.0, q_lo=1.0, q_hi=3.0)
        cut = make_cut(t, 2.0)
        self.assertEqual(cut.coef_y, 0.0)
        # g(1 + x) - g(1) at x = 1
        self.assertAlmostEqual(cut.rhs(1.0, 0.3), 3.0)

    def test_big_m_mode(self):
        g = UnivariateFunction((PolynomialTerm((1.0, 0.0, 1.0)),))
        t = PerspectiveTerm(g, 0.0, 1.0, 2.0, 0, 1, 2, float(g(0.0)), TermMode.BIG_M, "t")
        cut = make_cut(t, 1.5)
        # exact at y = 1 on the segment
        self.assertAlmostEqual(cut.rhs(1.5, 1.0), t.value(1.5, 1.0))
        # switched off at y = 0, x = 0
        self.assertLessEqual(cut.rhs(0.0, 0.0), 0.0)

    def test_out_of_domain(self):
        with self.assertRaises(DomainError):
            make_cut(square_term(), 2.5)

    def test_row_form(self):
        t = square_term()
        cut = make_cut(t, 1.0)
        coefs, sense, rhs = cut.row(t)
        self.assertEqual(sense, ">=")
        self.assertEqual(coefs[t.z], 1.0)
        self.assertAlmostEqual(coefs[t.x], -cut.coef_x)
        self.assertAlmostEqual(coefs[t.y], -cut.coef_y)
        self.assertEqual(rhs, 0.0)

def model_terms(name):
    """Every term of the perspective and plain IM/MCM models of a named function."""
    f, (lo, hi) = named_function(name)
    p = profile_problem(f, decompose(f, lo, hi))
    models = (build_im(p), build_im(p, strengthened=False), build_mcm(p), build_mcm(p, strengthened=False))
    return [t for m in models for t in m.terms]


class TestCutFamilies(unittest.TestCase):
    """Cuts of real model terms: tight at their anchor, and dense families recover the term."""

    def test_exact_at_anchor(self):
        for name in ("neg-sin", "ufl-3"):
            for t in model_terms(name):
                for q in np.linspace(t.q_lo, t.q_hi, 9):
                    cut = make_cut(t, q)
                    x = q - t.anchor
                    self.assertAlmostEqual(cut.rhs(x, 1.0), t.value(x, 1.0), delta=1e-9 * (1 + abs(t.value(x, 1.0))))

    def test_dense_family_recovers_term(self):
        rng = np.random.default_rng(11)
        for name in ("neg-sin", "sin"):
            for t in model_terms(name):
                cuts = [make_cut(t, q) for q in np.linspace(t.q_lo, t.q_hi, 1001)]
                cx = np.array([c.coef_x for c in cuts])
                cy = np.array([c.coef_y for c in cuts])
                c0 = np.array([c.constant for c in cuts])
                for _ in range(40):
                    q = rng.uniform(t.q_lo, t.q_hi)
                    if t.mode == TermMode.PERSPECTIVE:
                        y = rng.uniform(0.05, 1.0)
                        x = y * (q - t.anchor)
                    elif t.mode == TermMode.TANGENT:
                        y = rng.uniform(0.0, 1.0)
                        x = q - t.anchor
                    else:
                        # big-M cuts are exact only with the indicator on
                        y = 1.0
                        x = q - t.anchor
                    value = t.value(x, y)
                    sup = float(np.max(cx * x + cy * y + c0))
                    self.assertLessEqual(sup, value + 1e-9 * (1 + abs(value)))
                    self.assertAlmostEqual(sup, value, delta=1e-5 * (1 + abs(value)))



class TestSeparate(unittest.TestCase):
    """Most violated cut at LP points."""

    def test_violated_point(self):
        t = square_term()
        cut = separate(t, 0.5, 0.5, 0.0)
        self.assertIsNotNone(cut)
        self.assertAlmostEqual(cut.q, 1.0)
        self.assertAlmostEqual(cut.violation, t.value(0.5, 0.5))

    def test_satisfied_point(self):
        t = square_term()
        self.assertIsNone(separate(t, 0.5, 0.5, t.value(0.5, 0.5)))

    def test_zero_indicator_with_zero_load(self):
        self.assertIsNone(separate(square_term(), 0.0, 0.0, -1.0))

    def test_load_is_clamped_to_segment(self):
        t = square_term(q_lo=0.5, q_hi=1.0)
        cut = separate(t, 0.9, 0.5, -10.0)
        self.assertEqual(cut.q, 1.0)

    def test_term_index_is_kept(self):
        cut = separate(square_term(), 0.5, 0.5, 0.0, term=4)
        self.assertEqual(cut.term, 4)


class TestCutPool(unittest.TestCase):
    """Deduplication and inheritance."""

    def test_initial_cuts(self):
        cuts = initial_cuts(square_term(), 3)
        self.assertEqual([c.q for c in cuts], [0.0, 1.0, 2.0])
        with self.assertRaises(ValueError):
            initial_cuts(square_term(), 1)

    def test_duplicates_rejected(self):
        pool = CutPool()
        self.assertTrue(pool.add(Cut(1.0, 0.0, 0.5, term=0)))
        self.assertFalse(pool.add(Cut(1.0, 0.0, 0.5 + 1e-10, term=0)))
        self.assertTrue(pool.add(Cut(1.0, 0.0, 0.5, term=1)))
        self.assertEqual(len(pool), 2)

    def test_child_pool_is_independent(self):
        pool = CutPool()
        pool.add(Cut(1.0, 0.0, 0.5, term=0))
        child = pool.child()
        child.add(Cut(1.0, 0.0, 0.7, term=0))
        self.assertEqual(len(child), 2)
        self.assertEqual(len(pool), 1)

    def test_trace_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "trace" / "cuts.log"
            pool = CutPool(CutTrace(path))
            pool.add(Cut(1.0, 0.0, 0.5, violation=0.25, term=2), node=7)
            pool.add(Cut(1.0, 0.0, 0.5, term=2), node=8)
            lines = path.read_text().splitlines()
        self.assertEqual(lines, ["7 2 0.5 0.25"])


if __name__ == "__main__":
    unittest.main()
