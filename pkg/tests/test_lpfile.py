#!/usr/bin/env python3
"""
Tests for LP-file export and parsing.
"""

import unittest

from piecewise_convex.cuts import make_cut
from piecewise_convex.errors import ExternalSolverError
from piecewise_convex.formulation import build_im, build_mcm
from piecewise_convex.oracles import profile_problem
from piecewise_convex.solver import model_to_lp, read_lp, solve_lp, write_lp
from piecewise_convex.univariate import UnivariateFunction, decompose, named_function


def neg_sin_model(builder=build_mcm):
    f, (lo, hi) = named_function("neg-sin")
    return builder(profile_problem(f, decompose(f, lo, hi)))


class TestWriteLP(unittest.TestCase):
    """Model export."""

    def setUp(self):
        self.model = neg_sin_model()
        self.text = write_lp(self.model)

    def test_sections(self):
        for header in ("Minimize", "Subject To", "Bounds", "Generals", "End"):
            self.assertIn(f"\n{header}\n", f"\n{self.text}")
        self.assertEqual(self.text.count("\\ PERSPECTIVE"), len(self.model.terms))

    def test_relaxed_export_has_no_generals(self):
        self.assertNotIn("Generals", write_lp(self.model, relax=True))

    def test_same_lp_after_reading(self):
        parsed, names = read_lp(self.text).to_linear_program()
        self.assertEqual(names, [f"x{j}" for j in range(self.model.n_vars)])
        direct = solve_lp(model_to_lp(self.model))
        reread = solve_lp(parsed)
        self.assertAlmostEqual(direct.objective, reread.objective, delta=1e-12)
        self.assertEqual(parsed.n_rows, len(self.model.rows))
        self.assertEqual(list(parsed.lower), [v.lower for v in self.model.variables])
        self.assertEqual(list(parsed.upper), [v.upper for v in self.model.variables])

    def test_integers_and_fixed_columns(self):
        im = neg_sin_model(build_im)
        parsed = read_lp(write_lp(im))
        expected = [f"x{j}" for j in range(im.n_vars) if im.variables[j].kind.value != "continuous"]
        self.assertEqual(parsed.integers, expected)
        y1 = im.var_index("y[0,0,1]")
        self.assertEqual(parsed.bounds[f"x{y1}"], (1.0, 1.0))

    def test_cut_rows(self):
        t = self.model.terms[0]
        cuts = [make_cut(t, q, term=0) for q in (0.5, 1.0)]
        parsed = read_lp(write_lp(self.model, cuts))
        cut_rows = [row for row in parsed.rows if row[0].startswith("pc")]
        self.assertEqual(len(cut_rows), 2)
        name, coefs, sense, rhs = cut_rows[1]
        self.assertEqual(sense, ">=")
        self.assertEqual(coefs[f"x{t.z}"], 1.0)
        self.assertEqual(coefs[f"x{t.x}"], -cuts[1].coef_x)

    def test_perspective_sidecar(self):
        record = read_lp(self.text).perspective[0]
        t = self.model.terms[0]
        self.assertEqual(record["mode"], "perspective")
        self.assertEqual(record["x"], f"x{t.x}")
        self.assertEqual(record["q_hi"], t.q_hi)
        self.assertEqual(UnivariateFunction.from_records(record["g"]), t.g)


class TestReadLP(unittest.TestCase):
    """Hand-written LP files."""

    def test_spelling_variants(self):
        text = "\n".join(
            [
                "Maximize",
                " obj: 2 x + 3 y",
                "Subject To",
                " r1: x + y <= 4",
                " r2: x - y",
                "     >= -2",
                "Bounds",
                " x <= 3",
                " y free",
                "End",
            ]
        )
        parsed = read_lp(text)
        self.assertEqual(parsed.sense, "max")
        self.assertEqual(parsed.objective, {"x": 2.0, "y": 3.0})
        self.assertEqual(parsed.rows[1], ("r2", {"x": 1.0, "y": -1.0}, ">=", -2.0))
        lp, names = parsed.to_linear_program()
        self.assertEqual(names, ["x", "y"])
        self.assertAlmostEqual(solve_lp(lp).objective, -11.0)

    def test_row_without_sense(self):
        with self.assertRaises(ExternalSolverError):
            read_lp("Minimize\n obj: x1\nSubject To\n c0: x1 + x2\nEnd\n")

    def test_unreadable_bound(self):
        with self.assertRaises(ExternalSolverError):
            read_lp("Minimize\n obj: x1\nBounds\n 1 2 3 4\nEnd\n")


if __name__ == "__main__":
    unittest.main()
