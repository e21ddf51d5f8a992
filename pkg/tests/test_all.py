#!/usr/bin/env python3
"""
Run all tests for the piecewise-convex formulation library.
"""

import sys
import unittest
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from tests.test_cli import TestCommands, TestExitCodes  # noqa: E402
from tests.test_cuts import TestCutFamilies, TestCutPool, TestMakeCut, TestSeparate  # noqa: E402
from tests.test_external import TestCbcAdapter, TestExternalMilpAdapter, TestParseSolution  # noqa: E402
from tests.test_formulation import (  # noqa: E402
    TestFirstBinaryFixing,
    TestFormulationsAgree,
    TestIntegralPoints,
    TestMappingDominance,
    TestModelShape,
    TestModelValidation,
)
from tests.test_harness import TestExperimentSpec, TestParsing, TestRunExperiment, TestRunInstance  # noqa: E402
from tests.test_lpfile import TestReadLP, TestWriteLP  # noqa: E402
from tests.test_oracles import TestBruteForce, TestEnvelope, TestRelaxationProfile  # noqa: E402
from tests.test_plotting import TestPlotProfiles  # noqa: E402
from tests.test_problems import (  # noqa: E402
    TestGenerators,
    TestRefinement,
    TestRepair,
    TestSeparableForm,
    TestSplitMix64,
)
from tests.test_simplex import TestLinearProgram, TestSolveLP  # noqa: E402
from tests.test_solver import (  # noqa: E402
    TestBranchAndCut,
    TestPseudoCostTies,
    TestRootRelaxation,
    TestSolveConfig,
    TestSolveReport,
)
from tests.test_univariate import TestFindBreakpoints, TestRelaxedEval, TestUnivariateFunction  # noqa: E402


def create_test_suite():
    """Create and return a test suite with all tests."""
    suite = unittest.TestSuite()
    loader = unittest.TestLoader()

    # Functions and decompositions
    for case in (TestUnivariateFunction, TestFindBreakpoints, TestRelaxedEval):
        suite.addTests(loader.loadTestsFromTestCase(case))

    # Models and cuts
    for case in (
        TestModelShape,
        TestModelValidation,
        TestIntegralPoints,
        TestFormulationsAgree,
        TestFirstBinaryFixing,
        TestMappingDominance,
        TestMakeCut,
        TestCutFamilies,
        TestSeparate,
        TestCutPool,
    ):
        suite.addTests(loader.loadTestsFromTestCase(case))

    # LP engine and solvers
    for case in (
        TestSolveLP,
        TestLinearProgram,
        TestSolveConfig,
        TestSolveReport,
        TestRootRelaxation,
        TestBranchAndCut,
        TestPseudoCostTies,
        TestWriteLP,
        TestReadLP,
        TestParseSolution,
        TestCbcAdapter,
        TestExternalMilpAdapter,
    ):
        suite.addTests(loader.loadTestsFromTestCase(case))

    # Instances, oracles and experiments
    for case in (
        TestSplitMix64,
        TestGenerators,
        TestSeparableForm,
        TestRepair,
        TestRefinement,
        TestEnvelope,
        TestRelaxationProfile,
        TestBruteForce,
        TestParsing,
        TestExperimentSpec,
        TestRunInstance,
        TestRunExperiment,
        TestPlotProfiles,
        TestCommands,
        TestExitCodes,
    ):
        suite.addTests(loader.loadTestsFromTestCase(case))

    return suite


if __name__ == "__main__":
    # Run with verbosity
    runner = unittest.TextTestRunner(verbosity=2)
    suite = create_test_suite()
    result = runner.run(suite)

    # Exit with appropriate code
    sys.exit(0 if result.wasSuccessful() else 1)
