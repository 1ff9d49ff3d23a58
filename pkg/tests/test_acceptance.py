"""
Full-scale coverage studies. Each one takes minutes to hours, so they only run when ``RKHS_CONFIDENCE_ACCEPTANCE=1``
is set in the environment; test_harness.py runs the same checks at a few replications.
"""
import filecmp
import os
import shutil
import unittest
from unittest import TestCase

import tests.suppress as suppress
from rkhs_confidence.__main__ import main
from rkhs_confidence.simulation import harness

OUT = "tests/files/out/acceptance"
ENABLED = os.environ.get("RKHS_CONFIDENCE_ACCEPTANCE") == "1"
WORKERS = os.cpu_count() or 1


@unittest.skipUnless(ENABLED, "set RKHS_CONFIDENCE_ACCEPTANCE=1 to run the coverage studies")
class TestCoverage(TestCase):
    @suppress.out
    def test_univariate_pointwise(self):
        result = harness.coverage_experiment(harness.scenario_config("univariate-1d", workers=WORKERS))
        self.assertGreaterEqual(result.coverage, 0.91)
        self.assertLessEqual(result.coverage, 0.97)
        self.assertAlmostEqual(0.44, result.mean_length, delta=0.06)

    @suppress.out
    def test_four_points(self):
        result = harness.coverage_experiment(harness.scenario_config("univariate-4d", workers=WORKERS))
        self.assertGreaterEqual(result.coverage, 0.895)
        self.assertLessEqual(result.coverage, 0.965)

    @suppress.out
    def test_gradient(self):
        """Coverage of the gradient sets improves with n; one inversion of at most two points is tolerated."""
        coverages = []
        for n in (250, 500, 1000):
            cfg = harness.scenario_config("gradient-1d", n=n, replications=300, workers=WORKERS)
            coverages.append(harness.coverage_experiment(cfg).coverage)
        self.assertGreaterEqual(coverages[1], 0.855)
        self.assertLessEqual(coverages[1], 0.945)
        drops = [before - after for before, after in zip(coverages, coverages[1:]) if after < before]
        self.assertLessEqual(len(drops), 1, msg=str(coverages))
        self.assertTrue(all(drop <= 0.02 for drop in drops), msg=str(coverages))


@unittest.skipUnless(ENABLED, "set RKHS_CONFIDENCE_ACCEPTANCE=1 to run the coverage studies")
class TestDeterminism(TestCase):
    @suppress.out
    def test_worker_count(self):
        for workers in ("1", "8"):
            status = main(["simulate", "--preset", "univariate-1d", "--workers", workers,
                           "--out", os.path.join(OUT, workers)])
            self.assertEqual(0, status)
        names = ["coverage.txt", "replications.csv", "sigma_hat.csv"]
        match, mismatch, errors = filecmp.cmpfiles(os.path.join(OUT, "1"), os.path.join(OUT, "8"), names,
                                                   shallow=False)
        self.assertListEqual(names, match, msg=f"differ: {mismatch}, missing: {errors}")

    def tearDown(self) -> None:
        shutil.rmtree(OUT, ignore_errors=True)
