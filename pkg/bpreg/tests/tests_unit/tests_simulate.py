"""File to test the Monte Carlo harness"""
import csv
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, tag

from bpreg.cli.utils import load_csv
from bpreg.core.exceptions import InvalidOptions, SimulationAborted
from bpreg.core.fit import FitOptions
from bpreg.core.simulate import (ESTIMATORS, McConfig, draw_design, export_replicates, format_table,
                                 run_replicate, run_study, summarize)


class TestMcConfig(SimpleTestCase):
    """Class to test study settings"""

    @tag('unit')
    def test_defaults(self):
        """
        test the truth defaults to ones and the parameter names follow p and q
        :return: None
        """
        cfg = McConfig(n=30, p=2, q=1)
        self.assertEqual(cfg.true_theta, (1.0, 1.0, 1.0, 1.0, 1.0))
        self.assertEqual(cfg.parameter_names, ["beta_0", "beta_1", "beta_2", "nu_0", "nu_1"])
        self.assertEqual(McConfig(n=30, threads=0).n_jobs, -1)

    @tag('unit')
    def test_invalid(self):
        """
        test every invariant raises InvalidOptions
        :return: None
        """
        for kwargs in ({"n": 4}, {"n": 30, "m": 0}, {"n": 30, "seed": -1}, {"n": 30, "threads": -1},
                       {"n": 30, "max_failure_rate": 1.0}, {"n": 30, "true_theta": (1.0, 1.0)},
                       {"n": 30, "p": -1}, {"n": 30, "true_theta": (1.0, 1.0, np.nan, 1.0)}):
            with self.assertRaises(InvalidOptions, msg=str(kwargs)):
                McConfig(**kwargs)


class TestDesign(SimpleTestCase):
    """Class to test the fixed covariates"""

    @tag('unit')
    def test_shared_covariates(self):
        """
        test both submodels use the same U(0,1) columns after the intercept
        :return: None
        """
        cfg = McConfig(n=40, p=2, q=1, true_theta=(1.0, 0.5, -0.5, 2.0, 1.0))
        design = draw_design(cfg, np.random.SeedSequence(3))
        self.assertEqual((design.X.shape, design.Z.shape), ((40, 3), (40, 2)))
        np.testing.assert_array_equal(design.X[:, 0], 1.0)
        np.testing.assert_array_equal(design.X[:, 1], design.Z[:, 1])
        self.assertTrue(np.all((design.X[:, 1:] > 0) & (design.X[:, 1:] < 1)))
        np.testing.assert_allclose(design.mu, np.exp(design.X @ [1.0, 0.5, -0.5]))
        np.testing.assert_allclose(design.phi, np.exp(design.Z @ [2.0, 1.0]))


class TestSummaries(SimpleTestCase):
    """Class to test the per-estimator statistics"""

    @tag('unit')
    def test_summarize(self):
        """
        test population moments against hand values
        :return: None
        """
        summary = summarize([[1.0, 2.0], [3.0, 2.0]], truth=(1.0, 1.0))
        np.testing.assert_array_equal(summary.mean, [2.0, 2.0])
        np.testing.assert_array_equal(summary.bias, [1.0, 1.0])
        np.testing.assert_array_equal(summary.variance, [1.0, 0.0])
        np.testing.assert_array_equal(summary.mse, [2.0, 1.0])


class TestStudy(SimpleTestCase):
    """Class to test run_study and its outputs"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.cfg = McConfig(n=30, m=6, seed=77)
        cls.report = run_study(cls.cfg)

    @tag('unit')
    def test_report(self):
        """
        test every estimator is summarized over every replicate
        :return: None
        """
        self.assertEqual(self.report.failure_count, 0)
        self.assertEqual(len(self.report.replicates), 6)
        self.assertEqual(set(self.report.summaries), set(ESTIMATORS))
        for name in ESTIMATORS:
            self.assertEqual(self.report.estimates(name).shape, (6, 4))

    @tag('unit')
    def test_mse_identity(self):
        """
        test mse = variance + bias^2 and bias = mean - truth
        :return: None
        """
        for summary in self.report.summaries.values():
            np.testing.assert_allclose(summary.mse, summary.variance + summary.bias ** 2, rtol=0, atol=1e-12)
            np.testing.assert_allclose(summary.bias, summary.mean - 1.0, rtol=0, atol=1e-12)

    @tag('unit')
    def test_warp_speed_rule(self):
        """
        test the warp-speed estimate is 2 theta-hat - theta* per replicate
        :return: None
        """
        for outcome in self.report.replicates:
            np.testing.assert_allclose(outcome.estimates["warp_boot"],
                                       2.0 * outcome.estimates["mle"] - outcome.theta_star, rtol=1e-12)
            self.assertLess(outcome.firth_score_max, 1e-6)

    @tag('unit')
    def test_deterministic(self):
        """
        test one replicate is reproduced bit for bit by the same seed
        :return: None
        """
        cfg = McConfig(n=30, m=1, seed=78)
        first, second = run_study(cfg), run_study(cfg)
        for name in ESTIMATORS:
            np.testing.assert_array_equal(first.estimates(name), second.estimates(name))

    @tag('unit')
    def test_threads(self):
        """
        test the replicates do not depend on the number of worker threads
        :return: None
        """
        parallel = run_study(McConfig(n=30, m=6, seed=77, threads=3))
        for name in ESTIMATORS:
            np.testing.assert_array_equal(parallel.estimates(name), self.report.estimates(name))

    @tag('unit')
    def test_export(self):
        """
        test replicates.csv has m x 4 rows and reloads through load_csv with the same numbers
        :return: None
        """
        with tempfile.TemporaryDirectory() as folder:
            path = export_replicates(self.cfg, Path(folder, "replicates.csv"), replicates=self.report.replicates)
            with open(path, newline="", encoding="utf-8") as file:
                rows = list(csv.reader(file))
            self.assertEqual(len(rows), 6 * 4 + 1)
            self.assertEqual(rows[0], ["replicate", "estimator", "theta_1", "theta_2", "theta_3", "theta_4"])
            dataset = load_csv(path, response="replicate", text_columns=("estimator",))
        self.assertEqual(dataset.n, 24)
        for name in ESTIMATORS:
            chosen = np.array(dataset.labels["estimator"]) == name
            values = np.column_stack([dataset.column(f"theta_{index}")[chosen] for index in range(1, 5)])
            np.testing.assert_array_equal(values, self.report.estimates(name))
            np.testing.assert_allclose(values.mean(axis=0), self.report.summaries[name].mean, rtol=1e-12)

    @tag('unit')
    def test_format_table(self):
        """
        test the table has a header and four rows per parameter
        :return: None
        """
        table = format_table(self.report)
        lines = table.rstrip("\n").split("\n")
        self.assertEqual(len(lines), 2 + 4 * 4)
        self.assertIn("seed = 77", lines[0])
        for name in ESTIMATORS:
            self.assertIn(name, lines[1])
        self.assertTrue(lines[2].startswith("beta_0 mean"))
        self.assertTrue(lines[-1].lstrip().startswith("mse"))

    @tag('unit')
    def test_aborted(self):
        """
        test a study where every replicate fails is aborted
        :return: None
        """
        cfg = McConfig(n=30, m=3, seed=79, fit_options=FitOptions(max_iter=1))
        with self.assertRaises(SimulationAborted):
            run_study(cfg)


def study_replicate(cfg, index):
    """
    design and stream of one replicate, rebuilt the way run_study spawns them
    :return: (Design, SeedSequence)
    """
    design_stream, replicate_root = np.random.SeedSequence(cfg.seed).spawn(2)
    return draw_design(cfg, design_stream), replicate_root.spawn(index + 1)[index]


class TestReplicateRobustness(SimpleTestCase):
    """Class to test replicates are not lost to the Firth solver"""

    @tag('unit')
    def test_stalling_replicates(self):
        """
        test replicates where damped modified scoring stalls still solve U* = 0
        :return: None
        """
        cfg = McConfig(n=30, seed=11)
        for index in (26, 123):
            design, stream = study_replicate(cfg, index)
            outcome = run_replicate(design, index, stream, cfg.fit_options)
            self.assertFalse(outcome.failed, outcome.error)
            self.assertLess(outcome.firth_score_max, 1e-8)

    @tag('unit')
    def test_hundred_datasets(self):
        """
        test every Firth fit converges on 100 simulated datasets with n = 30
        :return: None
        """
        cfg = McConfig(n=30, seed=20241016)
        design_stream, replicate_root = np.random.SeedSequence(cfg.seed).spawn(2)
        design = draw_design(cfg, design_stream)
        for index, stream in enumerate(replicate_root.spawn(100)):
            outcome = run_replicate(design, index, stream, cfg.fit_options)
            self.assertFalse(outcome.failed, f"replicate {index}: {outcome.error}")
            self.assertLess(outcome.firth_score_max, 1e-6)

    @tag('unit')
    def test_two_covariates(self):
        """
        test the p = q = 2 regime at n = 30 loses at most one replicate in fifty
        :return: None
        """
        report = run_study(McConfig(n=30, p=2, q=2, m=50, seed=5, max_failure_rate=0.05))
        self.assertLessEqual(report.failure_count, 1, report.failures)
        self.assertEqual(report.summaries["firth"].mean.shape, (6,))
        self.assertLess(max(outcome.firth_score_max for outcome in report.replicates), 1e-6)
