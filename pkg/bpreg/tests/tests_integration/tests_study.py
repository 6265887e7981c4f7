"""File with the Monte Carlo acceptance study (p = q = 1, true parameters one, log links).

Slow: run with `python manage.py test --tag=study`. BPREG_STUDY_REPLICATES
lowers the replicate count for a quick look; the bands assume the default.
"""
import os

import numpy as np
from django.test import SimpleTestCase, tag

from bpreg.core.bias import cox_snell_bias
from bpreg.core.model import ModelSpec
from bpreg.core.simulate import McConfig, draw_design, run_study

REPLICATES = int(os.environ.get("BPREG_STUDY_REPLICATES", "10000"))
BETA_0, NU_0, NU_1 = 0, 2, 3
CORRECTED = ("cox_snell", "firth", "warp_boot")


def mcse(report, estimator):
    """Monte Carlo standard error of the mean of each parameter."""
    return np.sqrt(report.summaries[estimator].variance / len(report.replicates))


class TestSmallSampleStudy(SimpleTestCase):
    """Class to test bias, variance and solution quality at n = 30 and n = 60"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.small = run_study(McConfig(n=30, m=REPLICATES, seed=20241016, threads=0))
        cls.large = run_study(McConfig(n=60, m=REPLICATES, seed=20241017, threads=0))

    @tag('integration', 'study')
    def test_mle_precision_bias(self):
        """
        test the MLE overestimates nu_0 by 0.05 to 0.20 at n = 30
        :return: None
        """
        bias = self.small.summaries["mle"].bias[NU_0]
        self.assertGreaterEqual(bias, 0.05)
        self.assertLessEqual(bias, 0.20)

    @tag('integration', 'study')
    def test_corrected_precision_bias(self):
        """
        test every corrected estimator of nu_0 and nu_1 has small bias and less than the MLE
        :return: None
        """
        mle_bias = np.abs(self.small.summaries["mle"].bias)
        for name in CORRECTED:
            bias = np.abs(self.small.summaries[name].bias)
            band = np.maximum(0.05, 3.0 * mcse(self.small, name))
            for index in (NU_0, NU_1):
                self.assertLess(bias[index], band[index], f"{name} parameter {index}")
            self.assertLess(bias[NU_0], mle_bias[NU_0], name)

    @tag('integration', 'study')
    def test_mean_bias_small(self):
        """
        test the MLE of beta_0 is nearly unbiased
        :return: None
        """
        bias = abs(self.small.summaries["mle"].bias[BETA_0])
        self.assertLess(bias, max(0.02, 3.0 * mcse(self.small, "mle")[BETA_0]))

    @tag('integration', 'study')
    def test_variance_order(self):
        """
        test the Cox-Snell variance of nu_0 does not exceed the warp-speed bootstrap variance
        :return: None
        """
        self.assertLessEqual(self.small.summaries["cox_snell"].variance[NU_0],
                             self.small.summaries["warp_boot"].variance[NU_0])

    @tag('integration', 'study')
    def test_bias_shrinks_with_n(self):
        """
        test the MLE bias of nu_0 is smaller at n = 60
        :return: None
        """
        self.assertLess(abs(self.large.summaries["mle"].bias[NU_0]), abs(self.small.summaries["mle"].bias[NU_0]))

    @tag('integration', 'study')
    def test_firth_solutions(self):
        """
        test every Firth fit solves U* = 0 and reduces the bias of nu_0
        :return: None
        """
        for report in (self.small, self.large):
            self.assertLess(max(outcome.firth_score_max for outcome in report.replicates), 1e-6)
            self.assertLess(abs(report.summaries["firth"].bias[NU_0]), abs(report.summaries["mle"].bias[NU_0]))

    @tag('integration', 'study')
    def test_warp_speed_identity(self):
        """
        test every stored bootstrap estimate is rebuilt exactly from 2 theta-hat - theta*
        :return: None
        """
        for report in (self.small, self.large):
            for outcome in report.replicates:
                rebuilt = 2.0 * outcome.estimates["mle"] - outcome.theta_star
                self.assertLessEqual(np.max(np.abs(outcome.estimates["warp_boot"] - rebuilt)), 1e-15)

    @tag('integration', 'study')
    def test_second_order_bias(self):
        """
        test the Cox-Snell bias at the truth predicts the empirical MLE bias of nu_0 at n = 60
        :return: None
        """
        cfg = self.large.config
        design = draw_design(cfg, np.random.SeedSequence(cfg.seed).spawn(2)[0])
        spec = ModelSpec(y=design.mu, X=design.X, Z=design.Z)
        predicted = cox_snell_bias(spec, np.asarray(cfg.true_theta)).joint[NU_0]
        empirical = self.large.summaries["mle"].bias[NU_0]
        tolerance = 3.0 * mcse(self.large, "mle")[NU_0] + 0.25 * abs(predicted)
        self.assertLess(abs(predicted - empirical), tolerance)
