"""File to test the BP distribution"""
import math

import numpy as np
from django.test import SimpleTestCase, tag
from scipy import integrate, stats

from bpreg.core.distribution import BpParams, cdf, draw, log_density, log_pdf, moments, pdf, sample
from bpreg.core.exceptions import DomainError

PAIRS = ((1.0, 1.0), (0.5, 4.0), (3.0, 2.0))


class TestDensity(SimpleTestCase):
    """Class to test density, log-density and distribution function"""

    @tag('unit')
    def test_closed_form_value(self):
        """
        test f(1; 1, 1) = 12 * 1 * 2^-5 = 0.375
        :return: None
        """
        self.assertAlmostEqual(log_pdf(BpParams(1.0, 1.0), 1.0), math.log(0.375), places=12)

    @tag('unit')
    def test_normalization(self):
        """
        test the density integrates to one
        :return: None
        """
        for mu, phi in PAIRS:
            params = BpParams(mu, phi)
            total, _ = integrate.quad(lambda y: pdf(params, y), 0.0, np.inf, epsabs=1e-12, epsrel=1e-12,
                                      limit=200)
            self.assertAlmostEqual(total, 1.0, delta=1e-6)

    @tag('unit')
    def test_mean_by_quadrature(self):
        """
        test E[Y] = mu for mu = 2, phi = 3
        :return: None
        """
        params = BpParams(2.0, 3.0)
        mean, _ = integrate.quad(lambda y: y * pdf(params, y), 0.0, np.inf, epsabs=1e-12, epsrel=1e-12,
                                 limit=200)
        self.assertAlmostEqual(mean, 2.0, delta=1e-5)

    @tag('unit')
    def test_vectorized_log_density(self):
        """
        test log_density broadcasts y against per-observation parameters
        :return: None
        """
        y = np.array([0.5, 1.0, 2.0])
        mu = np.array([1.0, 2.0, 0.5])
        phi = np.array([1.0, 3.0, 4.0])
        values = log_density(y, mu, phi)
        expected = [log_pdf(BpParams(m, f), v) for v, m, f in zip(y, mu, phi)]
        np.testing.assert_allclose(values, expected, rtol=1e-14)

    @tag('unit')
    def test_cdf_matches_integrated_density(self):
        """
        test the incomplete beta form of the CDF against quadrature of the density
        :return: None
        """
        for mu, phi in PAIRS:
            params = BpParams(mu, phi)
            for y in (0.1, 0.8, 2.5, 10.0):
                integral, _ = integrate.quad(lambda t: pdf(params, t), 0.0, y, epsabs=1e-12, epsrel=1e-12)
                self.assertAlmostEqual(cdf(params, y), integral, delta=1e-8)

    @tag('unit')
    def test_single_mode(self):
        """
        test the derivative of log_pdf changes sign once, at (alpha - 1) / (phi + 3)
        :return: None
        """
        params = BpParams(1.0, 1.0)
        grid = np.linspace(0.01, 10.0, 2000)
        h = 1e-6
        slope = (log_pdf(params, grid + h) - log_pdf(params, grid - h)) / (2 * h)
        self.assertEqual(np.count_nonzero(np.diff(np.sign(slope)) != 0), 1)
        mode = (params.shape1 - 1.0) / (params.shape2 + 1.0)
        self.assertGreater(log_pdf(params, mode), log_pdf(params, mode - 0.01))
        self.assertGreater(log_pdf(params, mode), log_pdf(params, mode + 0.01))

    @tag('unit')
    def test_domain(self):
        """
        test invalid parameters and responses
        :return: None
        """
        with self.assertRaises(DomainError):
            BpParams(0.0, 1.0)
        with self.assertRaises(DomainError):
            BpParams(1.0, -1.0)
        with self.assertRaises(DomainError):
            BpParams(float("nan"), 1.0)
        with self.assertRaises(DomainError):
            log_pdf(BpParams(1.0, 1.0), 0.0)
        with self.assertRaises(DomainError):
            cdf(BpParams(1.0, 1.0), -1.0)


class TestMoments(SimpleTestCase):
    """Class to test mean and variance"""

    @tag('unit')
    def test_values(self):
        """
        test (1, 1) -> (1, 2) and (0.5, 4) -> (0.5, 0.1875)
        :return: None
        """
        self.assertEqual(moments(BpParams(1.0, 1.0)), (1.0, 2.0))
        mean, variance = moments(BpParams(0.5, 4.0))
        self.assertEqual(mean, 0.5)
        self.assertAlmostEqual(variance, 0.1875, places=15)

    @tag('unit')
    def test_variance_decreases_in_phi(self):
        """
        test the variance falls monotonically as the precision grows
        :return: None
        """
        variances = [moments(BpParams(1.0, phi))[1] for phi in (1.0, 10.0, 100.0, 1e4)]
        self.assertTrue(all(a > b for a, b in zip(variances, variances[1:])))


class TestSampling(SimpleTestCase):
    """Class to test seeded sampling"""

    @tag('unit')
    def test_mean(self):
        """
        test 1e5 draws from BP(1, 1): mean within 3 sqrt(2/N) of 1
        :return: None
        """
        count = 100_000
        values = sample(BpParams(1.0, 1.0), np.random.default_rng(7), count)
        self.assertLess(abs(values.mean() - 1.0), 3.0 * math.sqrt(2.0 / count))

    @tag('unit')
    def test_second_moment_heavy_tail(self):
        """
        test E[Y^2] = 3 for BP(1, 1) by quadrature; the fourth moment is infinite there,
        so the sample variance has no CLT band and is checked on BP(0.5, 4) instead
        :return: None
        """
        params = BpParams(1.0, 1.0)
        second, _ = integrate.quad(lambda y: y * y * pdf(params, y), 0.0, np.inf, epsabs=1e-10, limit=400)
        self.assertAlmostEqual(second, 3.0, delta=1e-4)

    @tag('unit')
    def test_mean_and_variance_light_tail(self):
        """
        test 1e5 draws from BP(0.5, 4): mean within the CLT band, variance within 10%
        :return: None
        """
        count = 100_000
        params = BpParams(0.5, 4.0)
        values = sample(params, np.random.default_rng(11), count)
        mean, variance = moments(params)
        self.assertLess(abs(values.mean() - mean), 3.0 * math.sqrt(variance / count))
        self.assertLess(abs(values.var() - variance), 0.1 * variance)

    @tag('unit')
    def test_kolmogorov_smirnov(self):
        """
        test the sampler against the CDF at the 1% level
        :return: None
        """
        for seed, (mu, phi) in enumerate(PAIRS, start=100):
            params = BpParams(mu, phi)
            values = sample(params, np.random.default_rng(seed), 100_000)
            result = stats.kstest(values, lambda y: cdf(params, y))
            self.assertGreater(result.pvalue, 0.01)

    @tag('unit')
    def test_deterministic(self):
        """
        test the same seed gives the same draws
        :return: None
        """
        params = BpParams(2.0, 3.0)
        first = sample(params, np.random.default_rng(2024), 50)
        second = sample(params, np.random.default_rng(2024), 50)
        np.testing.assert_array_equal(first, second)
        self.assertTrue(np.all(first > 0))

    @tag('unit')
    def test_draw_per_observation(self):
        """
        test draw keeps the broadcast shape of the parameters
        :return: None
        """
        rng = np.random.default_rng(3)
        values = draw(np.array([0.5, 1.0, 2.0]), 3.0, rng)
        self.assertEqual(values.shape, (3,))
        batch = draw(np.array([0.5, 1.0, 2.0]), np.array([1.0, 2.0, 3.0]), rng, size=(4, 3))
        self.assertEqual(batch.shape, (4, 3))

    @tag('unit')
    def test_count(self):
        """
        test count must be at least one
        :return: None
        """
        with self.assertRaises(DomainError):
            sample(BpParams(1.0, 1.0), np.random.default_rng(1), 0)
