"""File with the beta prime distribution in its mean/precision parameterization.

BP(mu, phi) is the law of X / (1 - X) for X ~ Beta(mu (1 + phi), phi + 2);
E[Y] = mu and Var[Y] = mu (1 + mu) / phi.
"""
from dataclasses import dataclass

import numpy as np
from scipy import special as sp_special

from bpreg.core.exceptions import DomainError
from bpreg.core.special import log_beta

# Cap on redraws of a degenerate beta variate; each redraw has probability ~0.
MAX_REDRAWS = 100


@dataclass(frozen=True)
class BpParams:
    """Mean and precision of a single BP distribution."""
    mu: float
    phi: float

    def __post_init__(self):
        for name in ("mu", "phi"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise DomainError(f"{name} must be a finite positive real, got {value!r}")

    @property
    def shape1(self):
        return self.mu * (1.0 + self.phi)

    @property
    def shape2(self):
        return self.phi + 2.0


def _shapes(mu, phi):
    mu = np.asarray(mu, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any(~np.isfinite(mu)) or np.any(mu <= 0) or np.any(~np.isfinite(phi)) or np.any(phi <= 0):
        raise DomainError("mu and phi must be finite and positive")
    return mu * (1.0 + phi), phi + 2.0


def log_density(y, mu, phi):
    """
    elementwise log-density, broadcasting y against (mu, phi)
    :param y: positive responses
    :param mu: means
    :param phi: precisions
    :return: log f(y; mu, phi)
    """
    y = np.asarray(y, dtype=float)
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise DomainError("the BP density is defined for finite y > 0")
    shape1, shape2 = _shapes(mu, phi)
    return ((shape1 - 1.0) * np.log(y) - (shape1 + shape2) * np.log1p(y)
            - log_beta(shape1, shape2))


def log_pdf(params, y):
    """
    log-density of BP(mu, phi) at y
    :param params: BpParams
    :param y: positive real or array
    :return: log f(y)
    """
    value = log_density(y, params.mu, params.phi)
    return float(value) if np.ndim(value) == 0 else value


def pdf(params, y):
    return np.exp(log_pdf(params, y))


def cdf(params, y):
    """
    distribution function, through the regularized incomplete beta of y / (1 + y)
    :param params: BpParams
    :param y: non-negative real or array
    :return: P(Y <= y)
    """
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("the BP distribution function is defined for y >= 0")
    value = sp_special.betainc(params.shape1, params.shape2, y / (1.0 + y))
    return float(value) if np.ndim(value) == 0 else value


def moments(params):
    """
    mean and variance
    :param params: BpParams
    :return: tuple (mean, variance)
    """
    return params.mu, params.mu * (1.0 + params.mu) / params.phi


def draw(mu, phi, rng, size=None):
    """
    Draw BP variates elementwise for arrays of (mu, phi).

    X ~ Beta(mu (1 + phi), phi + 2) comes from two gamma variates
    (numpy's Marsaglia-Tsang sampler), and Y = X / (1 - X) = G1 / G2.
    Draws where X is numerically 0 or 1 are redrawn.
    :param mu: means, broadcastable to size
    :param phi: precisions, broadcastable to size
    :param rng: numpy.random.Generator
    :param size: output shape, defaults to the broadcast shape of mu and phi
    :return: array of positive reals
    """
    shape1, shape2 = _shapes(mu, phi)
    if size is None:
        size = np.broadcast(shape1, shape2).shape
    shape1 = np.broadcast_to(shape1, size)
    shape2 = np.broadcast_to(shape2, size)
    numerator = np.asarray(rng.gamma(shape1, size=size), dtype=float)
    denominator = np.asarray(rng.gamma(shape2, size=size), dtype=float)
    for _ in range(MAX_REDRAWS):
        x = numerator / (numerator + denominator)
        bad = ~((x > 0.0) & (x < 1.0))
        if not np.any(bad):
            break
        numerator[bad] = rng.gamma(shape1[bad])
        denominator[bad] = rng.gamma(shape2[bad])
    else:
        raise DomainError("could not draw a non-degenerate beta variate")
    return numerator / denominator


def sample(params, rng, count):
    """
    sample count independent BP(mu, phi) variates
    :param params: BpParams
    :param rng: numpy.random.Generator, deterministic given its seed
    :param count: number of draws, at least 1
    :return: 1-d array of positive reals
    """
    if int(count) < 1:
        raise DomainError("count must be a positive integer")
    return draw(params.mu, params.phi, rng, size=(int(count),))
