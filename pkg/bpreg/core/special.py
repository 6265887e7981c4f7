"""File with the real special functions used by the likelihood, information and cumulants.

Every function shifts its argument upward with the recurrence of the
function until it reaches ``ASYMPTOTIC_FROM`` and then sums the asymptotic
(Bernoulli number) expansion. Inputs may be scalars or numpy arrays of any
shape; scalars give back a float.
"""
import numpy as np

from bpreg.core.exceptions import DomainError

ASYMPTOTIC_FROM = 10.0

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def _positive(x, name):
    """
    validate argument and return it as a writable 1-d float array
    :param x: scalar or array
    :param name: function name for the error message
    :return: (flat copy of x, original shape)
    """
    values = np.asarray(x, dtype=float)
    if values.size and (not np.all(np.isfinite(values)) or np.any(values <= 0.0)):
        raise DomainError(f"{name} is defined for finite x > 0 only")
    return np.array(values, copy=True).reshape(-1), values.shape


def _restore(values, shape):
    if shape == ():
        return float(values[0])
    return values.reshape(shape)


def _shift_up(z, term):
    """Move every entry of z to at least ASYMPTOTIC_FROM, accumulating term(z) per step."""
    total = np.zeros_like(z)
    low = z < ASYMPTOTIC_FROM
    while np.any(low):
        total[low] += term(z[low])
        z[low] += 1.0
        low = z < ASYMPTOTIC_FROM
    return total


def log_gamma(x):
    """
    logarithm of the gamma function
    :param x: positive real or array
    :return: ln Γ(x)
    """
    z, shape = _positive(x, "log_gamma")
    shift = _shift_up(z, np.log)
    r = 1.0 / z
    r2 = r * r
    series = r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (
        1.0 / 1680.0 - r2 * (1.0 / 1188.0 - r2 * (691.0 / 360360.0 - r2 / 156.0))))))
    value = (z - 0.5) * np.log(z) - z + _HALF_LOG_2PI + series - shift
    return _restore(value, shape)


def digamma(x):
    """
    digamma function ψ(x) = d/dx ln Γ(x)
    :param x: positive real or array
    :return: ψ(x)
    """
    z, shape = _positive(x, "digamma")
    shift = _shift_up(z, np.reciprocal)
    r2 = 1.0 / (z * z)
    series = r2 * (1.0 / 12.0 - r2 * (1.0 / 120.0 - r2 * (1.0 / 252.0 - r2 * (
        1.0 / 240.0 - r2 * (1.0 / 132.0 - r2 * (691.0 / 32760.0 - r2 / 12.0))))))
    value = np.log(z) - 0.5 / z - series - shift
    return _restore(value, shape)


def trigamma(x):
    """
    trigamma function ψ⁽¹⁾(x)
    :param x: positive real or array
    :return: ψ⁽¹⁾(x), always positive
    """
    z, shape = _positive(x, "trigamma")
    shift = _shift_up(z, lambda t: 1.0 / (t * t))
    r = 1.0 / z
    r2 = r * r
    series = r * r2 * (1.0 / 6.0 - r2 * (1.0 / 30.0 - r2 * (1.0 / 42.0 - r2 * (
        1.0 / 30.0 - r2 * (5.0 / 66.0 - r2 * (691.0 / 2730.0 - r2 * 7.0 / 6.0))))))
    value = r + 0.5 * r2 + series + shift
    return _restore(value, shape)


def tetragamma(x):
    """
    tetragamma function ψ⁽²⁾(x)
    :param x: positive real or array
    :return: ψ⁽²⁾(x), always negative
    """
    z, shape = _positive(x, "tetragamma")
    shift = _shift_up(z, lambda t: 2.0 / (t * t * t))
    r = 1.0 / z
    r2 = r * r
    series = r2 * r2 * (0.5 - r2 * (1.0 / 6.0 - r2 * (1.0 / 6.0 - r2 * (
        0.3 - r2 * (5.0 / 6.0 - r2 * (691.0 / 210.0 - r2 * 17.5))))))
    value = -r2 - r2 * r - series - shift
    return _restore(value, shape)


def log_beta(a, b):
    """
    logarithm of the beta function, composed from log_gamma
    :param a: positive real or array
    :param b: positive real or array
    :return: ln B(a, b)
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b)
