"""File with the BP regression structure: designs, links, likelihood, score and information.

Both submodels are linear on the link scale, g1(mu_i) = x_i'beta and
g2(phi_i) = z_i'nu. Per observation the log-likelihood is an exponential
family in (alpha, beta2) = (mu (1 + phi), phi + 2) with sufficient statistic
(ln X, ln(1 - X)), X = y / (1 + y); the score and the information below are
written through that representation.
"""
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np
from scipy import linalg, sparse

from bpreg.core import distribution
from bpreg.core.exceptions import DomainError, EvaluationError, InvalidData, SingularInformation
from bpreg.core.special import digamma, trigamma

logger = logging.getLogger(__name__)

# Largest acceptable condition number of the information matrix scaled to unit diagonal.
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class LinkFns:
    """A link g with inverse mu = g^-1(eta) and the derivatives dmu/deta, d2mu/deta2."""
    name: str
    link: Callable
    inverse: Callable
    d1: Callable
    d2: Callable


def _exp(eta):
    with np.errstate(over="ignore"):
        return np.exp(eta)


LOG_LINK = LinkFns(name="log", link=np.log, inverse=_exp, d1=_exp, d2=_exp)

LINKS = {LOG_LINK.name: LOG_LINK}


def get_link(name):
    """
    look a link up by name
    :param name: link identifier
    :return: LinkFns
    """
    try:
        return LINKS[name]
    except KeyError as error:
        raise InvalidData(f"unknown link '{name}', available: {', '.join(sorted(LINKS))}") from error


def _frozen(values):
    values = np.array(values, dtype=float, copy=True)
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Response, mean design X (n x p), precision design Z (n x q) and links of a BP regression."""
    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    link_mu: str = "log"
    link_phi: str = "log"

    def __post_init__(self):
        y = _frozen(self.y)
        X = _frozen(self.X)
        Z = _frozen(self.Z)
        if y.ndim != 1 or y.size == 0:
            raise InvalidData("y must be a non-empty vector")
        n = y.size
        if X.ndim != 2 or Z.ndim != 2 or X.shape[0] != n or Z.shape[0] != n:
            raise InvalidData(f"X and Z must be matrices with {n} rows")
        if not np.all(np.isfinite(y)) or np.any(y <= 0):
            raise InvalidData("every response must be finite and strictly positive")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Z))):
            raise InvalidData("designs must contain finite values only")
        p, q = X.shape[1], Z.shape[1]
        if p < 1 or q < 1:
            raise InvalidData("each submodel needs at least one column")
        if n < p + q + 1:
            raise InvalidData(f"n = {n} observations cannot identify p + q = {p + q} parameters")
        if np.linalg.matrix_rank(X) < p:
            raise InvalidData(f"mean design is rank deficient (rank < {p})")
        if np.linalg.matrix_rank(Z) < q:
            raise InvalidData(f"precision design is rank deficient (rank < {q})")
        get_link(self.link_mu)
        get_link(self.link_phi)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)

    @property
    def n(self):
        return self.y.size

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def q(self):
        return self.Z.shape[1]

    @property
    def k(self):
        return self.p + self.q

    @cached_property
    def stacked_design(self):
        """Block diagonal [[X, 0], [0, Z]] of shape (2n, p + q)."""
        return linalg.block_diag(self.X, self.Z)

    def with_response(self, y):
        """Same designs and links with a new response vector."""
        return replace(self, y=y)

    def replicate(self, times):
        """The dataset stacked ``times`` times."""
        return replace(self, y=np.tile(self.y, times), X=np.tile(self.X, (times, 1)),
                       Z=np.tile(self.Z, (times, 1)))

    def predictors(self, theta):
        """
        means, precisions and link derivatives at theta
        :param theta: ParamVector or array of length p + q
        :return: LinearPredictors
        """
        theta = as_theta(theta, self)
        link_mu = get_link(self.link_mu)
        link_phi = get_link(self.link_phi)
        eta_mu = self.X @ theta[:self.p]
        eta_phi = self.Z @ theta[self.p:]
        values = LinearPredictors(
            mu=link_mu.inverse(eta_mu), phi=link_phi.inverse(eta_phi),
            dmu=link_mu.d1(eta_mu), dphi=link_phi.d1(eta_phi),
            d2mu=link_mu.d2(eta_mu), d2phi=link_phi.d2(eta_phi),
        )
        if not (np.all(np.isfinite(values.mu)) and np.all(np.isfinite(values.phi))
                and np.all(values.mu > 0) and np.all(values.phi > 0)):
            raise EvaluationError("theta maps to non-finite or non-positive means or precisions")
        return values


class LinearPredictors(NamedTuple):
    """Per-observation mu, phi and first and second link derivatives."""
    mu: np.ndarray
    phi: np.ndarray
    dmu: np.ndarray
    dphi: np.ndarray
    d2mu: np.ndarray
    d2phi: np.ndarray


@dataclass(frozen=True, eq=False)
class ParamVector:
    """theta = (beta, nu) with the p / q split carried alongside."""
    beta: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "beta", _frozen(np.atleast_1d(self.beta)))
        object.__setattr__(self, "nu", _frozen(np.atleast_1d(self.nu)))

    @classmethod
    def from_theta(cls, theta, p):
        theta = np.asarray(theta, dtype=float)
        return cls(beta=theta[:p], nu=theta[p:])

    @property
    def p(self):
        return self.beta.size

    @property
    def q(self):
        return self.nu.size

    @property
    def theta(self):
        return np.concatenate([self.beta, self.nu])

    def __len__(self):
        return self.p + self.q


def as_theta(theta, spec):
    """
    flat parameter array checked against the model dimensions
    :param theta: ParamVector or array-like
    :param spec: ModelSpec
    :return: float array of length p + q
    """
    if isinstance(theta, ParamVector):
        if theta.p != spec.p or theta.q != spec.q:
            raise InvalidData(f"theta has split ({theta.p}, {theta.q}), model needs ({spec.p}, {spec.q})")
        return theta.theta
    values = np.asarray(theta, dtype=float).reshape(-1)
    if values.size != spec.k:
        raise InvalidData(f"theta has {values.size} entries, model needs {spec.k}")
    return values


def _responses(spec, y):
    if y is None:
        return spec.y
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != spec.n or y.ndim > 2:
        raise InvalidData(f"responses must have shape (n,) or (R, n) with n = {spec.n}")
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise InvalidData("every response must be finite and strictly positive")
    return y


def _residuals(y, mu, phi):
    """
    centred sufficient statistics (ln X - E ln X, ln(1 - X) - E ln(1 - X))
    :return: tuple (r_alpha, r_beta), broadcast to the shape of y
    """
    alpha = mu * (1.0 + phi)
    psi_gamma = digamma(alpha + phi + 2.0)
    log1p_y = np.log1p(y)
    r_alpha = np.log(y) - log1p_y - digamma(alpha) + psi_gamma
    r_beta = -log1p_y - digamma(phi + 2.0) + psi_gamma
    return r_alpha, r_beta


def log_likelihood(spec, theta, y=None):
    """
    log-likelihood sum_i ln f(y_i; mu_i, phi_i)
    :param spec: ModelSpec
    :param theta: ParamVector or array
    :param y: optional responses of shape (n,) or (R, n) replacing spec.y
    :return: float, or an R-vector for a batch of responses
    """
    values = spec.predictors(theta)
    y = _responses(spec, y)
    try:
        with np.errstate(all="ignore"):
            total = np.sum(distribution.log_density(y, values.mu, values.phi), axis=-1)
    except DomainError as error:
        raise EvaluationError(str(error)) from error
    if not np.all(np.isfinite(total)):
        raise EvaluationError("log-likelihood is not finite")
    return float(total) if np.ndim(total) == 0 else total


def score(spec, theta, y=None):
    """
    analytic score U = (X' diag(dmu) s_mu, Z' diag(dphi) s_phi)
    :param spec: ModelSpec
    :param theta: ParamVector or array
    :param y: optional responses of shape (n,) or (R, n) replacing spec.y
    :return: (p + q)-vector, or (R, p + q) for a batch
    """
    values = spec.predictors(theta)
    y = _responses(spec, y)
    with np.errstate(all="ignore"):
        r_alpha, r_beta = _residuals(y, values.mu, values.phi)
        s_mu = (1.0 + values.phi) * r_alpha
        s_phi = values.mu * r_alpha + r_beta
        gradient = np.concatenate([(values.dmu * s_mu) @ spec.X,
                                   (values.dphi * s_phi) @ spec.Z], axis=-1)
    if not np.all(np.isfinite(gradient)):
        raise EvaluationError("score is not finite")
    return gradient


class InformationWeights(NamedTuple):
    """Diagonals of K_bb, K_bn and K_nn together with the polygamma values that built them."""
    w_bb: np.ndarray
    w_bn: np.ndarray
    w_nn: np.ndarray
    a: np.ndarray
    b: np.ndarray
    psi1_gamma: np.ndarray


def information_weights(values):
    """
    per-observation Fisher information weights on the link scale
    :param values: LinearPredictors
    :return: InformationWeights
    """
    mu, phi = values.mu, values.phi
    alpha = mu * (1.0 + phi)
    psi1_alpha = trigamma(alpha)
    psi1_gamma = trigamma(alpha + phi + 2.0)
    a = psi1_alpha - psi1_gamma
    b = mu ** 2 * psi1_alpha - (1.0 + mu) ** 2 * psi1_gamma + trigamma(phi + 2.0)
    return InformationWeights(
        w_bb=(1.0 + phi) ** 2 * a * values.dmu ** 2,
        w_bn=(1.0 + phi) * (a * mu - psi1_gamma) * values.dmu * values.dphi,
        w_nn=b * values.dphi ** 2,
        a=a, b=b, psi1_gamma=psi1_gamma,
    )


@dataclass(frozen=True, eq=False)
class InfoBlocks:
    """Expected Fisher information K = X~' K~ X~ with its blocks and Cholesky factor."""
    K_bb: np.ndarray
    K_bn: np.ndarray
    K_nn: np.ndarray
    K: np.ndarray
    Ktilde: sparse.csr_matrix
    Xtilde: np.ndarray
    p: int
    factor: tuple = field(repr=False)

    @property
    def q(self):
        return self.K.shape[0] - self.p

    def solve(self, vector):
        """K^-1 vector through the Cholesky factor."""
        return linalg.cho_solve(self.factor, vector)

    @cached_property
    def inverse(self):
        inverse = linalg.cho_solve(self.factor, np.eye(self.K.shape[0]))
        return 0.5 * (inverse + inverse.T)

    @property
    def inverse_blocks(self):
        """Partitioned inverse (K^bb, K^bn, K^nn)."""
        p = self.p
        return self.inverse[:p, :p], self.inverse[:p, p:], self.inverse[p:, p:]


def expected_information(spec, theta):
    """
    Fisher information of (beta, nu)
    :param spec: ModelSpec
    :param theta: ParamVector or array
    :return: InfoBlocks
    """
    values = spec.predictors(theta)
    weights = information_weights(values)
    X, Z = spec.X, spec.Z
    top = np.hstack([X.T @ (weights.w_bb[:, None] * X), X.T @ (weights.w_bn[:, None] * Z)])
    bottom = np.hstack([Z.T @ (weights.w_bn[:, None] * X), Z.T @ (weights.w_nn[:, None] * Z)])
    K = np.vstack([top, bottom])
    K = 0.5 * (K + K.T)
    if not np.all(np.isfinite(K)):
        raise EvaluationError("information matrix is not finite")
    scale = np.sqrt(np.diag(K))
    if not np.all(scale > 0):
        raise SingularInformation("information matrix has a non-positive diagonal")
    # unit-diagonal scaling removes the spread of mu and phi across parameters
    condition = np.linalg.cond(K / np.outer(scale, scale))
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise SingularInformation(f"information matrix is numerically singular (cond = {condition:.3g})")
    try:
        factor = linalg.cho_factor(K, lower=True)
    except linalg.LinAlgError as error:
        raise SingularInformation("information matrix is not positive definite") from error
    Ktilde = sparse.bmat([[sparse.diags(weights.w_bb), sparse.diags(weights.w_bn)],
                          [sparse.diags(weights.w_bn), sparse.diags(weights.w_nn)]], format="csr")
    return InfoBlocks(K_bb=weights.w_bb, K_bn=weights.w_bn, K_nn=weights.w_nn, K=K,
                      Ktilde=Ktilde, Xtilde=spec.stacked_design, p=spec.p, factor=factor)


def observed_information(spec, theta, y=None):
    """
    observed information J = -d2 loglik / dtheta dtheta'
    :param spec: ModelSpec
    :param theta: ParamVector or array
    :param y: optional responses of shape (n,) or (R, n) replacing spec.y
    :return: (p + q) x (p + q) matrix, or (R, p + q, p + q) for a batch
    """
    values = spec.predictors(theta)
    y = _responses(spec, y)
    weights = information_weights(values)
    with np.errstate(all="ignore"):
        r_alpha, r_beta = _residuals(y, values.mu, values.phi)
        j_bb = weights.w_bb - r_alpha * (1.0 + values.phi) * values.d2mu
        j_bn = weights.w_bn - r_alpha * values.dmu * values.dphi
        j_nn = weights.w_nn - (values.mu * r_alpha + r_beta) * values.d2phi
    X, Z = spec.X, spec.Z
    blocks = [
        [np.einsum("...i,ia,ib->...ab", j_bb, X, X), np.einsum("...i,ia,ib->...ab", j_bn, X, Z)],
        [np.einsum("...i,ia,ib->...ab", j_bn, Z, X), np.einsum("...i,ia,ib->...ab", j_nn, Z, Z)],
    ]
    J = np.concatenate([np.concatenate(row, axis=-1) for row in blocks], axis=-2)
    if not np.all(np.isfinite(J)):
        raise EvaluationError("observed information is not finite")
    return J
