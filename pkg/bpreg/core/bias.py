"""File with the second order (Cox-Snell) bias of the BP regression MLE and the Firth adjustment.

Per observation, the contraction kappa_jk^(l) - kappa_jkl / 2 of the cumulants
reduces to one of six scalars M1..M6 times a product of design entries, so the
whole O(1/n) bias is

    B(theta) = K^-1 X~' delta1,

with delta1 built from the M diagonals and the leverages P of the partitioned
inverse information. The same vector X~' delta1 is the shift of the Firth
modified score U*(theta) = U(theta) - X~' delta1.
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from bpreg.core.model import ParamVector, as_theta, expected_information, score
from bpreg.core.special import tetragamma, trigamma

logger = logging.getLogger(__name__)

# Tolerance, relative to the bias size, for the block and joint forms to be called equal.
FORMS_AGREEMENT = 1e-8


class CumulantScalars(NamedTuple):
    """Per-observation polygamma combinations entering the second and third cumulants."""
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    e: np.ndarray
    psi1_gamma: np.ndarray
    psi2_gamma: np.ndarray


def cumulant_scalars(mu, phi):
    """
    the quantities a..e for every observation
    :param mu: positive means
    :param phi: positive precisions
    :return: CumulantScalars, with gamma = mu (1 + phi) + phi + 2
    """
    mu = np.asarray(mu, dtype=float)
    phi = np.asarray(phi, dtype=float)
    alpha = mu * (1.0 + phi)
    gamma = alpha + phi + 2.0
    psi1_alpha, psi1_gamma = trigamma(alpha), trigamma(gamma)
    psi2_alpha, psi2_gamma = tetragamma(alpha), tetragamma(gamma)
    return CumulantScalars(
        a=psi1_alpha - psi1_gamma,
        b=mu ** 2 * psi1_alpha - (1.0 + mu) ** 2 * psi1_gamma + trigamma(phi + 2.0),
        c=psi2_alpha - psi2_gamma,
        d=(1.0 + mu) ** 2 * psi2_gamma - mu ** 2 * psi2_alpha,
        e=(1.0 + mu) ** 3 * psi2_gamma - mu ** 3 * psi2_alpha - tetragamma(phi + 2.0),
        psi1_gamma=np.asarray(psi1_gamma, dtype=float),
        psi2_gamma=np.asarray(psi2_gamma, dtype=float),
    )


class MDiagonals(NamedTuple):
    """Diagonals of M1..M6."""
    m1: np.ndarray
    m2: np.ndarray
    m3: np.ndarray
    m4: np.ndarray
    m5: np.ndarray
    m6: np.ndarray


def m_matrices(spec, theta, cumulants=None):
    """
    diagonals of the six M matrices
    :param spec: ModelSpec
    :param theta: ParamVector or array
    :param cumulants: CumulantScalars at theta, computed when absent
    :return: MDiagonals
    """
    values = spec.predictors(theta)
    mu, phi = values.mu, values.phi
    dmu, dphi, d2mu, d2phi = values.dmu, values.dphi, values.d2mu, values.d2phi
    cum = cumulants if cumulants is not None else cumulant_scalars(mu, phi)
    a, b, c, d, e = cum.a, cum.b, cum.c, cum.d, cum.e
    shift = cum.psi1_gamma - a * mu
    onep = 1.0 + phi
    m1 = -0.5 * onep ** 2 * (onep * c * dmu ** 3 + a * dmu * d2mu)
    m2 = (0.5 * onep * shift * d2mu * dphi
          - 0.5 * onep ** 2 * (c * mu - cum.psi2_gamma) * dmu ** 2 * dphi)
    m3 = -0.5 * onep * ((2.0 * a + onep * (c * mu - cum.psi2_gamma)) * dmu ** 2 * dphi
                        + shift * d2mu * dphi)
    m4 = 0.5 * ((onep * d + 2.0 * shift) * dmu * dphi ** 2 - onep * shift * dmu * d2phi)
    # the squared precision derivative multiplies d only; shift carries the second derivative
    m5 = 0.5 * onep * dmu * (d * dphi ** 2 + shift * d2phi)
    m6 = 0.5 * (e * dphi ** 3 - b * dphi * d2phi)
    return MDiagonals(m1, m2, m3, m4, m5, m6)


@dataclass(frozen=True, eq=False)
class BiasWorkspace:
    """Everything the matrix form of the bias is assembled from, at one theta."""
    cumulants: CumulantScalars
    m: MDiagonals
    P_bb: np.ndarray
    P_bn: np.ndarray
    P_nn: np.ndarray
    delta1: np.ndarray
    info: object
    Kinv_bb: np.ndarray
    Kinv_bn: np.ndarray
    Kinv_nn: np.ndarray

    @property
    def upper(self):
        return self.delta1[:self.delta1.size // 2]

    @property
    def lower(self):
        return self.delta1[self.delta1.size // 2:]

    @property
    def adjustment(self):
        """X~' delta1, the shift between the score and the Firth modified score."""
        return self.info.Xtilde.T @ self.delta1

    @property
    def joint_bias(self):
        """(X~' K~ X~)^-1 X~' delta1."""
        return self.info.solve(self.adjustment)


def bias_workspace(spec, theta):
    """
    build the bias workspace at theta
    :param spec: ModelSpec
    :param theta: ParamVector or array
    :return: BiasWorkspace
    """
    info = expected_information(spec, theta)
    values = spec.predictors(theta)
    cum = cumulant_scalars(values.mu, values.phi)
    m = m_matrices(spec, theta, cum)
    Kinv_bb, Kinv_bn, Kinv_nn = info.inverse_blocks
    X, Z = spec.X, spec.Z
    P_bb = np.einsum("ia,ab,ib->i", X, Kinv_bb, X)
    P_bn = np.einsum("ia,ab,ib->i", X, Kinv_bn, Z)
    P_nn = np.einsum("ia,ab,ib->i", Z, Kinv_nn, Z)
    delta1 = np.concatenate([
        m.m1 * P_bb + (m.m2 + m.m3) * P_bn + m.m5 * P_nn,
        m.m2 * P_bb + (m.m4 + m.m5) * P_bn + m.m6 * P_nn,
    ])
    return BiasWorkspace(cumulants=cum, m=m, P_bb=P_bb, P_bn=P_bn, P_nn=P_nn, delta1=delta1,
                         info=info, Kinv_bb=Kinv_bb, Kinv_bn=Kinv_bn, Kinv_nn=Kinv_nn)


@dataclass(frozen=True, eq=False)
class BiasResult:
    """O(1/n) bias of beta-hat and nu-hat and the joint vector."""
    bias_beta: np.ndarray
    bias_nu: np.ndarray
    joint: np.ndarray


def cox_snell_bias(spec, theta, workspace=None):
    """
    second order bias of the MLE, evaluated at theta
    :param spec: ModelSpec
    :param theta: ParamVector or array
    :param workspace: BiasWorkspace at theta, built when absent
    :return: BiasResult, with the block expressions for beta and nu and the joint form
    """
    ws = workspace if workspace is not None else bias_workspace(spec, theta)
    x_upper = spec.X.T @ ws.upper
    z_lower = spec.Z.T @ ws.lower
    bias_beta = ws.Kinv_bb @ x_upper + ws.Kinv_bn @ z_lower
    bias_nu = ws.Kinv_bn.T @ x_upper + ws.Kinv_nn @ z_lower
    joint = ws.joint_bias
    gap = np.max(np.abs(np.concatenate([bias_beta, bias_nu]) - joint))
    if gap > FORMS_AGREEMENT * (1.0 + np.max(np.abs(joint))):
        logger.warning("block and joint bias forms differ by %.3e", gap)
    return BiasResult(bias_beta=bias_beta, bias_nu=bias_nu, joint=joint)


def corrected_estimate(theta_hat, spec, bias=None):
    """
    corrective estimator theta~ = theta-hat - B(theta-hat)
    :param theta_hat: converged MLE, ParamVector or array
    :param spec: ModelSpec
    :param bias: BiasResult at theta_hat, computed when absent
    :return: ParamVector
    """
    theta = as_theta(theta_hat, spec)
    bias = bias if bias is not None else cox_snell_bias(spec, theta)
    return ParamVector.from_theta(theta - bias.joint, spec.p)


def firth_adjustment(spec, theta):
    """X~' delta1 at theta."""
    return bias_workspace(spec, theta).adjustment


def modified_score(spec, theta, adjustment=firth_adjustment):
    """
    Firth modified score U*(theta) = U(theta) - X~' delta1(theta)
    :param spec: ModelSpec
    :param theta: ParamVector or array
    :param adjustment: callable (spec, theta) -> shift of the score
    :return: (p + q)-vector
    """
    return score(spec, theta) - adjustment(spec, theta)
