"""File with the estimation drivers: Fisher scoring MLE, Firth, Cox-Snell and parametric bootstrap."""
import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from joblib import Parallel, delayed
from scipy import optimize

from bpreg.core import distribution
from bpreg.core.bias import corrected_estimate, cox_snell_bias, firth_adjustment
from bpreg.core.exceptions import (DomainError, EvaluationError, InvalidData, InvalidOptions,
                                   NonConvergence, SingularInformation)
from bpreg.core.model import (ParamVector, as_theta, expected_information, get_link, log_likelihood,
                              observed_information, score)

logger = logging.getLogger(__name__)

# Responses are clamped here before the link is applied in the warm start.
RESPONSE_FLOOR = 1e-10
# A failed bootstrap resample is redrawn at most this many times.
MAX_RESAMPLE_REDRAWS = 10
# Root solvers tried, in order, when damped scoring stalls.
ROOT_METHODS = ("hybr", "lm")
ROOT_XTOL = 1e-12
# Residual reported to the root solvers at points where the equations cannot be evaluated.
UNEVALUABLE = 1e10
# Loss of log-likelihood tolerated as rounding when a root replaces a stalled ascent.
LOGLIK_ROUNDING = 1e-10

FIT_FAILURES = (NonConvergence, SingularInformation, EvaluationError, DomainError, InvalidData)


class Method(str, Enum):
    MLE = "mle"
    COX_SNELL = "cox_snell"
    FIRTH = "firth"
    BOOTSTRAP = "bootstrap"


@dataclass(frozen=True)
class FitOptions:
    """Iteration limits, tolerances and the estimator to use."""
    max_iter: int = 200
    tol_score: float = 1e-8
    tol_step: float = 1e-10
    step_halvings: int = 30
    method: Method = Method.MLE
    bootstrap_reps: int = 500
    seed: int = 2024
    threads: int = 1

    def __post_init__(self):
        try:
            object.__setattr__(self, "method", Method(self.method))
        except ValueError as error:
            raise InvalidOptions(f"unknown method '{self.method}'") from error
        if self.max_iter < 1:
            raise InvalidOptions("max_iter must be at least 1")
        if not (self.tol_score > 0 and self.tol_step > 0):
            raise InvalidOptions("tolerances must be positive")
        if self.step_halvings < 0:
            raise InvalidOptions("step_halvings must be non-negative")
        if self.bootstrap_reps < 1:
            raise InvalidOptions("bootstrap_reps must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidOptions("seed must be a 64-bit unsigned integer")
        if self.threads < 0:
            raise InvalidOptions("threads must be non-negative (0 = all cores)")

    @property
    def n_jobs(self):
        return -1 if self.threads == 0 else self.threads


@dataclass(frozen=True, eq=False)
class FitResult:
    """Estimate of one method with its standard errors and iteration diagnostics."""
    method: Method
    theta: ParamVector
    std_errors: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    bias_applied: np.ndarray = None
    loglik_trace: tuple = field(default=(), repr=False)
    score_max: float = float("nan")
    se_point: ParamVector = None
    covariance: str = "expected"
    stop_reason: str = "score"

    @property
    def estimates(self):
        return self.theta.theta


def standard_errors(spec, theta):
    """sqrt(diag K(theta)^-1)."""
    return np.sqrt(np.diag(expected_information(spec, theta).inverse))


def _safe_loglik(spec, theta):
    try:
        return log_likelihood(spec, theta)
    except EvaluationError:
        return float("nan")


def initial_estimate(spec):
    """
    warm start: least squares of g1(y) on X for beta and the method-of-moments
    precision phi~ = ybar (1 + ybar) / s^2 as the constant fitted by Z for nu
    :param spec: ModelSpec
    :return: float array of length p + q
    """
    link_mu = get_link(spec.link_mu)
    link_phi = get_link(spec.link_phi)
    beta, *_ = np.linalg.lstsq(spec.X, link_mu.link(np.maximum(spec.y, RESPONSE_FLOOR)), rcond=None)
    mean, variance = np.mean(spec.y), np.var(spec.y, ddof=1)
    phi = mean * (1.0 + mean) / variance if np.isfinite(variance) and variance > 0 else 1.0
    nu, *_ = np.linalg.lstsq(spec.Z, np.full(spec.n, link_phi.link(phi)), rcond=None)
    theta = np.concatenate([beta, nu])
    try:
        log_likelihood(spec, theta)
    except EvaluationError:
        logger.debug("least squares start is not evaluable, falling back to constant means")
        beta, *_ = np.linalg.lstsq(spec.X, np.full(spec.n, link_mu.link(mean)), rcond=None)
        theta = np.concatenate([beta, np.zeros(spec.q)])
    return theta


def _halving_search(objective, theta0, direction, value0, halvings, accept):
    """
    try theta0 + direction / 2^j for j = 0..halvings and keep the first accepted point
    :param objective: callable theta -> value, may raise an evaluation error
    :param accept: callable (value, value0) -> bool
    :return: (theta, value, j) or (None, value0, halvings) if nothing was accepted
    """
    for halving in range(halvings + 1):
        step_size = 0.5 ** halving
        theta = theta0 + step_size * direction
        try:
            value = objective(theta)
        except (EvaluationError, DomainError, SingularInformation):
            continue
        if accept(value, value0):
            return theta, value, halving
    return None, value0, halvings


def _solve_root(function, theta0, tol, jacobian=None):
    """
    root of a system of estimating equations near theta0 with scipy's MINPACK solvers
    :param function: callable theta -> residual vector, may raise an evaluation error
    :param theta0: starting point
    :param tol: max-abs residual at which the search stops
    :param jacobian: optional callable theta -> d residual / d theta, finite differences otherwise
    :return: (theta, residual) of the best point found, or (None, None)
    """
    def residual(theta):
        try:
            value = function(theta)
        except (EvaluationError, DomainError, SingularInformation):
            return np.full(theta0.size, UNEVALUABLE)
        return value if np.all(np.isfinite(value)) else np.full(theta0.size, UNEVALUABLE)

    best, best_value = None, None
    for method in ROOT_METHODS:
        try:
            solution = optimize.root(residual, theta0, jac=jacobian, method=method,
                                     options={"xtol": ROOT_XTOL})
        except (EvaluationError, DomainError, SingularInformation, np.linalg.LinAlgError, ValueError) as error:
            logger.debug("root solver %s failed: %s", method, error)
            continue
        value = residual(solution.x)
        if best_value is None or np.max(np.abs(value)) < np.max(np.abs(best_value)):
            best, best_value = solution.x, value
        logger.debug("root solver %s reached max|residual| = %.3e", method, np.max(np.abs(value)))
        if np.max(np.abs(best_value)) < tol:
            break
    if best_value is None or np.max(np.abs(best_value)) >= UNEVALUABLE:
        return None, None
    return best, best_value


def fit_mle(spec, opts=None, start=None):
    """
    maximum likelihood by Fisher scoring theta <- theta + K^-1 U with step halving
    :param spec: ModelSpec
    :param opts: FitOptions
    :param start: optional starting theta, the warm start otherwise
    :return: FitResult
    """
    opts = opts or FitOptions()
    theta = as_theta(start, spec) if start is not None else initial_estimate(spec)
    loglik = log_likelihood(spec, theta)
    trace = [loglik]
    stop_reason = None
    rooted = False
    for iteration in range(opts.max_iter + 1):
        gradient = score(spec, theta)
        score_max = float(np.max(np.abs(gradient)))
        if score_max < opts.tol_score * (1.0 + abs(loglik)):
            stop_reason = "root" if rooted else "score"
            break
        if iteration == opts.max_iter:
            break
        direction = expected_information(spec, theta).solve(gradient)
        candidate, value, halvings = _halving_search(
            lambda t: log_likelihood(spec, t), theta, direction, loglik, opts.step_halvings,
            accept=lambda new, old: new >= old)
        if candidate is None:
            candidate, value = _polish_maximum(spec, theta, loglik, opts)
            if candidate is None:
                raise NonConvergence(f"step halving found no ascent step at iteration {iteration + 1}")
            logger.debug("mle iteration %d: line search stalled, root solve reached loglik %.10g",
                         iteration + 1, value)
            theta, loglik = candidate, value
            trace.append(loglik)
            rooted = True
            continue
        step = np.max(np.abs(candidate - theta)) / (1.0 + np.max(np.abs(theta)))
        theta, loglik = candidate, value
        trace.append(loglik)
        rooted = False
        logger.debug("mle iteration %d: loglik %.10g, halvings %d", iteration + 1, loglik, halvings)
        if step < opts.tol_step:
            stop_reason = "step"
            score_max = float(np.max(np.abs(score(spec, theta))))
            break
    if stop_reason is None:
        raise NonConvergence(f"Fisher scoring did not converge in {opts.max_iter} iterations")
    point = ParamVector.from_theta(theta, spec.p)
    return FitResult(method=Method.MLE, theta=point, std_errors=standard_errors(spec, theta),
                     loglik=loglik, iterations=len(trace) - 1, converged=True,
                     loglik_trace=tuple(trace), score_max=score_max, se_point=point, stop_reason=stop_reason)


def _polish_maximum(spec, theta, loglik, opts):
    """
    Newton root solve of U = 0 with the analytic Jacobian -J, used when no halving of the
    scoring step raises the log-likelihood; the root must not lose more than rounding
    :return: (theta, loglik) or (None, None)
    """
    tol = opts.tol_score * (1.0 + abs(loglik))
    root, _ = _solve_root(lambda t: score(spec, t), theta, tol,
                          jacobian=lambda t: -observed_information(spec, t))
    if root is None:
        return None, None
    value = _safe_loglik(spec, root)
    if not value >= loglik - LOGLIK_ROUNDING * (1.0 + abs(loglik)):
        return None, None
    return root, value


def fit_firth(spec, opts=None, start=None, adjustment=firth_adjustment):
    """
    Firth estimator: the root of U*(theta) = U(theta) - X~' delta1, found by modified
    Fisher scoring with step halving on ||U*||; where no halving lowers ||U*|| a MINPACK
    root solve of U* takes the step instead
    :param spec: ModelSpec
    :param opts: FitOptions
    :param start: optional starting theta; the MLE (or the warm start if it fails) otherwise
    :param adjustment: callable (spec, theta) -> score shift
    :return: FitResult
    """
    opts = opts or FitOptions()
    if start is None:
        try:
            start = fit_mle(spec, opts).estimates
        except FIT_FAILURES as error:
            logger.debug("Firth falls back to the warm start: %s", error)
            start = initial_estimate(spec)
    theta = as_theta(start, spec)

    def modified(t):
        return score(spec, t) - adjustment(spec, t)

    gradient = modified(theta)
    norm = float(np.linalg.norm(gradient))
    trace = [_safe_loglik(spec, theta)]
    stop_reason = None
    rooted = False
    iterations = 0
    for iteration in range(opts.max_iter + 1):
        if np.max(np.abs(gradient)) < opts.tol_score:
            stop_reason = "root" if rooted else "score"
            break
        if iteration == opts.max_iter:
            break
        direction = expected_information(spec, theta).solve(gradient)
        candidate, value, halvings = _halving_search(
            modified, theta, direction, gradient, opts.step_halvings,
            accept=lambda new, old: np.linalg.norm(new) < np.linalg.norm(old))
        rooted = candidate is None
        if rooted:
            # K^-1 U* is not a descent direction for ||U*|| here
            candidate, value = _solve_root(modified, theta, opts.tol_score)
            if candidate is None or not np.linalg.norm(value) < norm:
                raise NonConvergence(f"step halving could not reduce ||U*|| at iteration {iteration + 1}")
        theta, gradient = candidate, value
        norm = float(np.linalg.norm(gradient))
        iterations += 1
        trace.append(_safe_loglik(spec, theta))
        logger.debug("firth iteration %d: ||U*|| %.3e, %s", iterations, norm,
                     "root solve" if rooted else f"halvings {halvings}")
    if stop_reason is None:
        raise NonConvergence(f"modified scoring did not converge in {opts.max_iter} iterations")
    point = ParamVector.from_theta(theta, spec.p)
    return FitResult(method=Method.FIRTH, theta=point, std_errors=standard_errors(spec, theta),
                     loglik=trace[-1], iterations=iterations, converged=True,
                     loglik_trace=tuple(trace), score_max=float(np.max(np.abs(gradient))),
                     se_point=point, stop_reason=stop_reason)


def fit_cox_snell(spec, opts=None, mle=None):
    """
    corrective estimator theta-hat - B(theta-hat); standard errors stay those of the MLE
    :param spec: ModelSpec
    :param opts: FitOptions
    :param mle: FitResult of the MLE, fitted when absent
    :return: FitResult
    """
    mle = mle or fit_mle(spec, opts)
    bias = cox_snell_bias(spec, mle.theta)
    point = corrected_estimate(mle.theta, spec, bias)
    return FitResult(method=Method.COX_SNELL, theta=point, std_errors=mle.std_errors,
                     loglik=_safe_loglik(spec, point), iterations=mle.iterations, converged=True,
                     bias_applied=bias.joint, loglik_trace=mle.loglik_trace,
                     score_max=mle.score_max, se_point=mle.theta, stop_reason=mle.stop_reason)


def bootstrap_correction(theta_hat, theta_stars):
    """
    2 theta-hat - mean(theta*); with a single resample this is the warp-speed rule
    :param theta_hat: MLE on the original data
    :param theta_stars: array (B, p + q) of resample MLEs
    :return: corrected estimate as an array
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    theta_stars = np.atleast_2d(np.asarray(theta_stars, dtype=float))
    return 2.0 * theta_hat - np.mean(theta_stars, axis=0)


def bootstrap_refit(spec, mu, phi, theta_hat, seed_sequence, opts, index):
    """
    MLE on one parametric resample from BP(mu, phi), redrawing failed resamples
    :param spec: ModelSpec supplying the designs
    :param mu: fitted means
    :param phi: fitted precisions
    :param theta_hat: starting point of the refit
    :param seed_sequence: numpy SeedSequence owned by this resample
    :param opts: FitOptions
    :param index: resample number, for messages
    :return: theta* as an array
    """
    rng = np.random.Generator(np.random.PCG64(seed_sequence))
    for attempt in range(MAX_RESAMPLE_REDRAWS + 1):
        resample = spec.with_response(distribution.draw(mu, phi, rng))
        try:
            return fit_mle(resample, opts, start=theta_hat).estimates
        except FIT_FAILURES as error:
            logger.warning("bootstrap resample %d (attempt %d) failed: %s", index, attempt + 1, error)
    raise NonConvergence(f"bootstrap resample {index} failed {MAX_RESAMPLE_REDRAWS + 1} times")


def fit_bootstrap(spec, opts=None, mle=None):
    """
    parametric bootstrap correction 2 theta-hat - mean_b theta*_b with resamples drawn
    from BP(mu-hat_i, phi-hat_i); every resample has its own stream spawned from opts.seed
    :param spec: ModelSpec
    :param opts: FitOptions
    :param mle: FitResult of the MLE, fitted when absent
    :return: FitResult
    """
    opts = opts or FitOptions(method=Method.BOOTSTRAP)
    mle = mle or fit_mle(spec, opts)
    values = spec.predictors(mle.theta)
    streams = np.random.SeedSequence(opts.seed).spawn(opts.bootstrap_reps)
    theta_stars = Parallel(n_jobs=opts.n_jobs, prefer="threads")(
        delayed(bootstrap_refit)(spec, values.mu, values.phi, mle.estimates, stream, opts, index)
        for index, stream in enumerate(streams)
    )
    theta_stars = np.vstack(theta_stars)
    theta = bootstrap_correction(mle.estimates, theta_stars)
    point = ParamVector.from_theta(theta, spec.p)
    logger.info("bootstrap correction from %d resamples", opts.bootstrap_reps)
    return FitResult(method=Method.BOOTSTRAP, theta=point, std_errors=standard_errors(spec, theta),
                     loglik=_safe_loglik(spec, point), iterations=mle.iterations, converged=True,
                     bias_applied=mle.estimates - theta, loglik_trace=mle.loglik_trace,
                     score_max=mle.score_max, se_point=point, stop_reason=mle.stop_reason)


FITTERS = {
    Method.MLE: fit_mle,
    Method.COX_SNELL: fit_cox_snell,
    Method.FIRTH: fit_firth,
    Method.BOOTSTRAP: fit_bootstrap,
}


def fit(spec, opts=None):
    """
    fit with the estimator named by opts.method
    :param spec: ModelSpec
    :param opts: FitOptions
    :return: FitResult
    """
    opts = opts or FitOptions()
    result = FITTERS[opts.method](spec, opts)
    logger.info("%s fit finished after %d iterations", opts.method.value, result.iterations)
    return result
