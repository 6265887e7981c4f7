"""File with the Monte Carlo study of the four estimators.

One U(0,1) covariate matrix is drawn per study and held fixed; every replicate
simulates a response at the true parameters, then fits the MLE, the Cox-Snell
corrective estimator, the Firth estimator and the warp-speed bootstrap (one
resample, 2 theta-hat - theta*). Streams come from one SeedSequence: the first
child draws the design, the second spawns one child per replicate, so results
do not depend on the number of worker threads.
"""
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from joblib import Parallel, delayed

from bpreg.core import distribution
from bpreg.core.exceptions import InvalidData, InvalidOptions, SimulationAborted
from bpreg.core.fit import (FIT_FAILURES, FitOptions, bootstrap_correction, bootstrap_refit,
                            fit_cox_snell, fit_firth, fit_mle)
from bpreg.core.model import ModelSpec

logger = logging.getLogger(__name__)

ESTIMATORS = ("mle", "cox_snell", "firth", "warp_boot")


@dataclass(frozen=True)
class McConfig:
    """
    Study settings; p and q count slope covariates, intercepts are always included,
    so theta has p + q + 2 entries (all ones unless true_theta is given)
    """
    n: int
    p: int = 1
    q: int = 1
    m: int = 2000
    seed: int = 2024
    true_theta: tuple = None
    threads: int = 1
    fit_options: FitOptions = field(default_factory=FitOptions)
    max_failure_rate: float = 0.01

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise InvalidOptions("p and q must be non-negative")
        if self.n <= self.p + self.q + 2:
            raise InvalidOptions(f"n must exceed p + q + 2 = {self.p + self.q + 2}")
        if self.m < 1:
            raise InvalidOptions("m must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidOptions("seed must be a 64-bit unsigned integer")
        if self.threads < 0:
            raise InvalidOptions("threads must be non-negative (0 = all cores)")
        if not 0 <= self.max_failure_rate < 1:
            raise InvalidOptions("max_failure_rate must lie in [0, 1)")
        truth = np.ones(self.k) if self.true_theta is None else np.asarray(self.true_theta, dtype=float)
        if truth.shape != (self.k,) or not np.all(np.isfinite(truth)):
            raise InvalidOptions(f"true_theta must hold {self.k} finite values")
        object.__setattr__(self, "true_theta", tuple(float(value) for value in truth))

    @property
    def k(self):
        return self.p + self.q + 2

    @property
    def n_jobs(self):
        return -1 if self.threads == 0 else self.threads

    @property
    def parameter_names(self):
        return ([f"beta_{index}" for index in range(self.p + 1)]
                + [f"nu_{index}" for index in range(self.q + 1)])


class Design(NamedTuple):
    X: np.ndarray
    Z: np.ndarray
    mu: np.ndarray
    phi: np.ndarray


def draw_design(cfg, seed_sequence):
    """
    fixed covariates shared by both submodels: X = [1 | U[:, :p]], Z = [1 | U[:, :q]]
    :param cfg: McConfig
    :param seed_sequence: SeedSequence for the covariate draw
    :return: Design with the true means and precisions
    """
    rng = np.random.Generator(np.random.PCG64(seed_sequence))
    covariates = rng.uniform(size=(cfg.n, max(cfg.p, cfg.q)))
    ones = np.ones((cfg.n, 1))
    X = np.hstack([ones, covariates[:, :cfg.p]])
    Z = np.hstack([ones, covariates[:, :cfg.q]])
    truth = np.asarray(cfg.true_theta)
    return Design(X=X, Z=Z, mu=np.exp(X @ truth[:cfg.p + 1]), phi=np.exp(Z @ truth[cfg.p + 1:]))


@dataclass(frozen=True, eq=False)
class ReplicateOutcome:
    """Estimates of one replicate, or the reason it failed."""
    index: int
    estimates: dict = None
    theta_star: np.ndarray = None
    firth_score_max: float = float("nan")
    error: str = None

    @property
    def failed(self):
        return self.error is not None


def run_replicate(design, index, seed_sequence, opts):
    """
    simulate one response and fit the four estimators
    :param design: Design
    :param index: replicate number
    :param seed_sequence: SeedSequence owned by the replicate
    :param opts: FitOptions
    :return: ReplicateOutcome
    """
    data_stream, boot_stream = seed_sequence.spawn(2)
    rng = np.random.Generator(np.random.PCG64(data_stream))
    try:
        spec = ModelSpec(y=distribution.draw(design.mu, design.phi, rng), X=design.X, Z=design.Z)
        mle = fit_mle(spec, opts)
        cox_snell = fit_cox_snell(spec, opts, mle=mle)
        firth = fit_firth(spec, opts, start=mle.estimates)
        fitted = spec.predictors(mle.theta)
        theta_star = bootstrap_refit(spec, fitted.mu, fitted.phi, mle.estimates, boot_stream, opts, index)
    except FIT_FAILURES as error:
        return ReplicateOutcome(index=index, error=f"{type(error).__name__}: {error}")
    estimates = {
        "mle": mle.estimates,
        "cox_snell": cox_snell.estimates,
        "firth": firth.estimates,
        "warp_boot": bootstrap_correction(mle.estimates, theta_star),
    }
    return ReplicateOutcome(index=index, estimates=estimates, theta_star=theta_star,
                            firth_score_max=firth.score_max)


class EstimatorSummary(NamedTuple):
    """Per-parameter mean, bias, variance and MSE of one estimator."""
    mean: np.ndarray
    bias: np.ndarray
    variance: np.ndarray
    mse: np.ndarray


def summarize(estimates, truth):
    """
    population moments over successful replicates
    :param estimates: array (replicates, parameters)
    :param truth: true parameter vector
    :return: EstimatorSummary, with mse = variance + bias^2
    """
    estimates = np.asarray(estimates, dtype=float)
    mean = np.mean(estimates, axis=0)
    bias = mean - np.asarray(truth, dtype=float)
    variance = np.var(estimates, axis=0)
    return EstimatorSummary(mean=mean, bias=bias, variance=variance, mse=variance + bias ** 2)


@dataclass(frozen=True, eq=False)
class McReport:
    """Summary per estimator plus the raw replicates."""
    config: McConfig
    summaries: dict
    replicates: tuple
    failures: tuple = ()

    @property
    def failure_count(self):
        return len(self.failures)

    @property
    def parameter_names(self):
        return self.config.parameter_names

    def estimates(self, estimator):
        """array (successful replicates, parameters) of one estimator."""
        return np.vstack([outcome.estimates[estimator] for outcome in self.replicates])


def run_study(cfg):
    """
    run the Monte Carlo study
    :param cfg: McConfig
    :return: McReport
    """
    design_stream, replicate_root = np.random.SeedSequence(cfg.seed).spawn(2)
    design = draw_design(cfg, design_stream)
    try:
        ModelSpec(y=design.mu, X=design.X, Z=design.Z)
    except InvalidData as error:
        raise InvalidOptions(f"the drawn design cannot be fitted: {error}") from error
    logger.info("study n=%d p=%d q=%d m=%d seed=%d started", cfg.n, cfg.p, cfg.q, cfg.m, cfg.seed)
    outcomes = Parallel(n_jobs=cfg.n_jobs, prefer="threads")(
        delayed(run_replicate)(design, index, stream, cfg.fit_options)
        for index, stream in enumerate(replicate_root.spawn(cfg.m))
    )
    failures = tuple((outcome.index, outcome.error) for outcome in outcomes if outcome.failed)
    for index, message in failures:
        logger.warning("replicate %d excluded: %s", index, message)
    if len(failures) > cfg.max_failure_rate * cfg.m:
        raise SimulationAborted(f"{len(failures)} of {cfg.m} replicates failed")
    replicates = tuple(outcome for outcome in outcomes if not outcome.failed)
    summaries = {
        name: summarize(np.vstack([outcome.estimates[name] for outcome in replicates]), cfg.true_theta)
        for name in ESTIMATORS
    }
    logger.info("study finished: %d replicates, %d excluded", len(replicates), len(failures))
    return McReport(config=cfg, summaries=summaries, replicates=replicates, failures=failures)


def export_replicates(cfg, path, replicates=None):
    """
    write one CSV row per replicate and estimator: replicate, estimator, theta_1..theta_k
    :param cfg: McConfig
    :param path: destination file
    :param replicates: outcomes of a finished study; the study is run when absent
    :return: Path of the written file
    """
    if replicates is None:
        replicates = run_study(cfg).replicates
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file)
        writer.writerow(["replicate", "estimator"] + [f"theta_{index}" for index in range(1, cfg.k + 1)])
        for outcome in replicates:
            for name in ESTIMATORS:
                writer.writerow([outcome.index + 1, name] + [repr(float(value)) for value in outcome.estimates[name]])
    logger.info("replicates written to %s", path)
    return path


STATISTICS = ("mean", "bias", "variance", "mse")


def format_table(report, digits=4):
    """
    aligned text table: for each parameter the mean, bias, variance and MSE rows,
    one column per estimator
    :param report: McReport
    :param digits: fractional digits
    :return: str
    """
    cfg = report.config
    label_width = max(len(name) for name in cfg.parameter_names) + len("variance") + 3
    width = digits + 8
    lines = [f"n = {cfg.n}, p = {cfg.p}, q = {cfg.q}, m = {cfg.m}, seed = {cfg.seed}, "
             f"excluded = {report.failure_count}",
             "".ljust(label_width) + "".join(name.rjust(width) for name in ESTIMATORS)]
    for position, parameter in enumerate(cfg.parameter_names):
        for statistic in STATISTICS:
            label = f"{parameter} {statistic}" if statistic == "mean" else f"  {statistic}"
            cells = "".join(f"{getattr(report.summaries[name], statistic)[position]:{width}.{digits}f}"
                            for name in ESTIMATORS)
            lines.append(label.ljust(label_width) + cells)
    return "\n".join(lines) + "\n"
