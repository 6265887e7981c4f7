"""File to develop serializers for command options and JSON reports"""
import math

import numpy as np
from django.conf import settings
from rest_framework import serializers

from bpreg.core.fit import FitOptions, Method
from bpreg.core.simulate import ESTIMATORS, McConfig

METHOD_ALIASES = {"boot": Method.BOOTSTRAP.value}
MAX_SEED = 2 ** 64 - 1


def finite_or_none(values):
    """
    method to turn numbers into JSON-safe values
    :param values: scalar, array or None
    :return: float, list of floats, or None where a value is missing or not finite
    """
    if values is None:
        return None
    if np.ndim(values) == 0:
        value = float(values)
        return value if math.isfinite(value) else None
    return [finite_or_none(value) for value in np.asarray(values, dtype=float)]


def split_names(value):
    return [name.strip() for name in value.split(",") if name.strip()]


def _threads_default():
    return settings.BPREG_THREADS


class FitRequestSerializer(serializers.Serializer):
    """Class serializer for the options of the fit command"""

    data = serializers.CharField()
    response = serializers.CharField()
    mean = serializers.CharField(allow_blank=True, default="")
    prec = serializers.CharField(allow_blank=True, default="")
    methods = serializers.CharField(default="mle,cox_snell,firth,boot")
    boot_reps = serializers.IntegerField(min_value=1, required=False)
    seed = serializers.IntegerField(min_value=0, max_value=MAX_SEED, required=False)
    max_iter = serializers.IntegerField(min_value=1, required=False)
    json = serializers.CharField(required=False, allow_null=True, default=None)

    def validate_mean(self, value):
        return split_names(value)

    def validate_prec(self, value):
        return split_names(value)

    def validate_methods(self, value):
        """
        method to validate the comma separated method list
        :param value: e.g. 'mle,cox_snell,firth,boot'
        :return: list of Method without duplicates, in the given order
        """
        methods = []
        for name in split_names(value):
            try:
                method = Method(METHOD_ALIASES.get(name, name))
            except ValueError as error:
                raise serializers.ValidationError(
                    f"unknown method '{name}', use mle, cox_snell, firth or boot") from error
            if method not in methods:
                methods.append(method)
        if not methods:
            raise serializers.ValidationError("at least one method is required")
        return methods

    def fit_options(self):
        """
        method to build fitting options from the validated flags and the FIT defaults
        :return: FitOptions
        """
        defaults = settings.BPREG["FIT"]
        data = self.validated_data
        return FitOptions(
            max_iter=data.get("max_iter", defaults["MAX_ITER"]),
            tol_score=defaults["TOL_SCORE"],
            tol_step=defaults["TOL_STEP"],
            step_halvings=defaults["STEP_HALVINGS"],
            bootstrap_reps=data.get("boot_reps", defaults["BOOTSTRAP_REPS"]),
            seed=data.get("seed", defaults["SEED"]),
            threads=_threads_default(),
        )


class SimulationRequestSerializer(serializers.Serializer):
    """Class serializer for the options of the simulate command"""

    n = serializers.IntegerField(min_value=2)
    p = serializers.IntegerField(min_value=0, default=1)
    q = serializers.IntegerField(min_value=0, default=1)
    m = serializers.IntegerField(min_value=1, required=False)
    seed = serializers.IntegerField(min_value=0, max_value=MAX_SEED, required=False)
    out = serializers.CharField(required=False)
    full = serializers.BooleanField(default=False)
    threads = serializers.IntegerField(min_value=0, required=False)

    def validate(self, attrs):
        """
        method which validate options together
        :param attrs: all input options
        :return: attrs with defaults from the SIMULATION settings filled in
        """
        defaults = settings.BPREG["SIMULATION"]
        if attrs["n"] <= attrs["p"] + attrs["q"] + 2:
            raise serializers.ValidationError({"n": f"n must exceed p + q + 2 = {attrs['p'] + attrs['q'] + 2}"})
        if attrs["full"]:
            attrs["m"] = defaults["FULL_M"]
        attrs.setdefault("m", defaults["M"])
        attrs.setdefault("seed", defaults["SEED"])
        attrs.setdefault("out", str(defaults["OUTPUT_DIR"]))
        attrs.setdefault("threads", _threads_default())
        return attrs

    def config(self):
        """
        method to build the study configuration
        :return: McConfig
        """
        data = self.validated_data
        fit = settings.BPREG["FIT"]
        options = FitOptions(max_iter=fit["MAX_ITER"], tol_score=fit["TOL_SCORE"], tol_step=fit["TOL_STEP"],
                             step_halvings=fit["STEP_HALVINGS"], seed=data["seed"], threads=1)
        return McConfig(n=data["n"], p=data["p"], q=data["q"], m=data["m"], seed=data["seed"],
                        threads=data["threads"], fit_options=options)


class FitReportSerializer(serializers.Serializer):
    """Class serializer for the JSON report of the fit command"""

    schema_version = serializers.SerializerMethodField()
    model = serializers.SerializerMethodField()
    methods = serializers.SerializerMethodField()
    relative_changes = serializers.SerializerMethodField()
    seed = serializers.IntegerField()

    def get_schema_version(self, report):
        return settings.BPREG["SCHEMA_VERSION"]

    def get_model(self, report):
        return {
            "response": report.response,
            "mean_terms": list(report.mean_terms),
            "prec_terms": list(report.prec_terms),
            "link_mu": "log",
            "link_phi": "log",
            "n": report.n,
            "parameters": report.parameter_names,
        }

    def get_methods(self, report):
        """
        method to describe every requested method, failed ones included
        :param report: FitReport
        :return: dict keyed by method name
        """
        methods = {}
        requested = report.requested or report.methods
        for name in report.methods:
            result = report.results.get(name)
            if result is None:
                methods[name] = {"estimates": None, "std_errors": None, "converged": False,
                                 "requested": name in requested, "error": report.errors.get(name)}
                continue
            methods[name] = {
                "estimates": finite_or_none(result.estimates),
                "std_errors": finite_or_none(result.std_errors),
                "converged": result.converged,
                "requested": name in requested,
                "stop_reason": result.stop_reason,
                "iterations": result.iterations,
                "loglik": finite_or_none(result.loglik),
                "max_abs_score": finite_or_none(result.score_max),
                "bias_applied": finite_or_none(result.bias_applied),
                "covariance": result.covariance,
                "se_point": finite_or_none(result.se_point.theta),
                "error": None,
            }
        return methods

    def get_relative_changes(self, report):
        return {name: finite_or_none(values) for name, values in report.relative_changes.items()}


class McReportSerializer(serializers.Serializer):
    """Class serializer for the JSON report of the simulate command"""

    schema_version = serializers.SerializerMethodField()
    config = serializers.SerializerMethodField()
    parameters = serializers.SerializerMethodField()
    estimators = serializers.SerializerMethodField()
    replicates = serializers.SerializerMethodField()
    failures = serializers.SerializerMethodField()
    max_firth_modified_score = serializers.SerializerMethodField()

    def get_schema_version(self, report):
        return settings.BPREG["SCHEMA_VERSION"]

    def get_config(self, report):
        cfg = report.config
        return {"n": cfg.n, "p": cfg.p, "q": cfg.q, "m": cfg.m, "seed": cfg.seed,
                "true_theta": list(cfg.true_theta), "links": "log"}

    def get_parameters(self, report):
        return report.parameter_names

    def get_estimators(self, report):
        return {
            name: {statistic: finite_or_none(getattr(report.summaries[name], statistic))
                   for statistic in ("mean", "bias", "variance", "mse")}
            for name in ESTIMATORS
        }

    def get_replicates(self, report):
        return len(report.replicates)

    def get_failures(self, report):
        return [{"replicate": index + 1, "error": message} for index, message in report.failures]

    def get_max_firth_modified_score(self, report):
        return finite_or_none(max(outcome.firth_score_max for outcome in report.replicates))
