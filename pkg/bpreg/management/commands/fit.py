"""Command to fit a BP regression on a CSV file with any of the estimators."""
from django.core.management.base import BaseCommand, CommandError

from bpreg.cli.serializers import FitRequestSerializer
from bpreg.cli.utils import (format_estimates, format_relative_changes, load_csv, run_fit,
                             write_fit_json)
from bpreg.core.exceptions import InvalidData, InvalidInput, InvalidOptions


class Command(BaseCommand):
    """Class controller for `manage.py fit`."""
    help = "Fit log-log BP regression by MLE, Cox-Snell, Firth and parametric bootstrap."

    def add_arguments(self, parser):
        parser.add_argument("--data", required=True, help="CSV file with a header row")
        parser.add_argument("--response", required=True, help="response column, strictly positive")
        parser.add_argument("--mean", default="", help="comma separated mean covariates, e.g. wet,cs")
        parser.add_argument("--prec", default="", help="comma separated precision covariates, e.g. wet")
        parser.add_argument("--methods", default="mle,cox_snell,firth,boot",
                            help="comma separated subset of mle,cox_snell,firth,boot")
        parser.add_argument("--boot-reps", type=int, dest="boot_reps", help="bootstrap resamples")
        parser.add_argument("--seed", type=int, help="64-bit seed of the bootstrap streams")
        parser.add_argument("--max-iter", type=int, dest="max_iter", help="iteration cap")
        parser.add_argument("--json", help="also write the JSON report to this path")

    def handle(self, *args, **options):
        """
        method to process the command
        :param options: parsed flags
        :return: None; exits with code 1 when a requested method failed
        """
        fields = FitRequestSerializer().fields
        serializer = FitRequestSerializer(data={key: value for key, value in options.items()
                                                if key in fields and value is not None})
        if not serializer.is_valid():
            raise CommandError(f"invalid options: {dict(serializer.errors)}")
        data = serializer.validated_data
        try:
            opts = serializer.fit_options()
            dataset = load_csv(data["data"], data["response"])
            report = run_fit(dataset, data["mean"], data["prec"], data["methods"], opts)
        except FileNotFoundError as error:
            raise CommandError(f"data file not found: {data['data']}") from error
        except (InvalidInput, InvalidData, InvalidOptions) as error:
            raise CommandError(str(error)) from error
        self.stdout.write(format_estimates(report))
        self.stdout.write(format_relative_changes(report))
        if data["json"]:
            path = write_fit_json(report, data["json"])
            self.stdout.write(f"report written to {path}")
        for method, message in report.errors.items():
            if method in report.requested:
                self.stderr.write(f"{method}: {message}")
            else:
                self.stderr.write(f"{method} (reference for the relative changes, not requested): {message}")
        failed = report.failed_methods
        if failed:
            raise CommandError(f"{len(failed)} method(s) failed: {', '.join(failed)}", returncode=1)
