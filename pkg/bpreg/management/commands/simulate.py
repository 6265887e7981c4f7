"""Command to run the Monte Carlo study of the four estimators."""
from django.core.management.base import BaseCommand, CommandError

from bpreg.cli.serializers import SimulationRequestSerializer
from bpreg.cli.utils import run_simulation
from bpreg.core.exceptions import InvalidOptions, SimulationAborted
from bpreg.core.simulate import format_table


class Command(BaseCommand):
    """Class controller for `manage.py simulate`."""
    help = "Monte Carlo study: bias, variance and MSE of MLE, Cox-Snell, Firth and warp-speed bootstrap."

    def add_arguments(self, parser):
        parser.add_argument("--n", type=int, required=True, help="sample size")
        parser.add_argument("--p", type=int, help="slope covariates in the mean submodel (default 1)")
        parser.add_argument("--q", type=int, help="slope covariates in the precision submodel (default 1)")
        parser.add_argument("--m", type=int, help="Monte Carlo replicates")
        parser.add_argument("--seed", type=int, help="64-bit study seed")
        parser.add_argument("--out", help="output directory for report.json, report.txt and replicates.csv")
        parser.add_argument("--full", action="store_true", help="use the full replicate count")
        parser.add_argument("--threads", type=int, help="worker threads, 0 for all cores")

    def handle(self, *args, **options):
        """
        method to process the command
        :param options: parsed flags
        :return: None
        """
        fields = SimulationRequestSerializer().fields
        serializer = SimulationRequestSerializer(data={key: value for key, value in options.items()
                                                       if key in fields and value is not None})
        if not serializer.is_valid():
            raise CommandError(f"invalid options: {dict(serializer.errors)}")
        try:
            outputs = run_simulation(serializer.config(), serializer.validated_data["out"])
        except InvalidOptions as error:
            raise CommandError(str(error)) from error
        except SimulationAborted as error:
            raise CommandError(str(error), returncode=1) from error
        self.stdout.write(format_table(outputs.report))
        for path in (outputs.json_path, outputs.text_path, outputs.csv_path):
            self.stdout.write(f"written {path}")
