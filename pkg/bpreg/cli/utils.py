"""File with utilities behind the commands: CSV ingestion, fitting reports and output tables"""
import csv
import logging
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np
from rest_framework.renderers import JSONRenderer

from bpreg.cli.serializers import FitReportSerializer, McReportSerializer
from bpreg.core.exceptions import InvalidData, InvalidInput, NonPositiveResponse, ParseError, RaggedRows
from bpreg.core.fit import FIT_FAILURES, Method, fit_bootstrap, fit_cox_snell, fit_firth, fit_mle
from bpreg.core.model import ModelSpec
from bpreg.core.simulate import export_replicates, format_table, run_study

logger = logging.getLogger(__name__)

INTERCEPT = "(intercept)"
METHOD_ORDER = (Method.MLE, Method.COX_SNELL, Method.FIRTH, Method.BOOTSTRAP)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Named numeric columns read from a CSV file, with the response validated positive."""
    columns: dict
    response: str
    labels: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.columns[self.response].size

    @property
    def names(self):
        return tuple(self.columns)

    def column(self, name):
        """
        numeric column by name
        :param name: column header
        :return: float array
        """
        if name in self.labels:
            raise InvalidData(f"column '{name}' holds text, not numbers")
        try:
            return self.columns[name]
        except KeyError as error:
            raise InvalidData(f"unknown column '{name}', available: {', '.join(self.columns)}") from error


def parse_real(value, row, column):
    """
    method to parse a decimal real written with '.' as separator
    :param value: raw field
    :param row: 1-based data row, for the error message
    :param column: column name, for the error message
    :return: float
    """
    text = value.strip()
    try:
        number = Decimal(text)
    except InvalidOperation as error:
        raise ParseError(f"'{text}' is not a decimal number", row=row, column=column) from error
    if not number.is_finite():
        raise ParseError(f"'{text}' is not a finite number", row=row, column=column)
    return float(number)


def load_csv(path, response, text_columns=()):
    """
    method to read a rectangular CSV file with a header row
    :param path: file path
    :param response: name of the response column, which must be strictly positive
    :param text_columns: columns kept as text instead of parsed as reals
    :return: Dataset
    """
    rows = []
    # utf-8-sig drops a leading byte order mark
    with open(path, newline="", encoding="utf-8-sig") as file:
        reader = csv.reader(file)
        try:
            header = next(reader, None)
            if not header:
                raise InvalidInput("file has no header row")
            header = [name.strip() for name in header]
            if any(not name for name in header) or len(set(header)) != len(header):
                raise InvalidInput("header names must be non-empty and unique")
            if response not in header:
                raise InvalidInput("response column not found", column=response)
            if response in text_columns:
                raise InvalidInput("the response must be numeric", column=response)
            for row_number, row in enumerate(reader, start=1):
                if not row or all(not value.strip() for value in row):
                    continue
                if len(row) != len(header):
                    raise RaggedRows(f"expected {len(header)} fields, found {len(row)}", row=row_number)
                rows.append((row_number, row))
        except UnicodeDecodeError as error:
            raise ParseError(f"file is not valid UTF-8 text: {error.reason}") from error
    if not rows:
        raise InvalidInput("file has no data rows")
    columns = {}
    labels = {}
    for position, name in enumerate(header):
        if name in text_columns:
            labels[name] = tuple(row[position].strip() for _, row in rows)
        else:
            columns[name] = np.array([parse_real(row[position], row_number, name) for row_number, row in rows])
    for row_number, value in zip((number for number, _ in rows), columns[response]):
        if not value > 0:
            raise NonPositiveResponse(f"response must be strictly positive, found {value!r}",
                                      row=row_number, column=response)
    logger.info("loaded %d rows and %d columns from %s", len(rows), len(header), path)
    return Dataset(columns=columns, response=response, labels=labels)


def build_design(dataset, terms):
    """[1 | columns listed in terms]."""
    return np.column_stack([np.ones(dataset.n)] + [dataset.column(term) for term in terms])


@dataclass(frozen=True, eq=False)
class FitReport:
    """Per-method fits of one dataset plus the relative changes against the MLE."""
    response: str
    mean_terms: tuple
    prec_terms: tuple
    n: int
    methods: tuple
    results: dict
    errors: dict
    relative_changes: dict
    seed: int
    requested: tuple = ()

    @property
    def parameter_names(self):
        return ([f"beta_{index}" for index in range(len(self.mean_terms) + 1)]
                + [f"nu_{index}" for index in range(len(self.prec_terms) + 1)])

    @property
    def terms(self):
        return (INTERCEPT,) + tuple(self.mean_terms) + (INTERCEPT,) + tuple(self.prec_terms)

    @property
    def all_converged(self):
        return not self.errors and all(result.converged for result in self.results.values())

    @property
    def failed_methods(self):
        """requested methods without a converged fit; an implicit MLE does not count."""
        requested = self.requested or self.methods
        return tuple(method for method in requested
                     if method in self.errors or not self.results[method].converged)


def relative_change(theta_mle, theta_corrected):
    """
    |(theta-hat - theta_o) / theta_o| * 100 per parameter
    :param theta_mle: MLE
    :param theta_corrected: corrected estimate theta_o
    :return: array in percent, inf where theta_o is 0
    """
    theta_mle = np.asarray(theta_mle, dtype=float)
    theta_corrected = np.asarray(theta_corrected, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.abs((theta_mle - theta_corrected) / theta_corrected) * 100.0


def _fit_method(method, spec, opts, mle):
    if method is Method.MLE:
        return mle if mle is not None else fit_mle(spec, opts)
    if method is Method.COX_SNELL:
        return fit_cox_snell(spec, opts, mle=mle)
    if method is Method.FIRTH:
        return fit_firth(spec, opts, start=None if mle is None else mle.estimates)
    return fit_bootstrap(spec, opts, mle=mle)


def run_fit(dataset, mean_terms, prec_terms, methods, opts):
    """
    fit the requested methods on X = [1 | mean_terms], Z = [1 | prec_terms]; the MLE is
    always fitted because the relative changes are taken against it
    :param dataset: Dataset
    :param mean_terms: columns of the mean submodel
    :param prec_terms: columns of the precision submodel
    :param methods: iterable of Method or method names
    :param opts: FitOptions
    :return: FitReport, failed methods listed in its errors
    """
    asked = {Method(method) for method in methods}
    ordered = tuple(method for method in METHOD_ORDER if method in asked | {Method.MLE})
    spec = ModelSpec(y=dataset.column(dataset.response), X=build_design(dataset, mean_terms),
                     Z=build_design(dataset, prec_terms))
    results, errors = {}, {}
    mle = None
    for method in ordered:
        try:
            result = _fit_method(method, spec, replace(opts, method=method), mle)
        except FIT_FAILURES as error:
            errors[method.value] = f"{type(error).__name__}: {error}"
            logger.warning("%s failed: %s", method.value, error)
            continue
        if method is Method.MLE:
            mle = result
        results[method.value] = result
        logger.info("%s converged after %d iterations", method.value, result.iterations)
    relative_changes = {}
    if mle is not None:
        relative_changes = {name: relative_change(mle.estimates, result.estimates)
                            for name, result in results.items()}
    return FitReport(response=dataset.response, mean_terms=tuple(mean_terms), prec_terms=tuple(prec_terms),
                     n=dataset.n, methods=tuple(method.value for method in ordered), results=results,
                     errors=errors, relative_changes=relative_changes, seed=opts.seed,
                     requested=tuple(method.value for method in ordered if method in asked))


def _cell(value, width, digits, parentheses=False):
    if value is None or not np.isfinite(value):
        text = "-"
    else:
        text = f"{value:.{digits}f}"
    if parentheses:
        text = f"({text})"
    return text.rjust(width)


def format_estimates(report, digits=4):
    """
    estimate table with the standard error in parentheses beneath each estimate
    :param report: FitReport
    :param digits: fractional digits
    :return: str
    """
    width = digits + 10
    labels = [f"{name} {term}" for name, term in zip(report.parameter_names, report.terms)]
    label_width = max(len(label) for label in labels) + 2
    lines = ["Parameter".ljust(label_width) + "".join(method.rjust(width) for method in report.methods)]
    for position, label in enumerate(labels):
        estimates, errors = [], []
        for method in report.methods:
            result = report.results.get(method)
            estimates.append(_cell(None if result is None else result.estimates[position], width, digits))
            errors.append(_cell(None if result is None else result.std_errors[position], width, digits,
                                parentheses=True))
        lines.append(label.ljust(label_width) + "".join(estimates))
        lines.append("".ljust(label_width) + "".join(errors))
    return "\n".join(lines) + "\n"


def format_relative_changes(report, digits=4):
    """
    relative changes (%) of the MLE against each corrected estimate
    :param report: FitReport
    :param digits: fractional digits
    :return: str
    """
    width = digits + 10
    methods = [method for method in report.methods if method in report.relative_changes]
    label_width = max(len(name) for name in report.parameter_names) + 2
    lines = ["RC (%)".ljust(label_width) + "".join(method.rjust(width) for method in methods)]
    for position, name in enumerate(report.parameter_names):
        cells = "".join(_cell(report.relative_changes[method][position], width, digits) for method in methods)
        lines.append(name.ljust(label_width) + cells)
    return "\n".join(lines) + "\n"


def render_json(serializer):
    """
    method to render serializer data as indented JSON bytes
    :param serializer: DRF serializer wrapping the report
    :return: bytes
    """
    return JSONRenderer().render(serializer.data, renderer_context={"indent": 2})


def write_fit_json(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(render_json(FitReportSerializer(report)))
    return path


@dataclass(frozen=True, eq=False)
class SimulationOutputs:
    report: object
    json_path: Path
    text_path: Path
    csv_path: Path


def run_simulation(cfg, out_dir):
    """
    run the study and write report.json, report.txt and replicates.csv into out_dir
    :param cfg: McConfig
    :param out_dir: output directory, created when missing
    :return: SimulationOutputs
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = run_study(cfg)
    json_path = out_dir / "report.json"
    json_path.write_bytes(render_json(McReportSerializer(report)))
    text_path = out_dir / "report.txt"
    text_path.write_text(format_table(report), encoding="utf-8")
    csv_path = export_replicates(cfg, out_dir / "replicates.csv", replicates=report.replicates)
    return SimulationOutputs(report=report, json_path=json_path, text_path=text_path, csv_path=csv_path)
