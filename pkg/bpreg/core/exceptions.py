"""File to create custom exceptions."""


class BpregError(Exception):
    """Base class for every error raised by the beta prime regression code"""


class DomainError(BpregError, ValueError):
    """Class exception for arguments outside the domain of a function"""


class InvalidData(BpregError, ValueError):
    """Class exception for a model definition that cannot be fitted"""


class InvalidOptions(BpregError, ValueError):
    """Class exception for fitting or simulation options breaking their invariants"""


class EvaluationError(BpregError, ArithmeticError):
    """Class exception for a non-finite log-likelihood or score"""


class SingularInformation(BpregError):
    """Class exception for a numerically singular Fisher information matrix"""


class NonConvergence(BpregError):
    """Class exception for an estimating iteration that did not converge"""


class SimulationAborted(BpregError):
    """Class exception for a Monte Carlo study with too many failed replicates"""


class InvalidInput(BpregError):
    """Class exception for invalid input into the uploaded file"""

    def __init__(self, message, row=None, column=None):
        """
        initial method
        :param message: human readable description
        :param row: 1-based data row (header excluded) where the problem was found
        :param column: column name where the problem was found
        """
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        text = f"{message} ({', '.join(location)})" if location else message
        super().__init__(text)
        self.row = row
        self.column = column


class ParseError(InvalidInput):
    """Class exception for a field which is not a decimal real"""


class NonPositiveResponse(InvalidInput):
    """Class exception for a response value outside the positive half-line"""


class RaggedRows(InvalidInput):
    """Class exception for a row whose field count differs from the header"""
