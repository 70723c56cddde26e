"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class PointManifoldError(Exception):
    exit_code = 1


class UsageError(PointManifoldError):
    exit_code = 2


class DataError(PointManifoldError, ValueError):
    """Bad or inconsistent input data."""

    exit_code = 3


class InvalidInputError(DataError):
    pass


class InsufficientPointsError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class FormatError(DataError):
    pass


class ContractError(DataError):
    """Shape or state contract violated between layers / components."""


class InvalidStateError(ContractError):
    pass


class CheckpointError(DataError):
    pass


class MissingCacheError(DataError):
    pass


class NumericalError(PointManifoldError, ArithmeticError):
    exit_code = 4
