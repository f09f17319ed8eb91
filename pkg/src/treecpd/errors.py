"""Exception hierarchy. Each class maps to a distinct CLI exit code."""


class TreeCPDError(Exception):
    exit_code = 1


class IngestionError(TreeCPDError, ValueError):
    """Malformed or unusable input data."""

    exit_code = 3


class ConfigurationError(TreeCPDError, ValueError):
    """Invalid hyper-parameters, priors or run options."""

    exit_code = 2


class NumericalError(TreeCPDError, ArithmeticError):
    """A quantity that should be finite and positive is not."""

    exit_code = 4


class UnsupportedOperation(TreeCPDError):
    exit_code = 2
