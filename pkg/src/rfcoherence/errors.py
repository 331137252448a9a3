"""Exception hierarchy; CLI exit codes hang off these classes."""


class RFCoherenceError(Exception):
    exit_code = 3


class ConfigError(RFCoherenceError, ValueError):
    """Invalid parameters or configuration documents."""

    exit_code = 2


class NumericError(RFCoherenceError):
    exit_code = 3


class ModelValidityWarning(UserWarning):
    """A model assumption (time-scale separation, no pure dephasing, ...) is violated."""


class OutputError(RFCoherenceError):
    """Reading or writing an artifact failed."""

    exit_code = 4
