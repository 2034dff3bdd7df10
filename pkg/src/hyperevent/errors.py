"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes (see cli.py): configuration problems
exit with 2, data validation failures with 3, numerical failures with 4.
"""


class HyperEventError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(HyperEventError):
    """Bad, missing, or inconsistent run configuration."""


class DataValidationError(HyperEventError):
    """Input data violates a structural invariant; nothing is repaired."""


class DuplicateLabelError(DataValidationError):
    """A node label appears more than once."""


class UnknownLabelError(DataValidationError):
    """An event references a label absent from the node table."""


class SelfReceiverError(DataValidationError):
    """An event lists its sender among the receivers."""


class EmptyReceiverError(DataValidationError):
    """An event has no receivers."""


class TimestampError(DataValidationError):
    """A timestamp precedes the observation start or is not positive."""


class NumericalError(HyperEventError):
    """A numerical procedure failed (non-finite posterior, dead weights, ...)."""
