"""Exception hierarchy.

Each class carries the process exit code the CLI reports for it.
"""


class ChangeDetectionError(Exception):
    exit_code = 1


class ParameterError(ChangeDetectionError, ValueError):
    """A caller-supplied parameter violates an operation's precondition."""

    exit_code = 2


class DataError(ChangeDetectionError, ValueError):
    exit_code = 3


class FormatError(DataError):
    """Malformed or unsupported file content."""


class RangeError(DataError):
    pass


class AlignmentError(DataError):
    pass


class DimensionError(DataError):
    pass


class ModelFileError(FormatError):
    pass


class MagicError(ModelFileError):
    pass


class VersionError(ModelFileError):
    pass


class ChecksumError(ModelFileError):
    pass


class TruncationError(ModelFileError):
    pass


class DegeneracyError(ChangeDetectionError, ArithmeticError):
    """Numerically degenerate input (rank deficiency, constant data, one class)."""

    exit_code = 4


class ImbalanceError(DegeneracyError):
    pass
