"""Exception taxonomy shared by every module.

The CLI maps these onto exit codes: usage errors exit 1, data/format
errors exit 2, numeric failures exit 3.
"""


class ToolkitError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(ToolkitError):
    """Caller violated an operation's precondition or passed bad arguments."""


class DataFormatError(ToolkitError):
    """A file or payload does not conform to its on-disk contract."""


class NumericError(ToolkitError):
    """A computation produced a non-finite value."""
