"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: UsageError -> 1, DataError -> 2,
NumericError -> 3.
"""


class TabflowError(Exception):
    """Base class for all package errors."""


class UsageError(TabflowError):
    """Bad invocation: unknown flags, missing arguments, malformed config."""


class DataError(TabflowError):
    """Invalid or inconsistent input data (parse failures, domain violations,
    missing files, mismatched corpora)."""


class NumericError(TabflowError):
    """Numerical failure: non-finite values, solver divergence, degenerate
    statistics."""
