"""Exception types shared across the package.

The CLI maps these onto distinct exit codes (input errors vs numerical
failures), so estimators and IO code should raise them instead of bare
ValueError/RuntimeError when the failure class matters to a caller.
"""


class InputDataError(ValueError):
    """Malformed user-supplied data (CSV rows, configs, dimension mismatches)."""


class NumericalError(RuntimeError):
    """A numerical operation failed in a way that invalidates the result."""
