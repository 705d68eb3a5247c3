"""Exception types shared across the package.

The CLI maps these onto exit codes: validation failures exit 1, numerical
failures exit 2, and I/O problems (plain OSError) exit 3.
"""


class ValidationError(ValueError):
    """An input violates a documented precondition or format."""


class NumericalError(RuntimeError):
    """A numerical routine failed to converge or produced unusable output."""
