"""Exception types shared across the package.

The CLI maps PreconditionError to exit status 2 and NumericalError to exit
status 3; everything else is a bug.
"""


class PreconditionError(ValueError):
    """An operation was called outside its documented domain of validity."""


class NumericalError(RuntimeError):
    """A computation failed to reach its accuracy or stability target."""
