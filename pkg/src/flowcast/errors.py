"""Exception hierarchy shared across the package."""


class FlowcastError(Exception):
    """Base class for every error raised by flowcast."""


class InputDataError(FlowcastError):
    """Malformed or inconsistent input: files, rows, configuration."""


class NumericalError(FlowcastError):
    """Degenerate, rank-deficient, unbalanced, or non-convergent computation."""
