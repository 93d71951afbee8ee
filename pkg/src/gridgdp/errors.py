"""Exception types raised across the pipeline."""


class GridGdpError(Exception):
    """Base class for package errors."""


class ParseError(GridGdpError, ValueError):
    """Malformed input file; ``line`` is the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ValidationError(GridGdpError, ValueError):
    """Input violates a documented constraint."""


class InsufficientDataError(ValidationError):
    """Not enough observations for the requested estimate."""


class ConvergenceError(GridGdpError, RuntimeError):
    """Likelihood maximization failed; carries the best candidate found."""

    def __init__(self, message, best=None, grad_norm=None):
        self.best = best
        self.grad_norm = grad_norm
        super().__init__(message)


class StationarityError(GridGdpError, ValueError):
    """AR polynomial not stationary or MA polynomial not invertible."""


class CovariancePathologyError(GridGdpError, RuntimeError):
    """Too many Monte Carlo draws fell outside the admissible parameter region."""
