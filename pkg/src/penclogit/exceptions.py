"""Exception hierarchy shared by the fitting modules and the CLI."""

from __future__ import annotations


class PenclogitError(Exception):
    """Base class for all package errors."""


class FormatError(PenclogitError, ValueError):
    """Malformed input rows or files."""


class EmptyDatasetError(PenclogitError, ValueError):
    """No usable strata remain after validation."""


class ParameterError(PenclogitError, ValueError):
    """Invalid configuration value."""


class DegenerateDataError(PenclogitError, ValueError):
    """Data carry no signal to fit (e.g. zero score at the origin)."""


class NumericError(PenclogitError, ArithmeticError):
    """Non-finite quantity encountered in the likelihood."""


class ConvergenceError(PenclogitError, RuntimeError):
    """An iterative routine hit its iteration cap.

    The last iterate is kept on ``beta`` (and ``score`` when available) so
    callers can decide whether to accept it.
    """

    def __init__(self, message, beta=None, score=None):
        super().__init__(message)
        self.beta = beta
        self.score = score
