"""Exception hierarchy shared by all bhpcollapse modules."""

from __future__ import annotations


class BhpCollapseError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(BhpCollapseError):
    """A parameter violates its documented constraints."""


class InputFormatError(BhpCollapseError):
    """An input file is malformed; the message names the offending line."""


class InsufficientDataError(BhpCollapseError):
    """Too few observations to carry out the requested computation."""


class DegenerateDataError(BhpCollapseError):
    """Data has zero dispersion, so normalization is undefined."""


class NumericalConvergenceError(BhpCollapseError):
    """Quadrature failed to reach the requested tolerance.

    Carries the achieved absolute error estimate in ``achieved``.
    """

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


class ScanFailedError(BhpCollapseError):
    """Every grid point of a parameter scan failed; aggregates the causes."""

    def __init__(self, message: str, causes: list[str]):
        super().__init__(message + "; causes: " + "; ".join(causes))
        self.causes = tuple(causes)
