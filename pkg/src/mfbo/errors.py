"""Exception types raised across the toolkit.

Everything derives from :class:`MfboError` so callers can catch the
package's failures with a single except clause while letting genuine
programming errors (TypeError and friends) propagate untouched.
"""

from __future__ import annotations


class MfboError(Exception):
    """Base class for all errors raised by this package."""


class NotPositiveDefinite(MfboError):
    """A matrix required to be symmetric positive definite failed to factor."""


class DimensionMismatch(MfboError):
    """Array arguments disagree on dimensionality or length."""


class LevelOutOfRange(MfboError):
    """A fidelity level index lies outside the valid range of the model/family."""


class DegenerateData(MfboError):
    """Training data cannot support a fit (too few points, etc.)."""


class OutOfDomain(MfboError):
    """A query point lies outside a benchmark's box domain."""


class UnknownBenchmark(MfboError):
    """No registry entry under the requested name."""


class UnknownAcquisition(MfboError):
    """The requested acquisition strategy name is not recognized."""


class EmptyInput(MfboError):
    """An operation that needs at least one element received none."""


class ConfigError(MfboError):
    """An experiment or suite configuration failed validation or parsing."""


class BudgetExhausted(MfboError):
    """No remaining fidelity level is affordable; normal loop termination."""


class IoFailure(MfboError):
    """Reading or writing a result artifact failed."""
