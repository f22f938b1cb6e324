"""Exception hierarchy.

Every solver failure carries a ``stage`` tag so the command line runner can
map it onto an exit code and a manifest entry.
"""


class NSLogError(Exception):
    """Base class for all errors raised by the package."""

    stage = "generic"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class GridMismatchError(NSLogError, ValueError):
    stage = "input"


class GateError(NSLogError):
    """A smallness gate standing in for an implicit constant failed."""

    stage = "gate"


class NonContractionError(NSLogError):
    """A fixed-point iteration stopped contracting."""

    stage = "contraction"


class ConvergenceError(NSLogError):
    """An iteration hit its cap; ``best_estimate`` holds the last value."""

    stage = "convergence"

    def __init__(self, message, best_estimate=None, **details):
        super().__init__(message, **details)
        self.best_estimate = best_estimate


class NumericalError(NSLogError):
    """Step-size underflow, blow-up or a rejected explicit step."""

    stage = "numerical"


class SplitError(NSLogError):
    stage = "split"

    def __init__(self, message, best_norms=None, **details):
        super().__init__(message, **details)
        self.best_norms = best_norms or {}


class ConfigError(NSLogError, ValueError):
    stage = "config"
