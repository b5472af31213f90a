"""Exception hierarchy shared by all modules."""


class MinimaxError(Exception):
    """Base class for every error raised by this package."""


class ArgumentError(MinimaxError, ValueError):
    """Bad shapes, non-finite inputs, or out-of-range parameters."""


class NumericalFailure(MinimaxError, ArithmeticError):
    """An iterative routine produced NaN/Inf or otherwise broke down.

    ``iteration`` records where the failure was detected, when known.
    """

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class SingularityError(NumericalFailure):
    """A matrix or operator that must be inverted is singular.

    ``block`` names the offending block (e.g. ``"D"`` or ``"S"``).
    """

    def __init__(self, message, block=None, iteration=None):
        super().__init__(message, iteration=iteration)
        self.block = block


class ConvergenceError(NumericalFailure):
    """An iteration exhausted its budget; ``last_iterate`` holds where it stopped."""

    def __init__(self, message, last_iterate=None, iteration=None):
        super().__init__(message, iteration=iteration)
        self.last_iterate = last_iterate


class PreconditionError(MinimaxError, ValueError):
    """An analysis routine was called at a point violating its precondition."""


class AnalysisError(MinimaxError, ValueError):
    """Not enough usable data to estimate a quantity."""


class ConfigError(MinimaxError, ValueError):
    """Invalid experiment configuration; ``problems`` lists every violation."""

    def __init__(self, message, problems=()):
        super().__init__(message)
        self.problems = list(problems)


class SingularityWarning(RuntimeWarning):
    """A CG solve grew its solution far beyond the right-hand side."""
