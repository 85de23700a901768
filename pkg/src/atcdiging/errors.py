"""Exception hierarchy shared by all modules."""


class AtcDigingError(Exception):
    """Base class for every error raised by this package."""


class InsufficientHistory(AtcDigingError, ValueError):
    """A horizon K was requested beyond the stored sequence."""


class NotDoublyStochastic(AtcDigingError, ValueError):
    pass


class ReferenceSolverDiverged(AtcDigingError, RuntimeError):
    pass


class Diverged(AtcDigingError, RuntimeError):
    """An iterative method produced non-finite or exploding iterates.

    Attributes
    ----------
    iteration : int
        Iteration at which divergence was detected.
    trace : object or None
        Partial trace recorded up to that point, if any.
    """

    def __init__(self, message, iteration=None, trace=None):
        super().__init__(message)
        self.iteration = iteration
        self.trace = trace


class HeterogeneityTooLarge(AtcDigingError, ValueError):
    pass


class RateNotContractive(AtcDigingError, ValueError):
    pass


class LambdaBelowDelta(AtcDigingError, ValueError):
    pass


class StepsizeConditionViolated(AtcDigingError, ValueError):
    """The (lambda, alpha) pair is outside the inexact-gradient conditions."""


class GainProductNotContractive(AtcDigingError, ValueError):
    pass


class ConfigError(AtcDigingError, ValueError):
    pass
