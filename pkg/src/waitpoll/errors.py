"""Exception hierarchy.

Everything raised on purpose by this package derives from :class:`PollingError`.
Configuration problems additionally derive from :class:`ValueError` so callers
that only care about "bad input" can catch that.
"""


class PollingError(Exception):
    pass


class ValidationError(PollingError, ValueError):
    """The configuration violates a model invariant."""


class InvalidMoment(ValidationError):
    pass


class Unstable(ValidationError):
    pass


class EmptySystem(ValidationError):
    pass


class NegativeParameter(ValidationError):
    pass


class WrongArity(PollingError, ValueError):
    """Operation defined only for a specific number of stations."""


class IndexOutOfRange(PollingError, IndexError):
    pass


class NoWaitingState(PollingError, ValueError):
    """Station has zero credit, so the server is never waiting there."""


class NotSymmetric(PollingError, ValueError):
    pass


class NotAsymmetric(PollingError, ValueError):
    pass


class NotDeterministic(PollingError, ValueError):
    pass


class NotWorthWaiting(PollingError):
    """Closed-form credit requested where the optimum is zero."""


class NegativeAllocation(PollingError, ValueError):
    pass


class MomentMismatch(PollingError, ValueError):
    """A simulation distribution does not reproduce the configured moments."""
