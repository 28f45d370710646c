"""Exception hierarchy.

Everything numeric derives from :class:`NumericalError` so the CLI can map
it to a single exit code.
"""


class OrliczBoundsError(Exception):
    pass


class NumericalError(OrliczBoundsError):
    pass


class NonConvexInput(NumericalError):
    pass


class OverflowRange(NumericalError):
    pass


class DimensionMismatch(OrliczBoundsError, ValueError):
    pass


class RejectionStalled(NumericalError):
    pass


class NonConcaveModulus(NumericalError):
    pass


class BracketFailure(NumericalError):
    pass


class SlowConvergence(NumericalError):
    pass


class InfiniteLevel(NumericalError):
    pass


class OutOfBall(OrliczBoundsError, ValueError):
    pass


class DivergentTerm1(NumericalError):
    pass


class ExponentOutOfRange(OrliczBoundsError, ValueError):
    pass


class ConfigError(OrliczBoundsError, ValueError):
    pass
