"""Exception hierarchy.

Every error carries a stable ``code`` (the class name) which the CLI
reports in its machine-readable error record. Precondition violations
map to CLI exit status 2, numerical failures to exit status 3.
"""


class AaqcError(Exception):
    exit_status = 3

    @property
    def code(self) -> str:
        return type(self).__name__


class PreconditionError(AaqcError, ValueError):
    """Input violates a documented precondition."""

    exit_status = 2


class NumericalError(AaqcError, ArithmeticError):
    """A numerical procedure failed on valid input."""

    exit_status = 3


class ConfigError(PreconditionError):
    pass


class NonHermitian(PreconditionError):
    pass


class NonUnitary(PreconditionError):
    pass


class UnnormalizedVector(PreconditionError):
    pass


class BadGrid(PreconditionError):
    pass


class BadSpan(PreconditionError):
    pass


class NonpositiveGap(PreconditionError):
    pass


class DegenerateChoice(PreconditionError):
    pass


class GapConditionViolated(PreconditionError):
    pass


class DegenerateGround(PreconditionError):
    pass


class PeriodTooLong(PreconditionError):
    pass


class IndexOutOfRange(PreconditionError, IndexError):
    pass


class TooLarge(PreconditionError):
    pass


class CrossingAtSingularPoint(PreconditionError):
    pass


class NoConvergence(NumericalError):
    pass


class TrackingFailure(NumericalError):
    pass


class NotConverged(NumericalError):
    pass


class CrossingNotFound(NumericalError):
    pass


class ZeroProjection(NumericalError):
    pass
