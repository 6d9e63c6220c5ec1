"""Exception types shared across the package."""


class FqrtError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameters(FqrtError, ValueError):
    """A parameter is missing, non-finite or outside its allowed range."""


class AssumptionViolated(FqrtError):
    """Class 1 is not overloaded enough to keep pool 2 busy."""


class NumericalFailure(FqrtError):
    """Base class for solver breakdowns (mapped to exit code 3 by the CLI)."""


class NonConvergent(NumericalFailure):
    pass


class SingularBoundary(NumericalFailure):
    pass


class TruncationInsufficient(NumericalFailure):
    pass


class DriftDegenerate(NumericalFailure):
    pass


class StepTooLarge(NumericalFailure):
    pass


class NeverReachesS(NumericalFailure):
    """The transient cascade never entered the restricted state space.

    The partial trajectory is kept on ``self.trajectory``.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class NotInteriorCase(FqrtError):
    pass


class NotInA(FqrtError):
    pass


class WindowTooShort(FqrtError):
    pass
