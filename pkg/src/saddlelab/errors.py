"""Exceptions shared across the library."""


class SaddleLabError(Exception):
    """Base class for every library-specific error."""


class NotSpdError(SaddleLabError):
    """A matrix expected to be symmetric positive definite is not."""


class SingularSystemError(SaddleLabError):
    """A linear system is numerically singular at working precision."""


class InvalidProblemError(SaddleLabError):
    """Problem data failed validation; carries the itemized failures."""

    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("invalid problem: " + "; ".join(self.failures))


class ProblemFormatError(SaddleLabError):
    """A problem or complex file could not be parsed."""


class MissingQBasisError(SaddleLabError):
    """The requested quantity needs an explicit multiplier basis."""


class TolOrderError(SaddleLabError):
    """The outer stopping tolerance must exceed the subsolve tolerance."""


class NotApplicableError(SaddleLabError):
    """Operation requires a symmetric coercive operator block."""


class IllPosedKernelError(SaddleLabError):
    """The operator restricted to the constraint kernel is singular."""


class RateUndefinedError(SaddleLabError):
    """No geometric rate is predicted for these parameters."""


class InvalidComplexError(SaddleLabError):
    """Simplicial complex data is inconsistent."""
