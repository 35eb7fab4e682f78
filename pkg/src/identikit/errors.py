"""Exception hierarchy.

Validation problems derive from ``ValidationError`` (CLI exit code 1);
numerical failures derive from ``NumericalFailure`` (CLI exit code 2).
"""


class IdentikitError(Exception):
    pass


class ValidationError(IdentikitError, ValueError):
    pass


class NumericalFailure(IdentikitError):
    pass


class BlowUp(NumericalFailure):
    """State norm exceeded the bound or the step size underflowed."""


class DomainExit(NumericalFailure):
    """Trajectory left the declared state box."""


class ConvergenceFailure(NumericalFailure):
    pass


class DomainError(NumericalFailure, ValueError):
    """An expression was evaluated outside its real domain."""


class MissingPartials(IdentikitError):
    pass


class SamplingExhausted(NumericalFailure):
    pass


class SingularParameter(NumericalFailure):
    pass


class ZeroDirection(ValidationError):
    pass


class OutOfBracket(ValidationError):
    pass


class DegenerateInputs(ValidationError):
    pass


class MarginTooSmall(ValidationError):
    pass


class UnsupportedDerivative(IdentikitError):
    pass
