"""Exception types raised across the package."""


class FPAccelError(Exception):
    """Base class for all package errors."""


class InvalidInputError(FPAccelError, ValueError):
    """Malformed arguments: non-finite entries, shape mismatch, broken preconditions."""


class InvalidParameterError(InvalidInputError):
    """A scalar parameter lies outside its admissible range."""


class UnsupportedDepthError(InvalidInputError):
    pass


class InsufficientDataError(FPAccelError, ValueError):
    pass


class EvaluationError(FPAccelError, ArithmeticError):
    """A map evaluation produced non-finite values.

    ``stage`` names where it happened: ``"Q"``, ``"projection"``, ``"smoothing"``
    or ``"H"``.
    """

    def __init__(self, stage, message=None):
        self.stage = stage
        super().__init__(message or f"non-finite values produced at stage {stage!r}")


class InvalidScheduleError(InvalidParameterError):
    pass


class NoSolutionError(FPAccelError):
    pass


class AmbiguousSolutionError(FPAccelError):
    pass


class ConfigError(FPAccelError, ValueError):
    """Experiment configuration failed validation. ``problems`` lists every violation."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
