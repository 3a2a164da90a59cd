"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """An input specification is malformed (bad field, bad value, unknown key)."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)


class DimensionError(ValueError):
    """Point dimension does not match the configuration's ambient dimension."""


class EvaluationError(RuntimeError):
    """A functional failed on a perturbed configuration."""

    def __init__(self, message, point=None):
        self.point = point
        super().__init__(message)


class TruncationError(ArithmeticError):
    """The neglected Poisson series tail exceeds the allowed tolerance."""


class OutOfRangeError(ValueError):
    """A bound was requested outside the range where it is asserted."""


class CertificateError(AssertionError):
    """A geometric or probabilistic certificate failed beyond tolerance."""
