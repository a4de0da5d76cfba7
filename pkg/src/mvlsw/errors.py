"""Exception types raised by the package."""


class ParameterError(ValueError):
    """An argument is outside its supported range."""


class SpecificationError(ValueError):
    """A process specification violates one of its invariants."""


class ConfigurationError(ValueError):
    """Objects built under incompatible settings were combined."""


class ParseError(ValueError):
    """Malformed input file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class SingularOperatorError(ArithmeticError):
    """Operator is too ill-conditioned to invert."""

    def __init__(self, condition_number, threshold):
        super().__init__(
            f"operator condition number {condition_number:.3g} exceeds {threshold:.3g}"
        )
        self.condition_number = condition_number
        self.threshold = threshold
