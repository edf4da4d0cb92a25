"""Exception types shared across the package."""

import numpy as np


class ParameterError(ValueError):
    """An argument violates a documented precondition."""


class CapacityError(ParameterError):
    """A pilot group holds more users than it has codewords."""


class SingularityError(np.linalg.LinAlgError):
    """A channel-estimate matrix is rank deficient."""


class NumericalError(ArithmeticError):
    """A quadrature failed or a quantity that must be positive was not."""


class ConfigError(ValueError):
    """A configuration document is malformed or fails validation."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
