"""Exception types raised across the package."""


class UvqnheError(Exception):
    """Base class for all package errors."""


class CircuitError(UvqnheError, ValueError):
    """Invalid gate or circuit construction."""


class PauliParseError(UvqnheError, ValueError):
    """Illegal character in a Pauli string or Hamiltonian file."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class ResourceError(UvqnheError):
    """Requested computation exceeds the configured size guard."""


class EstimatorError(UvqnheError, ArithmeticError):
    """Energy estimate is undefined (e.g. non-positive normalization)."""


class TrainingError(UvqnheError, ArithmeticError):
    """Optimizer received non-finite input."""


class ModelError(UvqnheError, ArithmeticError):
    """Variance model cannot be evaluated."""


class ConfigError(UvqnheError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
