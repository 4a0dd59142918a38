"""Exception types shared across the simulator."""


class SimulationError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(SimulationError, ValueError):
    """Inconsistent rates, bands, indices or other setup parameters."""


class InputShapeError(SimulationError, ValueError):
    """Array lengths or shapes that do not fit the operation."""


class DomainError(SimulationError, ValueError):
    """Argument outside the validity range of a model."""


class SingularityError(SimulationError, ArithmeticError):
    """Rank-deficient matrix encountered in combining or precoding."""

    def __init__(self, message, subcarrier=None):
        super().__init__(message)
        self.subcarrier = subcarrier
