"""Link-level simulator of a distributed MIMO system with 1-bit RF fronthaul."""

from .errors import (ConfigurationError, DomainError, InputShapeError, SimulationError,
                     SingularityError)

__version__ = "0.1.0"

__all__ = ["ConfigurationError", "DomainError", "InputShapeError", "SimulationError",
           "SingularityError"]
