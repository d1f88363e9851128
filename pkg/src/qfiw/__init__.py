"""Finite-temperature multipartite entanglement witnesses for spin-1/2 chains."""

__version__ = "0.1.0"

from .errors import DomainError, NumericalError, ValidationError

__all__ = ["DomainError", "NumericalError", "ValidationError", "__version__"]
