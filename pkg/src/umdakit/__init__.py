"""UMDA with margins on OneMax, plus numeric checks of its level-based runtime analysis."""

from umdakit.errors import InvalidInputError, InvalidParameterError, PreconditionError

__version__ = "0.1.0"

__all__ = [
    "InvalidInputError",
    "InvalidParameterError",
    "PreconditionError",
    "__version__",
]
