class InvalidInputError(ValueError):
    """Malformed data handed to an operation (empty vectors, ragged strings, out-of-range indices)."""


class InvalidParameterError(ValueError):
    """Algorithm or analysis parameters outside their admissible range."""


class PreconditionError(ValueError):
    """An input does not satisfy the hypothesis a checker is defined under."""
