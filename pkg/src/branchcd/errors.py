"""Shared exception types."""


class ParameterError(ValueError):
    """A space parameter is outside its admissible range."""


class DomainError(ValueError):
    """An evaluation point violates an operation's precondition."""


class SingularSupportError(ValueError):
    """A measure atom sits where the reference measure has no density."""


class StructuredMapError(RuntimeError):
    """A transport plan cannot be converted to map form."""
