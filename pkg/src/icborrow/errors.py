"""Exception types shared across the package."""


class ValidationError(Exception):
    """Input data violates a format or consistency rule."""


class CycleError(ValidationError):
    """The ontology contains a cycle; the offending path is in the message."""


class NumericalError(Exception):
    """A numerical routine failed (degenerate input, non-convergence)."""
