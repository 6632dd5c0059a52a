"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class SingularLocusError(DomainError):
    """Evaluation requested on a singular set (origin, light cone)."""


class UsageError(ValueError):
    """Inconsistent or unsupported combination of inputs."""


class NumericalError(RuntimeError):
    """A numerical procedure failed; ``diagnostics`` carries details."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class AccuracyError(NumericalError):
    """Requested tolerance not reached after refinement."""


class BranchError(NumericalError):
    """Matrix function requested on or across a branch cut."""


class MalformedFieldError(ValueError):
    """Field file could not be parsed; ``offset`` is the byte position."""

    def __init__(self, message, offset=0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset
