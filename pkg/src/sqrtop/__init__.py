"""Relativistic square-root operator: kernels, propagators and Dirac checks."""

from .errors import (
    AccuracyError,
    BranchError,
    DomainError,
    MalformedFieldError,
    NumericalError,
    SingularLocusError,
    UsageError,
)
from .params import PhysicalParams

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "BranchError",
    "DomainError",
    "MalformedFieldError",
    "NumericalError",
    "PhysicalParams",
    "SingularLocusError",
    "UsageError",
    "__version__",
]
