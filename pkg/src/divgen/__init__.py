"""Divergence-based generalized likelihoods: DPD/LDPD, deformed distributions,
generalized sufficiency and completeness, MDPDE vs generalized UMVUE."""

__version__ = "0.1.0"

from .errors import (
    DivgenError,
    DomainError,
    NumericError,
    PreconditionError,
    ResourceError,
    UnsupportedInstanceError,
    UsageError,
)

__all__ = [
    "DivgenError",
    "DomainError",
    "NumericError",
    "PreconditionError",
    "ResourceError",
    "UnsupportedInstanceError",
    "UsageError",
]
