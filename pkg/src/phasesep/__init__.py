"""Phase-space evolution of Gaussian states under high-temperature open
dynamics, and the times after which two-particle entanglement is gone."""

from .core import (
    CovarianceMatrix2,
    GaussianState,
    InvalidCovarianceError,
    NumericalDomainError,
    PhaseSepError,
    PhaseSpacePoint,
    PhysicalParams,
    UNIT_PARAMS,
    convolve,
    minimum_uncertainty,
    overlap,
    smear,
    wigner_valid,
)

__version__ = "0.1.0"
