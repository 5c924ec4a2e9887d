"""
Density Analog
Unit-trace symmetric PSD matrix rho with B = alpha * rho
"""

import logging
from dataclasses import dataclass

import numpy as np

from core.errors import (
    DensityError, DimensionMismatchError, NotSymmetricError, PreconditionViolation
)
from stochastic.cholesky import semidefinite_cholesky
from stochastic.model import validate, Family
from taylor.observable import trace_form

logger = logging.getLogger(__name__)

TRACE_TOLERANCE = 1e-12
SYMMETRY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class DensityAnalog:
    """
    Normalised covariance playing the density-operator role

    Build with from_matrix(); a matrix whose trace is not 1 is rejected,
    never rescaled.

    Attributes:
        rho: Symmetric PSD n x n array with trace 1 (read-only)
    """

    rho: np.ndarray

    @classmethod
    def from_matrix(cls, matrix):
        """
        Validate a density analog

        Args:
            matrix: n x n nested sequence or array

        Returns:
            DensityAnalog

        Raises:
            DimensionMismatchError: Not square
            NotSymmetricError: Asymmetry above 1e-12
            NotPSDError: Indefinite
            DensityError: |Tr rho - 1| > 1e-12
        """
        rho = np.array(matrix, dtype=np.float64)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] == 0:
            raise DimensionMismatchError(f"rho must be a non-empty square matrix, got shape {rho.shape}")
        asymmetry = float(np.max(np.abs(rho - rho.T)))
        if asymmetry > SYMMETRY_TOLERANCE:
            raise NotSymmetricError(f"rho asymmetry {asymmetry!r} exceeds {SYMMETRY_TOLERANCE}")
        semidefinite_cholesky(rho)
        trace = float(np.trace(rho))
        if abs(trace - 1.0) > TRACE_TOLERANCE:
            raise DensityError(f"rho must have unit trace, got {trace!r}")
        rho.setflags(write=False)
        return cls(rho=rho)

    @property
    def dimension(self):
        return self.rho.shape[0]


def quantum_average(rho, observable):
    """
    Tr(rho A)

    Args:
        rho: DensityAnalog
        observable: Observable of the same dimension

    Returns:
        float

    Raises:
        DimensionMismatchError: Dimensions disagree
    """
    return trace_form(rho.rho, observable)


def make_alpha_model(rho, alpha, family=Family.GAUSSIAN):
    """
    Zero-mean model with covariance alpha * rho

    Args:
        rho: DensityAnalog
        alpha: Positive dispersion scale
        family: Sampling family

    Returns:
        StochasticModel

    Raises:
        PreconditionViolation: alpha <= 0
        FamilyConstraintError: Non-diagonal rho with a diagonal-only family
    """
    if not alpha > 0:
        raise PreconditionViolation(['alpha > 0'], f"alpha = {alpha!r}")
    return validate(np.zeros(rho.dimension), alpha * rho.rho, family)
