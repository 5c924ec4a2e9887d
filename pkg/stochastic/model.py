"""
Stochastic Model
Mean vector, covariance matrix and sampling family of a random vector x
"""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from core.errors import (
    DimensionMismatchError, FamilyConstraintError, NotSymmetricError, ConfigError
)
from stochastic.cholesky import semidefinite_cholesky

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-12


class Family(str, Enum):
    """Sampling families sharing the declared first and second moments"""

    GAUSSIAN = 'gaussian'
    SYMMETRIC_TWO_POINT = 'symmetric-two-point'
    UNIFORM = 'uniform'

    @classmethod
    def parse(cls, tag):
        """
        Resolve a family tag

        Args:
            tag: Family or its string value

        Returns:
            Family

        Raises:
            ConfigError: Unknown tag
        """
        if isinstance(tag, cls):
            return tag
        try:
            return cls(str(tag))
        except ValueError:
            choices = ', '.join(f.value for f in cls)
            raise ConfigError(f"unknown family {tag!r} (choose from {choices})") from None

    @property
    def diagonal_only(self):
        return self is not Family.GAUSSIAN


@dataclass(frozen=True)
class StochasticModel:
    """
    Validated random vector description

    Build with validate(); the arrays are read-only.

    Attributes:
        mean: m_x, length n
        covariance: B_x, symmetric PSD n x n
        family: Sampling family
        factor: Lower-triangular L with L @ L.T == covariance
        symmetrized: True if the input covariance was not exactly symmetric
    """

    mean: np.ndarray
    covariance: np.ndarray
    family: Family
    factor: np.ndarray
    symmetrized: bool = False

    @property
    def dimension(self):
        return self.mean.shape[0]

    @property
    def sigma(self):
        """Per-coordinate standard deviations sqrt(B_ii)"""
        return np.sqrt(np.diag(self.covariance))

    def describe(self):
        """
        Summary for reports

        Returns:
            Dictionary with mean, covariance and family
        """
        return {
            'family': self.family.value,
            'mean': [float(v) for v in self.mean],
            'covariance': [[float(v) for v in row] for row in self.covariance],
        }


def _frozen(array):
    array = np.array(array, dtype=np.float64)
    array.setflags(write=False)
    return array


def validate(mean, covariance, family=Family.GAUSSIAN):
    """
    Validate moments and family into a StochasticModel

    The covariance is symmetrized as (B + B.T) / 2 before the PSD check.

    Args:
        mean: Real vector of length n
        covariance: n x n matrix
        family: Family or tag string

    Returns:
        StochasticModel

    Raises:
        DimensionMismatchError: Shapes disagree
        NotSymmetricError: Asymmetry above 1e-12 absolute
        NotPSDError: Covariance is indefinite
        FamilyConstraintError: Off-diagonal covariance with a diagonal-only family
    """
    family = Family.parse(family)
    m = np.array(mean, dtype=np.float64)
    B = np.array(covariance, dtype=np.float64)

    if m.ndim != 1 or m.shape[0] < 1:
        raise DimensionMismatchError(f"mean must be a non-empty vector, got shape {m.shape}")
    n = m.shape[0]
    if B.shape != (n, n):
        raise DimensionMismatchError(f"covariance shape {B.shape} does not match mean length {n}")
    if not (np.isfinite(m).all() and np.isfinite(B).all()):
        raise DimensionMismatchError('mean and covariance must be finite')

    asymmetry = float(np.max(np.abs(B - B.T)))
    if asymmetry > SYMMETRY_TOLERANCE:
        raise NotSymmetricError(f"covariance asymmetry {asymmetry!r} exceeds {SYMMETRY_TOLERANCE}")
    symmetrized = asymmetry > 0.0
    if symmetrized:
        B = (B + B.T) / 2.0
        logger.warning(f"Covariance symmetrized (max asymmetry {asymmetry:.3e})")

    L = semidefinite_cholesky(B)

    if family.diagonal_only and np.any(B[~np.eye(n, dtype=bool)] != 0.0):
        raise FamilyConstraintError(
            f"family {family.value!r} samples coordinates independently and needs a diagonal covariance"
        )

    # clamp tolerated negative rounding on the diagonal
    diagonal = np.diag(B).copy()
    if np.any(diagonal < 0.0):
        B[np.diag_indices(n)] = np.maximum(diagonal, 0.0)

    model = StochasticModel(
        mean=_frozen(m),
        covariance=_frozen(B),
        family=family,
        factor=_frozen(L),
        symmetrized=symmetrized,
    )
    logger.info(f"Model validated: n={n}, family={family.value}")
    return model


def cholesky_factor(model):
    """
    Lower-triangular factor of the model covariance

    Args:
        model: StochasticModel

    Returns:
        Writable copy of L with L @ L.T == covariance
    """
    return np.array(model.factor)
