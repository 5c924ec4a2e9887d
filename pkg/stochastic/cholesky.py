"""
Cholesky Factorization
Semidefinite Cholesky with a pivot tolerance for rounded user covariances
"""

import logging
import numpy as np

from core.errors import NotPSDError, DimensionMismatchError

logger = logging.getLogger(__name__)

PIVOT_TOLERANCE = 1e-10


def semidefinite_cholesky(matrix, tolerance=PIVOT_TOLERANCE):
    """
    Lower-triangular L with L @ L.T == matrix for symmetric PSD input

    Positive pivots are factored as they are, however small. Pivots in
    [-tolerance * max(diagonal), 0] are clamped to zero and their column of L
    is left zero; the remaining column entries must then be below
    tolerance * max(1, max(diagonal)), otherwise the matrix is indefinite.

    Args:
        matrix: Symmetric n x n array
        tolerance: Relative pivot tolerance

    Returns:
        Lower-triangular n x n float64 array

    Raises:
        NotPSDError: A pivot is below -tolerance * max(diagonal), or a zero
            pivot has a non-vanishing column
    """
    A = np.array(matrix, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {A.shape}")

    n = A.shape[0]
    L = np.zeros((n, n), dtype=np.float64)
    scale = max(float(np.max(np.diag(A), initial=0.0)), 0.0)
    threshold = tolerance * scale
    # a zeroed column leaves its residual in L @ L.T, so it must fit the reconstruction bound
    residual_threshold = tolerance * max(scale, 1.0)

    for k in range(n):
        pivot = A[k, k] - np.dot(L[k, :k], L[k, :k])
        if pivot < -threshold:
            raise NotPSDError(float(pivot), _min_eigenvalue(A))
        column = A[k + 1:, k] - L[k + 1:, :k] @ L[k, :k]
        if pivot <= 0.0:
            if column.size and np.max(np.abs(column)) > residual_threshold:
                raise NotPSDError(float(pivot), _min_eigenvalue(A))
            logger.debug(f"Zero pivot at column {k}; factor is rank deficient")
            continue
        root = np.sqrt(pivot)
        L[k, k] = root
        L[k + 1:, k] = column / root

    return L


def _min_eigenvalue(matrix):
    return float(np.linalg.eigvalsh(matrix)[0])
