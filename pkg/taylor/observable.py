"""
Observable
The symmetric matrix A = f''(0) / 2 assigned to f, and the trace form Tr(B A)
"""

import math
import logging
from dataclasses import dataclass

import numpy as np

from core.errors import DimensionMismatchError
from autodiff.derivatives import hessian

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Observable:
    """
    Symmetric matrix attached to a function

    Attributes:
        matrix: Exactly symmetric n x n array (read-only)
    """

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatchError(f"observable must be square, got shape {matrix.shape}")
        if not np.array_equal(matrix, matrix.T):
            raise ValueError('observable matrix must be exactly symmetric')
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)

    @property
    def dimension(self):
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))


def _as_matrix(value):
    if isinstance(value, Observable):
        return value.matrix
    return np.asarray(value, dtype=np.float64)


def pair_sum(B, M):
    """
    Correctly rounded sum over i, j of B[i, j] * M[j, i]

    No product matrix is formed; math.fsum makes the result independent of
    summation order.

    Args:
        B: n x n array
        M: n x n array

    Returns:
        float
    """
    n = B.shape[0]
    return math.fsum(float(B[i, j]) * float(M[j, i]) for i in range(n) for j in range(n))


def trace_form(B, A):
    """
    Tr(B A) without materialising the product

    Args:
        B: Square matrix (array or Observable)
        A: Observable or square matrix of the same dimension

    Returns:
        Sum over i, j of B[i, j] * A[j, i]

    Raises:
        DimensionMismatchError: Shapes disagree or are not square
    """
    left = _as_matrix(B)
    right = _as_matrix(A)
    if left.ndim != 2 or left.shape[0] != left.shape[1] or left.shape != right.shape:
        raise DimensionMismatchError(
            f"trace form needs square matrices of equal size, got {left.shape} and {right.shape}"
        )
    return pair_sum(left, right)


def hessian_to_observable(expression, n):
    """
    A = f''(0) / 2

    Args:
        expression: Parsed Expression
        n: Dimension (>= arity)

    Returns:
        Observable

    Raises:
        DomainError: f not twice differentiable at the origin
        DimensionMismatchError: n smaller than the expression arity
    """
    if n < max(expression.arity, 1):
        raise DimensionMismatchError(f"dimension {n} is smaller than the expression arity {expression.arity}")
    # halving is exact in binary floating point, so symmetry is preserved
    observable = Observable(0.5 * hessian(expression, np.zeros(n)))
    logger.debug(f"Observable for {expression}: {observable.matrix.tolist()}")
    return observable
