"""
Expression Evaluator
Vectorised float64 evaluation of parsed expressions
"""

import logging
import numpy as np

from core.errors import DomainError, DimensionMismatchError
from expressions.nodes import Constant, Variable, Unary, Binary, Expression, fold

logger = logging.getLogger(__name__)

# Reason codes recorded per row; 0 means the row is still valid
_REASONS = {
    1: 'log of a non-positive value',
    2: 'division by zero',
    3: 'sqrt of a negative value',
    4: 'non-finite intermediate value',
}

_UNARY = {
    'sin': np.sin,
    'cos': np.cos,
    'exp': np.exp,
    'tanh': np.tanh,
}


class _BatchEvaluation:
    """
    One evaluation pass over k points

    Every operation is computed for all rows; rows that leave the domain are
    marked with the first reason that hit them instead of aborting, so the
    reported failure is always the lowest row index.
    """

    def __init__(self, points):
        self.points = points
        self.reasons = np.zeros(points.shape[0], dtype=np.int8)

    def flag(self, mask, code):
        fresh = mask & (self.reasons == 0)
        if fresh.any():
            self.reasons[fresh] = code

    def check_finite(self, values):
        self.flag(~np.isfinite(values), 4)
        return values

    def run(self, root):
        """Evaluate every node in post-order and return the root values"""
        return fold(root, self.visit)

    def visit(self, node, operands):
        if isinstance(node, Constant):
            return np.full(self.points.shape[0], node.value, dtype=np.float64)
        if isinstance(node, Variable):
            return self.points[:, node.index - 1]
        if isinstance(node, Unary):
            return self.visit_unary(node, *operands)
        if isinstance(node, Binary):
            return self.visit_binary(node, *operands)
        raise TypeError(f"Unknown node type: {type(node).__name__}")

    def visit_unary(self, node, operand):
        if node.name == 'neg':
            return -operand
        if node.name == 'log':
            self.flag(operand <= 0, 1)
            return self.check_finite(np.log(operand))
        if node.name == 'sqrt':
            self.flag(operand < 0, 3)
            return self.check_finite(np.sqrt(operand))
        return self.check_finite(_UNARY[node.name](operand))

    def visit_binary(self, node, left, right):
        if node.op == '+':
            result = left + right
        elif node.op == '-':
            result = left - right
        elif node.op == '*':
            result = left * right
        elif node.op == '/':
            self.flag(right == 0, 2)
            result = left / right
        else:
            result = np.power(left, right)
        return self.check_finite(result)


def _as_points(points, arity):
    array = np.asarray(points, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(1, -1)
    if array.ndim != 2:
        raise DimensionMismatchError(f"points must be a k x n array, got shape {array.shape}")
    if array.shape[1] < arity:
        raise DimensionMismatchError(
            f"points have {array.shape[1]} coordinates but the expression uses x{arity}"
        )
    return array


def evaluate_batch(expression, points, index_offset=0):
    """
    Evaluate an expression at many points

    Args:
        expression: Parsed Expression
        points: Array of shape (k, n) with n >= arity
        index_offset: Added to row indices reported in DomainError

    Returns:
        float64 array of length k

    Raises:
        DomainError: For the lowest row index that leaves the domain
        DimensionMismatchError: If points have fewer than arity coordinates
    """
    array = _as_points(points, expression.arity)
    if array.shape[0] == 0:
        return np.empty(0, dtype=np.float64)

    evaluation = _BatchEvaluation(array)
    with np.errstate(all='ignore'):
        # non-finite inputs are reported like any other invalid intermediate
        evaluation.flag(~np.isfinite(array).all(axis=1), 4)
        values = evaluation.run(expression.root)

    bad = np.flatnonzero(evaluation.reasons)
    if bad.size:
        row = int(bad[0])
        reason = _REASONS[int(evaluation.reasons[row])]
        logger.debug(f"Domain violation at row {row + index_offset}: {reason}")
        raise DomainError(reason, index=row + index_offset, point=array[row])

    return np.asarray(values, dtype=np.float64)


def evaluate(expression, point):
    """
    Evaluate an expression at a single point

    Args:
        expression: Parsed Expression
        point: Real vector of length >= arity

    Returns:
        f(point) as a Python float

    Raises:
        DomainError: log of a non-positive value, division by zero,
            sqrt of a negative value, or a non-finite intermediate
    """
    if not isinstance(expression, Expression):
        raise TypeError("evaluate expects a parsed Expression")
    vector = np.asarray(point, dtype=np.float64).reshape(-1)
    try:
        values = evaluate_batch(expression, vector.reshape(1, -1))
    except DomainError as error:
        raise DomainError(error.reason, point=vector) from None
    return float(values[0])
