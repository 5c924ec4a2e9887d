"""
Derivatives
Exact gradients and Hessians of parsed expressions, plus a finite-difference cross-check
"""

import logging
from dataclasses import dataclass

import numpy as np

from core.errors import DomainError, NonFiniteError, DimensionMismatchError
from autodiff.hyperdual import HyperDual, FUNCTIONS
from expressions.nodes import Constant, Variable, Unary, Binary, children, postorder
from expressions.evaluator import evaluate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Derivatives:
    """
    Value, gradient and Hessian of f at a point

    Attributes:
        value: f(point)
        gradient: Vector of first partials, length n
        hessian: Symmetric n x n matrix of second partials
    """

    value: float
    gradient: np.ndarray
    hessian: np.ndarray

    def __post_init__(self):
        n = self.gradient.shape[0]
        if self.hessian.shape != (n, n):
            raise DimensionMismatchError(
                f"hessian shape {self.hessian.shape} does not match gradient length {n}"
            )
        if not (np.isfinite(self.value) and np.isfinite(self.gradient).all()
                and np.isfinite(self.hessian).all()):
            raise NonFiniteError('derivatives contain non-finite entries')
        if not np.array_equal(self.hessian, self.hessian.T):
            raise ValueError('hessian must be exactly symmetric')
        self.gradient.setflags(write=False)
        self.hessian.setflags(write=False)


@dataclass(frozen=True)
class FdReport:
    """
    Finite-difference comparison of the exact derivatives

    Attributes:
        gradient_discrepancy: max |AD - FD| over gradient entries
        hessian_discrepancy: max |AD - FD| over Hessian entries
        gradient_scaled: max |AD - FD| / (1 + |AD|) over gradient entries
        hessian_scaled: max |AD - FD| / (1 + |AD|) over Hessian entries
        step: Finite-difference step h
    """

    gradient_discrepancy: float
    hessian_discrepancy: float
    gradient_scaled: float
    hessian_scaled: float
    step: float

    def within(self, tolerance):
        """True when both scaled discrepancies are <= tolerance"""
        return self.gradient_scaled <= tolerance and self.hessian_scaled <= tolerance


class _Tape:
    """
    Post-order linearisation of an expression tree

    Operands of the node at position k sit at earlier positions, so one
    forward sweep evaluates the tree. readers[v] lists the positions whose
    subtree reads x_(v+1); a seeded pass only revisits those and takes every
    other node from the unseeded sweep.
    """

    def __init__(self, root):
        self.nodes = postorder(root)
        self.operands = []
        self.readers = {}
        position = {}
        reads = []
        for k, node in enumerate(self.nodes):
            operands = tuple(position[id(child)] for child in children(node))
            if isinstance(node, Variable):
                used = frozenset((node.index - 1,))
            else:
                used = frozenset().union(*(reads[p] for p in operands))
            for variable in used:
                self.readers.setdefault(variable, []).append(k)
            self.operands.append(operands)
            reads.append(used)
            position[id(node)] = k

    def sweep(self, point, first=-1, second=-1, base=None):
        """
        Evaluate on hyper-duals with x_first seeded on e1 and x_second on e2

        Args:
            point: List of floats
            first: Zero-based index seeded on e1, -1 for none
            second: Zero-based index seeded on e2, -1 for none
            base: Values of an unseeded sweep to reuse, or None

        Returns:
            List of HyperDual values by position; the root is last
        """
        if base is None:
            values = [None] * len(self.nodes)
            positions = range(len(self.nodes))
        else:
            values = list(base)
            positions = sorted(set(self.readers.get(first, ())) | set(self.readers.get(second, ())))
        for k in positions:
            operands = [values[p] for p in self.operands[k]]
            values[k] = _apply(self.nodes[k], operands, point, first, second)
        return values


def _apply(node, operands, point, first, second):
    if isinstance(node, Constant):
        return HyperDual.constant(node.value)
    if isinstance(node, Variable):
        index = node.index - 1
        return HyperDual.variable(point[index], index == first, index == second)
    if isinstance(node, Unary):
        operand, = operands
        if node.name == 'neg':
            return -operand
        return FUNCTIONS[node.name](operand)
    if isinstance(node, Binary):
        left, right = operands
        if node.op == '+':
            return left + right
        if node.op == '-':
            return left - right
        if node.op == '*':
            return left * right
        if node.op == '/':
            return left / right
        return left ** right
    raise TypeError(f"Unknown node type: {type(node).__name__}")


def _prepare(expression, point):
    vector = np.asarray(point, dtype=np.float64).reshape(-1)
    if vector.shape[0] < expression.arity:
        raise DimensionMismatchError(
            f"point has {vector.shape[0]} coordinates but the expression uses x{expression.arity}"
        )
    if not np.isfinite(vector).all():
        raise DomainError('non-finite point', point=vector)
    return vector


class _SeededPasses:
    """Hyper-dual passes over one expression at one point"""

    def __init__(self, expression, vector):
        self.vector = vector
        self.point = [float(v) for v in vector]
        self.tape = _Tape(expression.root)
        self.base = self._sweep()

    def _sweep(self, first=-1, second=-1, base=None):
        try:
            return self.tape.sweep(self.point, first, second, base)
        except DomainError as error:
            raise type(error)(error.reason, point=self.vector) from None

    def run(self, first, second=-1):
        """Root value with x_first seeded on e1 and x_second on e2"""
        return self._sweep(first, second, self.base)[-1]


def gradient(expression, point):
    """
    Exact gradient by forward-mode propagation

    Args:
        expression: Parsed Expression
        point: Real vector of length n >= arity

    Returns:
        Array of length n with d f / d x_i at point

    Raises:
        DomainError: f not evaluable at point
        NonFiniteError: A partial overflows
    """
    vector = _prepare(expression, point)
    result = np.zeros(vector.shape[0], dtype=np.float64)
    passes = _SeededPasses(expression, vector)
    for i in expression.variables:
        result[i - 1] = passes.run(i - 1).e1
    return result


def hessian(expression, point):
    """
    Exact Hessian, one hyper-dual pass per unordered index pair

    Args:
        expression: Parsed Expression
        point: Real vector of length n >= arity

    Returns:
        Symmetric n x n array; entry (i, j) is written once and mirrored

    Raises:
        DomainError: f not evaluable at point
        NonFiniteError: A partial overflows
    """
    vector = _prepare(expression, point)
    return _hessian_and_gradient(expression, vector)[1]


def _hessian_and_gradient(expression, vector):
    n = vector.shape[0]
    grad = np.zeros(n, dtype=np.float64)
    hess = np.zeros((n, n), dtype=np.float64)
    used = [i - 1 for i in expression.variables]
    passes = _SeededPasses(expression, vector)
    for a, i in enumerate(used):
        for j in used[a:]:
            dual = passes.run(i, j)
            hess[i, j] = dual.e12
            hess[j, i] = dual.e12
            if i == j:
                grad[i] = dual.e1
    return grad, hess


def derivatives(expression, point):
    """
    Value, gradient and Hessian in one call

    Args:
        expression: Parsed Expression
        point: Real vector of length n >= arity

    Returns:
        Derivatives
    """
    vector = _prepare(expression, point)
    grad, hess = _hessian_and_gradient(expression, vector)
    return Derivatives(value=evaluate(expression, vector), gradient=grad, hessian=hess)


def fd_check(expression, point, h):
    """
    Compare exact derivatives against central finite differences

    Gradient: (f(x + h e_i) - f(x - h e_i)) / 2h.
    Hessian: (f(x) at the four corners +-h e_i +-h e_j) / 4h^2 off the diagonal,
    (f(x + h e_i) - 2 f(x) + f(x - h e_i)) / h^2 on it.

    Args:
        expression: Parsed Expression
        point: Real vector of length n >= arity
        h: Positive step

    Returns:
        FdReport

    Raises:
        DomainError: A stencil point is outside the domain of f
    """
    if not h > 0:
        raise ValueError(f"step must be positive, got {h!r}")
    vector = _prepare(expression, point)
    n = vector.shape[0]
    exact_grad, exact_hess = _hessian_and_gradient(expression, vector)

    def f(offsets):
        shifted = vector.copy()
        for index, step in offsets:
            shifted[index] += step
        return evaluate(expression, shifted)

    center = f(())
    fd_grad = np.zeros(n)
    fd_hess = np.zeros((n, n))
    for i in range(n):
        plus = f(((i, h),))
        minus = f(((i, -h),))
        fd_grad[i] = (plus - minus) / (2.0 * h)
        fd_hess[i, i] = (plus - 2.0 * center + minus) / (h * h)
        for j in range(i + 1, n):
            value = (f(((i, h), (j, h))) - f(((i, h), (j, -h)))
                     - f(((i, -h), (j, h))) + f(((i, -h), (j, -h)))) / (4.0 * h * h)
            fd_hess[i, j] = value
            fd_hess[j, i] = value

    grad_error = np.abs(exact_grad - fd_grad)
    hess_error = np.abs(exact_hess - fd_hess)
    report = FdReport(
        gradient_discrepancy=float(grad_error.max(initial=0.0)),
        hessian_discrepancy=float(hess_error.max(initial=0.0)),
        gradient_scaled=float((grad_error / (1.0 + np.abs(exact_grad))).max(initial=0.0)),
        hessian_scaled=float((hess_error / (1.0 + np.abs(exact_hess))).max(initial=0.0)),
        step=float(h),
    )
    logger.debug(f"fd_check {expression}: grad {report.gradient_discrepancy:.3e}, "
                 f"hess {report.hessian_discrepancy:.3e}")
    return report
