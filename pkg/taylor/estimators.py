"""
Taylor Estimators
Approximate m_y = E f(x) from the mean and covariance of x
"""

import logging
from dataclasses import dataclass

import numpy as np

from core.errors import PreconditionViolation, DimensionMismatchError
from autodiff.derivatives import hessian
from expressions.evaluator import evaluate
from taylor.observable import pair_sum, trace_form, hessian_to_observable

logger = logging.getLogger(__name__)

ORIGIN_TOLERANCE = 1e-12


@dataclass(frozen=True)
class TaylorEstimate:
    """
    Approximated mean with its decomposition

    Attributes:
        order: 1 or 2
        constant_term: f(m_x)
        correction_term: 0 for order 1, Tr(B_x f''(m_x)) / 2 for order 2
        value: constant_term + correction_term
    """

    order: int
    constant_term: float
    correction_term: float
    value: float

    @classmethod
    def build(cls, order, constant_term, correction_term=0.0):
        return cls(
            order=order,
            constant_term=constant_term,
            correction_term=correction_term,
            value=constant_term + correction_term,
        )

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {self.order}")
        if self.order == 1 and self.correction_term != 0.0:
            raise ValueError('a first-order estimate has no correction term')
        if self.value != self.constant_term + self.correction_term:
            raise ValueError('value must equal constant_term + correction_term')

    def to_dict(self):
        return {
            'order': self.order,
            'value': self.value,
            'constant_term': self.constant_term,
            'correction_term': self.correction_term,
        }


@dataclass(frozen=True)
class LinearizationReport:
    """
    Whether dropping the second-order term is justified

    Attributes:
        first_order: TaylorEstimate of order 1
        second_order: TaylorEstimate of order 2
        relative_correction: |correction| / max(|constant|, tiny)
        threshold: Adequacy threshold used
        linear_adequate: relative_correction <= threshold
    """

    first_order: TaylorEstimate
    second_order: TaylorEstimate
    relative_correction: float
    threshold: float
    linear_adequate: bool

    def to_dict(self):
        return {
            'relative_correction': self.relative_correction,
            'threshold': self.threshold,
            'linear_adequate': self.linear_adequate,
        }


def _check_arity(expression, model):
    if expression.arity > model.dimension:
        raise DimensionMismatchError(
            f"expression uses x{expression.arity} but the model has {model.dimension} variables"
        )


def first_order_mean(expression, model):
    """
    m_y ~ f(m_x)

    The linear term drops out because E(x - m_x) = 0.

    Args:
        expression: Parsed Expression
        model: StochasticModel

    Returns:
        TaylorEstimate of order 1

    Raises:
        DomainError: f not evaluable at the mean
    """
    _check_arity(expression, model)
    estimate = TaylorEstimate.build(1, evaluate(expression, model.mean))
    logger.info(f"First-order mean of {expression}: {estimate.value!r}")
    return estimate


def second_order_mean(expression, model):
    """
    m_y ~ f(m_x) + (1/2) sum_ij f_ij(m_x) B_ij

    The n = 1 case is the same code path with a 1 x 1 covariance and reduces
    to f(m) + sigma^2 f''(m) / 2.

    Args:
        expression: Parsed Expression
        model: StochasticModel

    Returns:
        TaylorEstimate of order 2

    Raises:
        DomainError: f not twice differentiable at the mean
    """
    _check_arity(expression, model)
    constant = evaluate(expression, model.mean)
    second = hessian(expression, model.mean)
    correction = 0.5 * pair_sum(model.covariance, second)
    estimate = TaylorEstimate.build(2, constant, correction)
    logger.info(f"Second-order mean of {expression}: {constant!r} + {correction!r}")
    return estimate


def check_symmetric_case(expression, mean, tolerance=ORIGIN_TOLERANCE):
    """
    Check m_x = 0 and f(0) = 0

    Args:
        expression: Parsed Expression
        mean: Mean vector
        tolerance: Absolute tolerance on |f(0)|

    Raises:
        PreconditionViolation: Naming every condition that fails
    """
    mean = np.asarray(mean, dtype=np.float64)
    failed = []
    details = []
    if np.any(mean != 0.0):
        failed.append('m_x = 0')
        details.append(f"mean is {mean.tolist()}")
    at_origin = evaluate(expression, np.zeros(max(mean.shape[0], expression.arity)))
    if abs(at_origin) > tolerance:
        failed.append('f(0) = 0')
        details.append(f"f(0) = {at_origin!r}")
    if failed:
        raise PreconditionViolation(failed, '; '.join(details))


def symmetric_trace_mean(expression, model):
    """
    m_y ~ Tr(B_x A) with A = f''(0) / 2, valid when m_x = 0 and f(0) = 0

    Args:
        expression: Parsed Expression
        model: StochasticModel with zero mean

    Returns:
        float

    Raises:
        PreconditionViolation: m_x != 0 or |f(0)| > 1e-12
    """
    _check_arity(expression, model)
    check_symmetric_case(expression, model.mean)
    value = trace_form(model.covariance, hessian_to_observable(expression, model.dimension))
    logger.info(f"Trace-rule mean of {expression}: {value!r}")
    return value


def linearization_check(expression, model, threshold=0.01):
    """
    Compare first- and second-order estimates to judge linearization

    Args:
        expression: Parsed Expression
        model: StochasticModel
        threshold: Largest acceptable |correction| / |constant|

    Returns:
        LinearizationReport
    """
    first = first_order_mean(expression, model)
    second = second_order_mean(expression, model)
    scale = max(abs(second.constant_term), np.finfo(np.float64).tiny)
    relative = abs(second.correction_term) / scale
    report = LinearizationReport(
        first_order=first,
        second_order=second,
        relative_correction=relative,
        threshold=threshold,
        linear_adequate=bool(relative <= threshold),
    )
    if not report.linear_adequate:
        logger.info(f"Linearization of {expression} is inadequate: relative correction {relative:.3g}")
    return report
