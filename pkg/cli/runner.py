"""
Job Runner
Run the requested estimators and assemble reports
"""

import logging

from bridge.convergence import convergence_scan, fit_gap_slope, fit_rescaled_line
from bridge.density import DensityAnalog
from comparison.method_comparator import MethodComparator
from expressions.parser import parse
from oracle.monte_carlo import estimate_mean
from stochastic.model import validate, Family
from taylor.estimators import (
    first_order_mean, second_order_mean, symmetric_trace_mean,
    check_symmetric_case, linearization_check
)

logger = logging.getLogger(__name__)


def run_estimate(config, workers=None):
    """
    Run every requested method of an estimate job

    The trace method's preconditions (m_x = 0, f(0) = 0) are checked before
    any estimator runs.

    Args:
        config: JobConfig with mean, covariance and methods
        workers: MC threads (default from settings)

    Returns:
        Report dictionary

    Raises:
        ParseError, ModelValidationError, DomainError, PreconditionViolation
    """
    expression = parse(config.expression)
    model = validate(config.mean, config.covariance, config.family)
    if 'trace' in config.methods:
        check_symmetric_case(expression, model.mean)

    logger.info(f"Running {list(config.methods)} for {config.expression}")

    methods = {}
    for method in config.methods:
        if method == 'taylor1':
            methods[method] = first_order_mean(expression, model).to_dict()
        elif method == 'taylor2':
            methods[method] = second_order_mean(expression, model).to_dict()
        elif method == 'trace':
            methods[method] = {'value': symmetric_trace_mean(expression, model)}
        elif method == 'mc':
            methods[method] = estimate_mean(
                expression, model, config.mc_count, config.seed, workers
            ).to_dict()

    report = {
        'command': 'estimate',
        'expression': config.expression,
        'arity': expression.arity,
        **model.describe(),
        'symmetrized': model.symmetrized,
        'seed': config.seed,
        'mc_count': config.mc_count,
        'methods': methods,
    }

    if 'taylor1' in methods and 'taylor2' in methods:
        report['linearization'] = linearization_check(expression, model).to_dict()

    report['comparison'] = MethodComparator(reference='mc').compare_methods(methods)
    return report


def run_bridge(config, workers=None):
    """
    Run the convergence scan of a bridge job

    Args:
        config: JobConfig with a bridge section
        workers: MC threads (default from settings)

    Returns:
        Report dictionary with the rows and both fits
    """
    expression = parse(config.expression)
    rho = DensityAnalog.from_matrix(config.bridge.rho)
    family = Family.parse(config.family)

    rows = convergence_scan(
        expression,
        rho,
        alphas=config.bridge.alphas,
        count=config.mc_count,
        seed=config.seed,
        family=family,
        workers=workers,
    )

    return {
        'command': 'bridge',
        'expression': config.expression,
        'arity': expression.arity,
        'family': family.value,
        'rho': [[float(v) for v in row] for row in rho.rho],
        'alphas': [float(a) for a in config.bridge.alphas],
        'seed': config.seed,
        'mc_count': config.mc_count,
        'quantum_value': rows[0].quantum_value,
        'rows': [row.to_dict() for row in rows],
        'gap_fit': fit_gap_slope(rows).to_dict(),
        'rescaled_fit': fit_rescaled_line(rows).to_dict(),
    }
