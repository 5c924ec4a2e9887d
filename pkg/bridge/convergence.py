"""
Convergence Scan
Classical MC mean under B = alpha * rho, rescaled by 1/alpha, against Tr(rho A)
"""

import math
import logging
from dataclasses import dataclass

import numpy as np

from core.errors import PreconditionViolation, DimensionMismatchError
from core.settings import get_settings
from bridge.density import make_alpha_model, quantum_average
from oracle.monte_carlo import estimate_mean
from stochastic.model import Family
from stochastic.sampler import check_count, check_seed
from taylor.estimators import check_symmetric_case
from taylor.observable import hessian_to_observable

logger = logging.getLogger(__name__)

DEFAULT_ALPHAS = (0.2, 0.1, 0.05, 0.025, 0.0125)
SIGNIFICANCE_SIGMAS = 4.0


@dataclass(frozen=True)
class ConvergenceRow:
    """
    One alpha of the scan

    Attributes:
        alpha: Dispersion scale
        classical_mean: MC estimate of m_y under B = alpha * rho
        rescaled: classical_mean / alpha
        quantum_value: Tr(rho A)
        gap: |rescaled - quantum_value|
        mc_std_error: Standard error of classical_mean
        count: Samples used for this row
        seed: Row seed
    """

    alpha: float
    classical_mean: float
    rescaled: float
    quantum_value: float
    gap: float
    mc_std_error: float
    count: int
    seed: int

    def __post_init__(self):
        if self.gap != abs(self.rescaled - self.quantum_value):
            raise ValueError('gap must equal |rescaled - quantum_value|')

    @property
    def noise_floor(self):
        """Gap size indistinguishable from MC noise: 4 * std_error / alpha"""
        return SIGNIFICANCE_SIGMAS * self.mc_std_error / self.alpha

    def to_dict(self):
        return {
            'alpha': self.alpha,
            'classical_mean': self.classical_mean,
            'rescaled': self.rescaled,
            'quantum_value': self.quantum_value,
            'gap': self.gap,
            'mc_std_error': self.mc_std_error,
            'count': self.count,
            'seed': self.seed,
        }


@dataclass(frozen=True)
class LineFit:
    """
    Least-squares line y = intercept + slope * x

    Attributes:
        slope: Fitted slope, or None when the fit is impossible
        intercept: Fitted intercept, or None
        significant: False when the data are dominated by MC noise
    """

    slope: float
    intercept: float
    significant: bool

    def to_dict(self):
        return {'slope': self.slope, 'intercept': self.intercept, 'significant': self.significant}


def row_seed(seed, row_index):
    """
    Deterministic 64-bit seed of one scan row

    Args:
        seed: Scan seed
        row_index: Row position

    Returns:
        int
    """
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(row_index,))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def row_count(count, alpha, cap):
    """Samples for one row: ceil(count / alpha^2), capped"""
    return int(min(cap, math.ceil(count / (alpha * alpha))))


def convergence_scan(expression, rho, alphas=DEFAULT_ALPHAS, count=1_000_000, seed=0,
                     family=Family.GAUSSIAN, workers=None, max_row_count=None):
    """
    Measure how fast classical averages approach the trace rule as alpha -> 0

    Args:
        expression: Parsed Expression with f(0) = 0
        rho: DensityAnalog
        alphas: Positive dispersion scales
        count: Base sample count; each row uses count / alpha^2, capped
        seed: Scan seed; row k uses row_seed(seed, k)
        family: Sampling family
        workers: MC threads
        max_row_count: Per-row cap (default from settings)

    Returns:
        List of ConvergenceRow in the order of alphas

    Raises:
        PreconditionViolation: f(0) != 0, empty or non-positive alphas
    """
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise PreconditionViolation(['alphas nonempty'])
    if any(not a > 0 for a in alphas):
        raise PreconditionViolation(['alpha > 0'], f"alphas = {alphas}")
    if expression.arity > rho.dimension:
        raise DimensionMismatchError(
            f"expression uses x{expression.arity} but rho is {rho.dimension} x {rho.dimension}"
        )
    count = check_count(count)
    seed = check_seed(seed)
    cap = max_row_count or get_settings().max_row_count
    check_symmetric_case(expression, np.zeros(rho.dimension))

    quantum_value = quantum_average(rho, hessian_to_observable(expression, rho.dimension))

    rows = []
    for index, alpha in enumerate(alphas):
        model = make_alpha_model(rho, alpha, family)
        samples = row_count(count, alpha, cap)
        seed_k = row_seed(seed, index)
        estimate = estimate_mean(expression, model, samples, seed_k, workers)
        rescaled = estimate.mean / alpha
        row = ConvergenceRow(
            alpha=alpha,
            classical_mean=estimate.mean,
            rescaled=rescaled,
            quantum_value=quantum_value,
            gap=abs(rescaled - quantum_value),
            mc_std_error=estimate.std_error,
            count=samples,
            seed=seed_k,
        )
        logger.info(f"alpha={alpha!r}: rescaled {rescaled!r}, gap {row.gap!r} ({samples} samples)")
        rows.append(row)
    return rows


def fit_gap_slope(rows):
    """
    Log-log least squares of gap against alpha

    The fit is not significant when any gap is zero or within
    4 * mc_std_error / alpha of zero.

    Args:
        rows: ConvergenceRow list

    Returns:
        LineFit in log space (slope is the convergence order)
    """
    gaps = np.array([row.gap for row in rows])
    if len(rows) < 2 or np.any(gaps <= 0.0):
        logger.warning('Gap slope fit not possible: fewer than two rows or a zero gap')
        return LineFit(slope=None, intercept=None, significant=False)
    alphas = np.array([row.alpha for row in rows])
    slope, intercept = np.polyfit(np.log(alphas), np.log(gaps), 1)
    significant = all(row.gap > row.noise_floor for row in rows)
    if not significant:
        logger.warning('Gap slope fit is not significant: gaps are within MC noise')
    return LineFit(slope=float(slope), intercept=float(intercept), significant=significant)


def fit_rescaled_line(rows):
    """
    Linear least squares rescaled = intercept + slope * alpha

    Args:
        rows: ConvergenceRow list

    Returns:
        LineFit (significant when the slope exceeds its noise)
    """
    if len(rows) < 2:
        return LineFit(slope=None, intercept=None, significant=False)
    alphas = np.array([row.alpha for row in rows])
    rescaled = np.array([row.rescaled for row in rows])
    slope, intercept = np.polyfit(alphas, rescaled, 1)
    spread = float(alphas.max() - alphas.min())
    noise = max(row.mc_std_error / row.alpha for row in rows)
    significant = abs(slope) * spread > SIGNIFICANCE_SIGMAS * noise
    return LineFit(slope=float(slope), intercept=float(intercept), significant=bool(significant))
