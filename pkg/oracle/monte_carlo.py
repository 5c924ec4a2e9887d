"""
Monte Carlo Oracle
Estimate E f(x) and the covariance of x by direct sampling
"""

import logging
from dataclasses import dataclass

import numpy as np

from core.errors import InsufficientSamplesError, DimensionMismatchError
from core.parallel import ordered_map
from core.settings import get_settings
from expressions.evaluator import evaluate_batch
from oracle.accumulator import MomentAccumulator
from stochastic.sampler import (
    CHUNK_SIZE, chunk_layout, sample_chunk, check_count, check_seed
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class McEstimate:
    """
    Monte Carlo mean of f(x)

    Attributes:
        mean: Sample mean of f over the stream
        std_error: Sample standard deviation / sqrt(count)
        count: Number of samples
        seed: Stream seed
    """

    mean: float
    std_error: float
    count: int
    seed: int

    def to_dict(self):
        return {
            'value': self.mean,
            'std_error': self.std_error,
            'count': self.count,
            'seed': self.seed,
        }


def chunk_moments(expression, model, seed, chunk_index, size, offset=None):
    """
    Moments of f over one chunk of the sample stream

    Args:
        expression: Parsed Expression
        model: StochasticModel
        seed: Stream seed
        chunk_index: Chunk number
        size: Points in the chunk
        offset: Global index of the chunk's first point (for error reports)

    Returns:
        MomentAccumulator

    Raises:
        DomainError: With the global index of the first offending sample
    """
    points = sample_chunk(model, seed, chunk_index, size)
    start = chunk_index * CHUNK_SIZE if offset is None else offset
    values = evaluate_batch(expression, points, index_offset=start)
    return MomentAccumulator.from_values(values)


def estimate_mean(expression, model, count, seed, workers=None):
    """
    Monte Carlo estimate of m_y = E f(x)

    Chunks are evaluated on up to `workers` threads and merged strictly in
    chunk order, so the estimate is bit-identical for every worker count.
    A domain violation aborts the estimate; no sample is skipped.

    Args:
        expression: Parsed Expression
        model: StochasticModel
        count: Positive number of samples
        seed: 64-bit unsigned seed
        workers: Thread count (default from settings)

    Returns:
        McEstimate

    Raises:
        DomainError: f undefined at a sample; carries the sample index and point
    """
    count = check_count(count)
    seed = check_seed(seed)
    if expression.arity > model.dimension:
        raise DimensionMismatchError(
            f"expression uses x{expression.arity} but the model has {model.dimension} variables"
        )
    workers = workers or get_settings().mc_workers

    layout = chunk_layout(count)
    total = MomentAccumulator()
    moments = ordered_map(
        lambda item: chunk_moments(expression, model, seed, item[0], item[2], offset=item[1]),
        layout,
        workers,
    )
    for chunk in moments:
        total = total.merge(chunk)

    estimate = McEstimate(mean=total.mean, std_error=total.std_error, count=count, seed=seed)
    logger.info(f"MC mean of {expression}: {estimate.mean!r} +- {estimate.std_error!r} "
                f"({count} samples, seed {seed}, {workers} workers)")
    return estimate


def empirical_covariance(batch):
    """
    Sample mean and unbiased sample covariance of a batch

    Deviations are taken from the first point before centring, which keeps
    identical points at exactly zero covariance.

    Args:
        batch: SampleBatch

    Returns:
        (mean vector, covariance matrix), the matrix exactly symmetric

    Raises:
        InsufficientSamplesError: Fewer than two points
    """
    points = np.asarray(batch.points, dtype=np.float64)
    if points.shape[0] < 2:
        raise InsufficientSamplesError(f"need at least 2 samples, got {points.shape[0]}")
    shifted = points - points[0]
    shifted_mean = shifted.mean(axis=0)
    centred = shifted - shifted_mean
    covariance = (centred.T @ centred) / (points.shape[0] - 1)
    covariance = (covariance + covariance.T) / 2.0
    return points[0] + shifted_mean, covariance
