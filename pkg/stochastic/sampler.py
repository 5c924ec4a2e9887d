"""
Sampler
Deterministic, chunked draws from a StochasticModel

Stream definition: the sample stream for (model, seed) is cut into chunks of
CHUNK_SIZE points. Chunk k is drawn from numpy's Philox4x64 counter-based
generator keyed by SeedSequence(seed, spawn_key=(k,)); gaussian coordinates
use the generator's ziggurat standard_normal. Because every chunk owns its
substream, any worker schedule reproduces the same points bit for bit.
"""

import math
import logging
from dataclasses import dataclass

import numpy as np

from core.errors import ConfigError
from core.parallel import ordered_map
from stochastic.model import Family

logger = logging.getLogger(__name__)

CHUNK_SIZE = 65536
MAX_SEED = 2 ** 64 - 1
SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class SampleBatch:
    """
    Materialised sample

    Attributes:
        points: Array of shape (count, n)
        seed: Stream seed
        count: Number of points
    """

    points: np.ndarray
    seed: int
    count: int

    def __post_init__(self):
        if self.points.shape[0] != self.count:
            raise ValueError(f"batch holds {self.points.shape[0]} points, count says {self.count}")
        self.points.setflags(write=False)


def check_seed(seed):
    """
    Validate a 64-bit unsigned seed

    Args:
        seed: Candidate seed

    Returns:
        Seed as int

    Raises:
        ConfigError: Not an integer in [0, 2^64 - 1]
    """
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ConfigError(f"seed must be in [0, 2^64 - 1], got {seed}")
    return seed


def check_count(count):
    if isinstance(count, bool) or not isinstance(count, (int, np.integer)) or count < 1:
        raise ConfigError(f"count must be a positive integer, got {count!r}")
    return int(count)


def chunk_generator(seed, chunk_index):
    """
    Generator for one chunk of the stream

    Args:
        seed: Stream seed
        chunk_index: Chunk number k

    Returns:
        numpy Generator over Philox4x64
    """
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(chunk_index,))
    return np.random.Generator(np.random.Philox(sequence))


def chunk_layout(count):
    """
    (chunk_index, offset, size) for every chunk of a count-point stream

    Args:
        count: Total number of points

    Returns:
        List of tuples
    """
    return [
        (k, offset, min(CHUNK_SIZE, count - offset))
        for k, offset in enumerate(range(0, count, CHUNK_SIZE))
    ]


def sample_chunk(model, seed, chunk_index, size):
    """
    Draw one chunk

    Args:
        model: StochasticModel
        seed: Stream seed
        chunk_index: Chunk number
        size: Points in this chunk (<= CHUNK_SIZE)

    Returns:
        Array of shape (size, n)
    """
    rng = chunk_generator(seed, chunk_index)
    n = model.dimension
    if model.family is Family.GAUSSIAN:
        z = rng.standard_normal((size, n))
        return model.mean + z @ model.factor.T
    if model.family is Family.SYMMETRIC_TWO_POINT:
        signs = rng.integers(0, 2, size=(size, n), dtype=np.int8) * 2 - 1
        return model.mean + signs * model.sigma
    # uniform on [m - sigma sqrt(3), m + sigma sqrt(3)] has variance sigma^2
    u = rng.uniform(-1.0, 1.0, size=(size, n))
    return model.mean + u * (model.sigma * SQRT3)


def iter_chunks(model, count, seed, workers=1):
    """
    Stream the sample chunk by chunk, in chunk order

    Args:
        model: StochasticModel
        count: Total number of points
        seed: Stream seed
        workers: Threads used to draw chunks ahead

    Yields:
        (offset, points) with points of shape (size, n)
    """
    count = check_count(count)
    seed = check_seed(seed)
    layout = chunk_layout(count)
    chunks = ordered_map(lambda item: sample_chunk(model, seed, item[0], item[2]), layout, workers)
    for (k, offset, size), points in zip(layout, chunks):
        yield offset, points


def sample(model, count, seed, workers=1):
    """
    Draw count points from the model

    Args:
        model: StochasticModel
        count: Positive number of points
        seed: 64-bit unsigned seed
        workers: Threads (does not change the result)

    Returns:
        SampleBatch
    """
    count = check_count(count)
    seed = check_seed(seed)
    points = np.empty((count, model.dimension), dtype=np.float64)
    for offset, chunk in iter_chunks(model, count, seed, workers):
        points[offset:offset + chunk.shape[0]] = chunk
    logger.info(f"Sampled {count} points ({model.family.value}, seed {seed})")
    return SampleBatch(points=points, seed=seed, count=count)
