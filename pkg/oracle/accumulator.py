"""
Moment Accumulator
Streaming count / mean / sum of squared deviations with an exact merge order
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MomentAccumulator:
    """
    Running first and second moments

    Attributes:
        count: Number of values
        mean: Running mean
        m2: Sum of squared deviations from the mean
    """

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def from_values(cls, values):
        """
        Moments of one chunk, two-pass around the chunk mean

        Args:
            values: 1-D float array

        Returns:
            MomentAccumulator
        """
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            return cls()
        mean = float(np.mean(values))
        deviations = values - mean
        return cls(count=int(values.size), mean=mean, m2=float(np.dot(deviations, deviations)))

    def merge(self, other):
        """
        Combine with the moments of a later, disjoint block

        Args:
            other: MomentAccumulator

        Returns:
            New MomentAccumulator
        """
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / count)
        m2 = self.m2 + other.m2 + delta * delta * (self.count * other.count / count)
        return MomentAccumulator(count=count, mean=mean, m2=m2)

    @property
    def variance(self):
        """Unbiased sample variance (0 for fewer than two values)"""
        if self.count < 2:
            return 0.0
        return max(self.m2, 0.0) / (self.count - 1)

    @property
    def std_error(self):
        """Sample standard deviation / sqrt(count)"""
        if self.count == 0:
            return 0.0
        return math.sqrt(self.variance) / math.sqrt(self.count)
