"""Streaming mean and variance (Welford updates, Chan merges)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class RunningStats:
    """Running mean/variance of a scalar or fixed-shape array sample stream."""

    count: int = 0
    mean: np.ndarray | float = 0.0
    m2: np.ndarray | float = 0.0

    def push(self, x) -> None:
        x = np.asarray(x, dtype=float)
        self.count += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (x - self.mean)

    def push_batch(self, xs) -> None:
        """Add a batch of samples stacked along axis 0."""
        xs = np.asarray(xs, dtype=float)
        if xs.shape[0] == 0:
            return
        other = RunningStats(xs.shape[0], xs.mean(axis=0), ((xs - xs.mean(axis=0)) ** 2).sum(axis=0))
        self.merge(other)

    def merge(self, other: RunningStats) -> None:
        if other.count == 0:
            return
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean, other.m2
            return
        n = self.count + other.count
        delta = other.mean - self.mean
        self.mean = self.mean + delta * other.count / n
        self.m2 = self.m2 + other.m2 + delta**2 * self.count * other.count / n
        self.count = n

    @property
    def variance(self):
        """Unbiased sample variance (0 for fewer than two samples)."""
        if self.count < 2:
            return np.zeros_like(np.asarray(self.mean, dtype=float))
        return self.m2 / (self.count - 1)

    @property
    def std(self):
        return np.sqrt(self.variance)

    @property
    def sem(self):
        """Standard error of the mean."""
        if self.count == 0:
            return np.zeros_like(np.asarray(self.mean, dtype=float))
        return self.std / np.sqrt(self.count)
