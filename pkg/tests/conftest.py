import numpy as np
import pytest

from bmlmc.stats import LevelAccumulator, accumulate


def batch_stats(values: np.ndarray) -> tuple[float, float]:
    """Two-pass oracle: (mean, centered second moment)."""
    mean = float(np.mean(values))
    return mean, float(np.sum((values - mean) ** 2))


def acc_from_samples(q, qc=None, cost=None, level: int = 0) -> LevelAccumulator:
    """Sequential single-sample accumulation (the reference path)."""
    q = np.asarray(q, dtype=float)
    qc = np.zeros_like(q) if qc is None else np.asarray(qc, dtype=float)
    cost = np.ones_like(q) if cost is None else np.asarray(cost, dtype=float)
    acc = LevelAccumulator(level=level)
    for i in range(len(q)):
        acc = accumulate(acc, float(q[i]), float(qc[i]), float(cost[i]))
    return acc


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
