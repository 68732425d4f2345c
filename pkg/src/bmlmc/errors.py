"""Errors shared between the scheduler and the sample problems."""

from __future__ import annotations


class DivergedSampleError(RuntimeError):
    """A sample evaluation produced a non-finite value.

    Identifies the failing sample so a run can be reproduced; diverged
    samples abort the round instead of being dropped (dropping would bias
    the estimator).
    """

    def __init__(self, level: int, ordinal: int, seed: int):
        super().__init__(
            f"sample diverged at level {level}, ordinal {ordinal}, "
            f"seed {seed:#018x}")
        self.level = level
        self.ordinal = ordinal
        self.seed = seed
