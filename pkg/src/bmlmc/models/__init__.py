"""Sample problems behind a common evaluation interface.

A sample problem maps (level, seed) to (q_fine, q_coarse, cost) where
both quantities come from the same input realization (common random
numbers) and level 0 returns q_coarse = 0.  The batch entry point
evaluate_ordinals derives the per-sample seeds from the master seed and
the global per-level ordinals, so results never depend on scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np


@dataclass(frozen=True)
class ModelDescriptor:
    spatial_dimension: int
    h0: float

    def h(self, level: int) -> float:
        return self.h0 * 2.0 ** (-level)

    @property
    def fallback_rates(self) -> tuple[float, float, float]:
        # cost exponent defaults to D + 1 (optimal solver scaling)
        return (1.0, 1.0, float(self.spatial_dimension + 1))


@runtime_checkable
class SampleProblem(Protocol):
    @property
    def descriptor(self) -> ModelDescriptor: ...

    def evaluate(self, level: int, seed: int) -> tuple[float, float, float]: ...

    def evaluate_ordinals(self, level: int, start: int, count: int,
                          master_seed: int
                          ) -> tuple[np.ndarray, np.ndarray, np.ndarray]: ...

    def modeled_cost(self, level: int) -> float: ...


from .synthetic import SyntheticSpec, SyntheticProblem  # noqa: E402
from .field import CovSpec, FieldSampler, sample_field  # noqa: E402
from .wave1d import Wave1DSpec, Wave1DProblem  # noqa: E402

__all__ = [
    "ModelDescriptor", "SampleProblem",
    "SyntheticSpec", "SyntheticProblem",
    "CovSpec", "FieldSampler", "sample_field",
    "Wave1DSpec", "Wave1DProblem",
]
