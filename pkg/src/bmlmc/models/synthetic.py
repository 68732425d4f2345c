"""Rate-exact synthetic sample problem.

Constructs level quantities with prescribed bias, coupling-variance, and
cost exponents:

    Q_j = q_bar + c_alpha h_j^alpha + sqrt(v0) xi_0
          + sum_{i=1..j} sqrt(c_beta h_i^beta) xi_i

with iid standard normals xi_i drawn from the sample seed.  Fine and
coarse values share the xi vector, so exactly

    E[Q_l - Q] = c_alpha h_l^alpha,   V[Y_l] = c_beta h_l^beta (l >= 1),
    V[Y_0] = v0,                      cost(l) = c_gamma h_l^-gamma,

which makes every estimator quantity checkable in closed form.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..seeding import sample_seeds
from . import ModelDescriptor


@dataclass(frozen=True)
class SyntheticSpec:
    q_bar: float = 1.0
    c_alpha: float = 1.0
    alpha: float = 2.0
    c_beta: float = 1.0
    beta: float = 4.0
    c_gamma: float = 1.0
    gamma: float = 3.0
    v0: float = 1.0
    h0: float = 0.5
    cost_jitter: float = 0.0   # lognormal sigma on the cost, mean preserved

    def __post_init__(self):
        for name in ("c_alpha", "alpha", "c_beta", "beta", "c_gamma", "gamma",
                     "v0", "h0"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")
        if self.cost_jitter < 0.0:
            raise ValueError("cost_jitter must be >= 0")


class SyntheticProblem:
    def __init__(self, spec: SyntheticSpec, measured_cost: bool = False):
        self.spec = spec
        self.measured_cost = measured_cost
        self.descriptor = ModelDescriptor(spatial_dimension=1, h0=spec.h0)

    def h(self, level: int) -> float:
        return self.spec.h0 * 0.5**level

    def modeled_cost(self, level: int) -> float:
        return self.spec.c_gamma * self.h(level) ** (-self.spec.gamma)

    def evaluate_ordinals(self, level: int, start: int, count: int,
                          master_seed: int):
        seeds = sample_seeds(master_seed, level,
                             np.arange(start, start + count, dtype=np.uint64))
        s = self.spec
        t0 = time.thread_time() if self.measured_cost else 0.0
        qf, qc, cost = _kernels.synthetic_chunk(
            seeds, level, s.h0, s.q_bar, s.c_alpha, s.alpha, s.c_beta, s.beta,
            s.v0, s.c_gamma, s.gamma, s.cost_jitter)
        if self.measured_cost:
            # samples of a chunk are timed together; spread the cpu time
            cost = np.full(count, (time.thread_time() - t0) / count)
        return qf, qc, cost

    def evaluate(self, level: int, seed: int) -> tuple[float, float, float]:
        s = self.spec
        qf, qc, cost = _kernels.synthetic_chunk(
            np.array([seed], dtype=np.uint64), level, s.h0, s.q_bar, s.c_alpha,
            s.alpha, s.c_beta, s.beta, s.v0, s.c_gamma, s.gamma, s.cost_jitter)
        return float(qf[0]), float(qc[0]), float(cost[0])

    # closed forms for oracles and acceptance checks

    def true_bias(self, level: int) -> float:
        return self.spec.c_alpha * self.h(level) ** self.spec.alpha

    def true_variance_y(self, level: int) -> float:
        if level == 0:
            return self.spec.v0
        return self.spec.c_beta * self.h(level) ** self.spec.beta

    def true_variance_q(self, level: int) -> float:
        s = self.spec
        return s.v0 + sum(s.c_beta * self.h(i) ** s.beta
                          for i in range(1, level + 1))

    def true_mse(self, counts: list[int]) -> float:
        """Exact estimator MSE for given per-level sample counts."""
        top = len(counts) - 1
        var = sum(self.true_variance_y(ell) / counts[ell]
                  for ell in range(len(counts)))
        return var + self.true_bias(top) ** 2
