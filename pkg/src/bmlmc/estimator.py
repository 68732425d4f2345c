"""Rate estimation, error estimation, and optimal sample allocation.

All operations are pure functions of an MlmcDataset.  Rates come from
unweighted least squares of log2 of the per-level statistics against the
level index; the bias estimate folds lower levels in for robustness; the
allocation is the closed-form continuous minimizer of the per-level cost
subject to the variance target, rounded up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .stats import MlmcDataset, sample_variance

RATE_CLAMP = (0.05, 10.0)


@dataclass(frozen=True)
class RateEstimate:
    alpha_hat: float
    c_alpha_hat: float
    beta_hat: float
    c_beta_hat: float
    gamma_hat: float
    c_gamma_hat: float
    defaulted: bool = False
    clamped: bool = False


@dataclass(frozen=True)
class ErrorEstimate:
    err_disc: float
    err_input: float

    @property
    def err_mse(self) -> float:
        return self.err_input + self.err_disc**2

    @property
    def err_rmse(self) -> float:
        return math.sqrt(self.err_mse)


@dataclass(frozen=True)
class Allocation:
    m_opt: tuple[int, ...]
    m_continuous: tuple[float, ...]
    predicted_cost: float


def _fit_log2(levels: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Least squares of log2(values) on levels; returns (slope, intercept)."""
    slope, intercept = np.polyfit(levels, np.log2(values), 1)
    return float(slope), float(intercept)


def _clamp_rate(rate: float) -> tuple[float, bool]:
    lo, hi = RATE_CLAMP
    if rate < lo:
        return lo, True
    if rate > hi:
        return hi, True
    return rate, False


def fit_rates(data: MlmcDataset, h0: float,
              fallback: tuple[float, float, float] = (1.0, 1.0, 2.0)
              ) -> RateEstimate:
    """Fit decay/growth rates to the accumulated level statistics.

    alpha from |mean Y_l|, beta from the Y sample variance (both over
    levels 1..L, level 0 carries no difference), gamma from the mean cost
    over levels 0..L.  Rates are clamped to RATE_CLAMP; with fewer than
    two usable levels the configured fallback rates are returned with the
    defaulted flag set.
    """
    diff_levels = [a for a in data.accumulators[1:] if a.count >= 2]
    y_pts = [(a.level, abs(a.mean_y)) for a in diff_levels if a.mean_y != 0.0]
    v_pts = [(a.level, sample_variance(a)) for a in diff_levels
             if a.s2_y > 0.0]
    c_pts = [(a.level, a.mean_cost) for a in data.accumulators
             if a.count >= 1 and a.mean_cost > 0.0]

    defaulted = False
    clamped = False

    def fit(points, sign):
        nonlocal clamped
        ls = np.array([p[0] for p in points], float)
        vs = np.array([p[1] for p in points], float)
        slope, intercept = _fit_log2(ls, vs)
        rate, hit = _clamp_rate(sign * slope)
        clamped |= hit
        return rate, intercept

    if len(y_pts) >= 2:
        alpha, b = fit(y_pts, -1.0)
        # |mean Y_l| ~ c_alpha (2^alpha - 1) h_l^alpha
        c_alpha = 2.0**b / ((2.0**alpha - 1.0) * h0**alpha)
    else:
        alpha, c_alpha, defaulted = fallback[0], 1.0, True

    if len(v_pts) >= 2:
        beta, b = fit(v_pts, -1.0)
        c_beta = 2.0**b / h0**beta
    else:
        beta, c_beta, defaulted = fallback[1], 1.0, True

    if len(c_pts) >= 2:
        gamma, b = fit(c_pts, 1.0)
        c_gamma = 2.0**b * h0**gamma
    else:
        gamma, c_gamma, defaulted = fallback[2], 1.0, True

    return RateEstimate(alpha, c_alpha, beta, c_beta, gamma, c_gamma,
                        defaulted=defaulted, clamped=clamped)


def estimate_bias(data: MlmcDataset, alpha_hat: float) -> float:
    """Geometric-sum bias estimate from the level differences.

    max over l = 1..L of |mean Y_l| / (2^a - 1) * 2^{-a (L - l)}; the
    absolute value keeps the estimate sign-robust.  L = 0 returns +inf:
    with a single level there is no difference information and the
    controller must grow the hierarchy.
    """
    top = data.max_level
    if top < 1:
        return math.inf
    if alpha_hat <= 0.0:
        raise ValueError(f"alpha_hat must be > 0, got {alpha_hat}")
    denom = 2.0**alpha_hat - 1.0
    return max(abs(a.mean_y) / denom * 2.0 ** (-alpha_hat * (top - a.level))
               for a in data.accumulators[1:])


def estimate_input_error(data: MlmcDataset) -> float:
    """Estimator variance: sum over levels of s2_Y / M."""
    total = 0.0
    for acc in data.accumulators:
        total += sample_variance(acc) / acc.count
    return total


def estimate_mse(data: MlmcDataset, rates: RateEstimate) -> ErrorEstimate:
    return ErrorEstimate(err_disc=estimate_bias(data, rates.alpha_hat),
                         err_input=estimate_input_error(data))


def optimal_samples(data: MlmcDataset, epsilon: float, theta: float) -> Allocation:
    """Cost-optimal per-level sample counts for variance target theta*eps^2.

    Continuous optimizer ceil'd per level; a zero-variance level is floored
    at one sample since the telescope needs every level present.  The
    predicted cost is the incremental cost of raising the current counts
    to the optimum.
    """
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must be in (0,1), got {theta}")
    variances = []
    costs = []
    for acc in data.accumulators:
        variances.append(sample_variance(acc))
        if acc.mean_cost <= 0.0:
            raise ValueError(f"level {acc.level} has no cost estimate")
        costs.append(acc.mean_cost)
    v = np.asarray(variances)
    c = np.asarray(costs)
    weight = math.fsum(np.sqrt(v * c))
    prefactor = (math.sqrt(theta) * epsilon) ** -2
    continuous = prefactor * np.sqrt(v / c) * weight
    m_opt = [max(int(math.ceil(m)), 1) for m in continuous]
    predicted = math.fsum(
        max(m_opt[ell] - data.accumulators[ell].count, 0) * costs[ell]
        for ell in range(len(m_opt)))
    return Allocation(m_opt=tuple(m_opt),
                      m_continuous=tuple(float(x) for x in continuous),
                      predicted_cost=predicted)


def drain_allocation(data: MlmcDataset, budget: float,
                     unit_costs: Sequence[float] | None = None
                     ) -> tuple[int, ...]:
    """Per-level sample increments that spend at most `budget` optimally.

    Water-filling on the estimator variance: level targets
    max(M_l, sqrt(V_l / (mu C_l))) with the multiplier mu chosen so the
    incremental cost meets the budget, then floored so the result is
    guaranteed affordable.  Used to exhaust leftover budget when the
    tolerance sequence cannot make further progress.
    """
    counts = np.asarray(data.counts, dtype=float)
    v = np.array([sample_variance(acc) for acc in data.accumulators])
    if unit_costs is None:
        c = np.array([acc.mean_cost for acc in data.accumulators])
    else:
        c = np.asarray(unit_costs, dtype=float)
    if budget <= 0.0 or np.all(v <= 0.0):
        return tuple(0 for _ in counts)

    def spend(mu: float) -> float:
        target = np.sqrt(np.maximum(v, 0.0) / (mu * c))
        return float(np.sum(np.maximum(target - counts, 0.0) * c))

    hi = max(float(np.max(v / (c * counts**2))), 1e-300)
    lo = hi
    while spend(lo) < budget and lo > 1e-280:
        lo *= 1e-2
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if spend(mid) > budget:
            lo = mid
        else:
            hi = mid
    target = np.sqrt(np.maximum(v, 0.0) / (hi * c))
    delta = np.maximum(np.floor(target) - counts, 0.0).astype(int)
    return tuple(int(d) for d in delta)


class DeltaEstimate(NamedTuple):
    value: float
    boundary: bool


def theoretical_delta(alpha: float, beta: float, gamma: float) -> DeltaEstimate:
    """Predicted error-vs-budget exponent.

    1/2 when the variance decays faster than the cost grows (beta > gamma),
    alpha / (2 alpha + gamma - beta) otherwise.  beta == gamma sits outside
    the two analyzed regimes; the limit value 1/2 is returned flagged.
    """
    if min(alpha, beta, gamma) <= 0.0:
        raise ValueError("rates must be > 0")
    if beta > gamma:
        return DeltaEstimate(0.5, False)
    if beta == gamma:
        return DeltaEstimate(0.5, True)
    return DeltaEstimate(alpha / (2.0 * alpha + (gamma - beta)), False)
