import numpy as np
import pytest

from bmlmc.estimator import fit_rates
from bmlmc.models import SyntheticProblem, SyntheticSpec
from bmlmc.scheduler import Scheduler, SchedulerConfig
from bmlmc.stats import MlmcDataset


@pytest.fixture
def problem():
    return SyntheticProblem(SyntheticSpec(alpha=2.0, beta=4.0, gamma=3.0,
                                          h0=0.25))


def test_bias_contribution_exact():
    prob = SyntheticProblem(SyntheticSpec(c_alpha=1.0, alpha=2.0, h0=0.25))
    assert prob.true_bias(0) == pytest.approx(1.0 / 16.0, rel=1e-15)


def test_cost_ratio_exact(problem):
    assert problem.modeled_cost(3) == pytest.approx(
        8.0 * problem.modeled_cost(2), rel=1e-15)


def test_level0_coarse_is_zero(problem):
    qf, qc, cost = problem.evaluate(0, 987654321)
    assert qc == 0.0
    assert cost == problem.modeled_cost(0)


def test_single_vs_batch_consistency(problem):
    from bmlmc.seeding import sample_seeds
    seeds = sample_seeds(5, 2, np.arange(7, dtype=np.uint64))
    qf, qc, cost = problem.evaluate_ordinals(2, 0, 7, 5)
    for i, seed in enumerate(seeds):
        sf, sc, scost = problem.evaluate(2, int(seed))
        assert sf == pytest.approx(qf[i], rel=1e-12)
        assert sc == pytest.approx(qc[i], rel=1e-12)
        assert scost == cost[i]


def test_variance_matches_closed_form(problem):
    """Monte Carlo estimate of V[Y_l] within 3 standard errors of truth."""
    n = 100_000
    for level in (1, 2):
        qf, qc, _ = problem.evaluate_ordinals(level, 0, n, 123)
        y = qf - qc
        truth = problem.true_variance_y(level)
        est = float(np.var(y, ddof=1))
        se = truth * np.sqrt(2.0 / (n - 1))
        assert abs(est - truth) <= 3.0 * se
        assert abs(float(np.mean(y)) - (problem.true_bias(level)
                                        - problem.true_bias(level - 1))) \
            <= 3.0 * np.sqrt(truth / n)


def test_mean_matches_closed_form(problem):
    n = 200_000
    qf, _, _ = problem.evaluate_ordinals(0, 0, n, 99)
    truth = problem.spec.q_bar + problem.true_bias(0)
    se = np.sqrt(problem.true_variance_q(0) / n)
    assert abs(float(np.mean(qf)) - truth) <= 3.0 * se


def test_common_random_numbers(problem):
    qf, qc, _ = problem.evaluate_ordinals(2, 0, 20_000, 7)
    v_y = float(np.var(qf - qc, ddof=1))
    v_q = float(np.var(qf, ddof=1))
    assert v_y < v_q  # coupling must reduce the difference variance


def test_cost_jitter_preserves_mean():
    prob = SyntheticProblem(SyntheticSpec(cost_jitter=0.5, h0=0.25))
    _, _, cost = prob.evaluate_ordinals(1, 0, 200_000, 3)
    base = prob.modeled_cost(1)
    assert float(np.mean(cost)) == pytest.approx(base, rel=0.02)


def test_rate_recovery_with_default_init():
    """Estimator recovers (2, 4, 3) within 10% from the default sequence."""
    prob = SyntheticProblem(SyntheticSpec(alpha=2.0, beta=4.0, gamma=3.0,
                                          h0=0.5))
    sched = Scheduler(SchedulerConfig(p_size=4))
    init = (2**12, 2**10, 2**7, 2**5)
    deltas, _ = sched.execute(list(init), prob, 42, [0] * 4)
    data = MlmcDataset(tuple(deltas))
    rates = fit_rates(data, h0=0.5)
    assert rates.alpha_hat == pytest.approx(2.0, rel=0.10)
    assert rates.beta_hat == pytest.approx(4.0, rel=0.10)
    assert rates.gamma_hat == pytest.approx(3.0, rel=0.10)


def test_estimated_mse_within_factor_two_of_truth():
    """Estimated MSE vs the closed-form truth for the realized counts."""
    prob = SyntheticProblem(SyntheticSpec(alpha=2.0, beta=4.0, gamma=3.0,
                                          h0=0.5))
    sched = Scheduler(SchedulerConfig(p_size=4))
    counts = [2048, 512, 64, 16]
    deltas, _ = sched.execute(counts, prob, 421, [0] * 4)
    data = MlmcDataset(tuple(deltas))
    from bmlmc.estimator import estimate_mse
    est = estimate_mse(data, fit_rates(data, h0=0.5)).err_mse
    truth = prob.true_mse(counts)
    assert truth / 2.0 <= est <= truth * 2.0
