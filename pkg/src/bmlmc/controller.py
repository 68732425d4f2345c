"""Budget-driven MLMC round loop.

One run is a sequence of estimation rounds against a shrinking tolerance
sequence.  Each round: estimate errors from the accumulated statistics,
plan work (grow the level hierarchy if the bias estimate dominates,
reallocate samples if the variance estimate dominates), price the plan,
and then either execute it, relax the tolerance to the midpoint with the
last executed tolerance (plan too expensive), or tighten it by eta (plan
empty).  Work executes level-descending and merges into the shared
dataset; samples are never discarded.  The run stops when the remaining
budget cannot fund one coarsest sample, when the tolerance floor is
reached, or when relax/tighten alternations stall without progress.

Budget accounting: in modeled cost mode the ledger is charged with the
plan price (deterministic arithmetic, so consumed <= budget holds
exactly); in measured mode it is charged with the recorded cost, and the
possible overshoot of the final round is reported.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from .errors import DivergedSampleError
from .estimator import (ErrorEstimate, RateEstimate, drain_allocation,
                        estimate_mse, fit_rates, optimal_samples)
from .scheduler import Scheduler
from .stats import MlmcDataset, empty_dataset, merge_datasets


@dataclass
class BmlmcConfig:
    budget: float
    theta: float = 0.5
    eta: float = 0.9
    init_samples: tuple[int, ...] = (2**12, 2**10, 2**7, 2**5)
    max_level: int = 12
    epsilon_min: float = 0.0
    cost_mode: str = "modeled"          # modeled | measured
    master_seed: int = 0
    relax_limit: int = 25

    def __post_init__(self):
        if self.budget <= 0.0:
            raise ValueError("budget must be > 0")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must be in (0, 1)")
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must be in (0, 1)")
        if not self.init_samples or any(m < 2 for m in self.init_samples):
            raise ValueError("init_samples needs >= 2 samples per level")
        if list(self.init_samples) != sorted(self.init_samples, reverse=True):
            warnings.warn("init_samples is not decreasing in level", RuntimeWarning)
        if self.max_level < len(self.init_samples) - 1:
            raise ValueError("max_level below the initial hierarchy")
        if self.epsilon_min < 0.0:
            raise ValueError("epsilon_min must be >= 0")
        if self.cost_mode not in ("modeled", "measured"):
            raise ValueError(f"unknown cost_mode {self.cost_mode!r}")

    @property
    def pilot_samples(self) -> int:
        """Seed count for a freshly grown level (variance needs >= 2)."""
        return max(self.init_samples[-1] // 2, 8)


@dataclass
class BudgetLedger:
    initial: float
    consumed_per_round: list[float] = field(default_factory=list)

    @property
    def consumed(self) -> float:
        return math.fsum(self.consumed_per_round)

    @property
    def remaining(self) -> float:
        return self.initial - self.consumed

    @property
    def overshoot(self) -> float:
        return max(-self.remaining, 0.0)

    def charge(self, amount: float) -> None:
        self.consumed_per_round.append(amount)


@dataclass(frozen=True)
class RoundPlan:
    target_epsilon: float
    delta_m: tuple[int, ...]
    grow_level: bool
    predicted_cost: float
    bias_bound: bool = False

    @property
    def is_empty(self) -> bool:
        return all(d == 0 for d in self.delta_m)


class Decision(NamedTuple):
    kind: str                 # proceed | relax | tighten | stop
    epsilon: float | None = None


@dataclass
class LossSummary:
    raw_cost: float = 0.0
    charged_cost: float = 0.0
    busy: float = 0.0
    idle: float = 0.0
    wall_span: float = 0.0
    sync_span: float = 0.0

    def add(self, record) -> None:
        self.raw_cost += record.raw_cost
        self.charged_cost += record.charged_cost
        self.busy += record.busy
        self.idle += record.idle
        self.wall_span += record.wall_span
        self.sync_span += record.sync_span

    @property
    def comm_loss(self) -> float:
        return self.busy - self.raw_cost


@dataclass
class RunResult:
    config: BmlmcConfig
    data: MlmcDataset
    rounds: list[dict]
    ledger: BudgetLedger
    losses: LossSummary
    rates: RateEstimate | None
    errors: ErrorEstimate | None
    epsilon_final: float
    stop_reason: str
    flags: list[str]

    @property
    def q_hat(self) -> float:
        return self.data.q_hat()

    @property
    def feasible(self) -> bool:
        return "infeasible-init" not in self.flags


def _unit_costs(data: MlmcDataset, model, cost_mode: str, n_levels: int,
                rates: RateEstimate | None) -> list[float]:
    """Per-level unit costs for pricing, covering a possibly new top level."""
    if cost_mode == "modeled":
        return [model.modeled_cost(ell) for ell in range(n_levels)]
    costs = [acc.mean_cost for acc in data.accumulators]
    while len(costs) < n_levels:
        # unseen level: extrapolate with the fitted cost growth rate
        growth = 2.0 ** (rates.gamma_hat if rates is not None else 2.0)
        costs.append(costs[-1] * growth)
    return costs[:n_levels]


def plan_round(data: MlmcDataset, epsilon: float, theta: float,
               errors: ErrorEstimate, max_level: int, pilot: int,
               scheduler: Scheduler, unit_cost_fn,
               allow_growth: bool = True) -> RoundPlan:
    """One planning pass of the round loop.

    The bias branch grows the hierarchy (bounded by max_level, seeded
    with the pilot count) and the variance branch recomputes the optimal
    allocation; both may fire in the same round.
    """
    counts = data.counts
    grow = errors.err_disc >= math.sqrt(1.0 - theta) * epsilon
    bias_bound = False
    if grow and (data.max_level >= max_level or not allow_growth):
        grow = False
        bias_bound = True
    if errors.err_input >= theta * epsilon**2:
        m_opt = list(optimal_samples(data, epsilon, theta).m_opt)
    else:
        m_opt = list(counts)
    delta = [max(m_opt[ell] - counts[ell], 0) for ell in range(len(counts))]
    if grow:
        delta.append(pilot)
    unit_costs = unit_cost_fn(len(delta))
    predicted = scheduler.price(delta, unit_costs)
    return RoundPlan(target_epsilon=epsilon, delta_m=tuple(delta),
                     grow_level=grow, predicted_cost=predicted,
                     bias_bound=bias_bound)


def budget_decision(plan: RoundPlan, ledger: BudgetLedger, eps_prev: float,
                    eta: float, cheapest_unit: float) -> Decision:
    """Proceed, retarget, or stop, given the priced plan and the ledger."""
    if ledger.remaining < cheapest_unit:
        return Decision("stop")
    if plan.is_empty or plan.predicted_cost == 0.0:
        return Decision("tighten", eta * plan.target_epsilon)
    if plan.predicted_cost > ledger.remaining:
        return Decision("relax", 0.5 * (plan.target_epsilon + eps_prev))
    return Decision("proceed")


def run(config: BmlmcConfig, model, scheduler: Scheduler,
        round_sink: Callable[[dict], None] | None = None) -> RunResult:
    """Execute one full budgeted run; see the module docstring for the loop."""
    ledger = BudgetLedger(initial=config.budget)
    losses = LossSummary()
    flags: list[str] = []
    rounds: list[dict] = []
    fallback = model.descriptor.fallback_rates
    h0 = model.descriptor.h0
    n_init = len(config.init_samples)
    data = empty_dataset(n_init)

    def unit_cost_fn_for(rates):
        return lambda n_levels: _unit_costs(data, model, config.cost_mode,
                                            n_levels, rates)

    def charge(plan_price: float, record) -> None:
        losses.add(record)
        if config.cost_mode == "modeled":
            ledger.charge(plan_price)
        else:
            actual = (record.cluster_cost()
                      if scheduler.config.accounting == "cluster"
                      else record.raw_cost)
            ledger.charge(actual)

    def execute(delta_m) -> object:
        offsets = [data.level(ell).count if ell <= data.max_level else 0
                   for ell in range(len(delta_m))]
        deltas, record = scheduler.execute(delta_m, model, config.master_seed,
                                           offsets, round_index=data.round_index)
        return MlmcDataset(tuple(deltas)), record

    def emit_row(epsilon, errors, consumed):
        row = {
            "round": data.round_index,
            "epsilon": epsilon,
            "max_level": data.max_level,
            "samples": list(data.counts),
            "err_disc": errors.err_disc,
            "err_input": errors.err_input,
            "err_rmse": errors.err_rmse,
            "consumed": consumed,
            "remaining": ledger.remaining,
        }
        rounds.append(row)
        if round_sink is not None:
            round_sink(row)

    # init round: levels L0..0 with the configured counts
    init_costs = _unit_costs(data, model, "modeled", n_init, None)
    init_price = scheduler.price(list(config.init_samples), init_costs)
    if config.cost_mode == "modeled" and init_price > config.budget:
        flags.append("infeasible-init")
        return RunResult(config=config, data=data, rounds=[], ledger=ledger,
                         losses=losses, rates=None, errors=None,
                         epsilon_final=math.inf, stop_reason="infeasible-init",
                         flags=flags)
    try:
        delta_ds, record = execute(list(config.init_samples))
    except DivergedSampleError as exc:
        flags.append("diverged-sample")
        return RunResult(config=config, data=data, rounds=rounds, ledger=ledger,
                         losses=losses, rates=None, errors=None,
                         epsilon_final=math.inf,
                         stop_reason=f"diverged: {exc}", flags=flags)
    data = merge_datasets(data, delta_ds)
    charge(init_price, record)

    rates = fit_rates(data, h0, fallback)
    errors = estimate_mse(data, rates)
    emit_row(errors.err_rmse, errors, ledger.consumed_per_round[-1])

    eps_prev = errors.err_rmse
    eps = config.eta * errors.err_rmse
    alternations = 0
    stop_reason = "budget-exhausted"

    def run_round(delta_m, price) -> bool:
        nonlocal data, rates, errors, stop_reason
        try:
            delta_ds, record = execute(list(delta_m))
        except DivergedSampleError as exc:
            flags.append("diverged-sample")
            stop_reason = f"diverged: {exc}"
            return False
        data = merge_datasets(data, delta_ds)
        charge(price, record)
        rates = fit_rates(data, h0, fallback)
        errors = estimate_mse(data, rates)
        emit_row(eps, errors, ledger.consumed_per_round[-1])
        return True

    def drain() -> bool:
        """Spend leftover budget on variance once epsilon cannot move."""
        while True:
            costs = unit_cost_fn_for(rates)(data.max_level + 1)
            if ledger.remaining < scheduler.cheapest_unit(costs[0]):
                return True
            delta = drain_allocation(data, ledger.remaining, costs)
            price = scheduler.price(delta, costs)
            if all(d == 0 for d in delta) or price > ledger.remaining:
                return True
            if "drained" not in flags:
                flags.append("drained")
            if not run_round(delta, price):
                return False

    while True:
        if config.epsilon_min > 0.0 and eps < config.epsilon_min:
            stop_reason = "eps-min-reached"
            break
        rates = fit_rates(data, h0, fallback)
        errors = estimate_mse(data, rates)
        if errors.err_rmse == 0.0 or eps <= 0.0:
            # degenerate data (zero spread and zero bias): nothing to optimize
            stop_reason = "converged"
            break
        unit_cost_fn = unit_cost_fn_for(rates)
        plan = plan_round(data, eps, config.theta, errors, config.max_level,
                          config.pilot_samples, scheduler, unit_cost_fn)
        if plan.grow_level and plan.predicted_cost > ledger.remaining:
            # growing is out of budget; keep reducing the variance instead
            plan = plan_round(data, eps, config.theta, errors,
                              config.max_level, config.pilot_samples,
                              scheduler, unit_cost_fn, allow_growth=False)
        if plan.bias_bound and "bias-bound" not in flags:
            flags.append("bias-bound")
        cheapest = scheduler.cheapest_unit(unit_cost_fn(1)[0])
        decision = budget_decision(plan, ledger, eps_prev, config.eta, cheapest)
        if decision.kind == "stop":
            stop_reason = "budget-exhausted"
            break
        if decision.kind == "relax" and decision.epsilon >= eps_prev * (1.0 - 1e-9):
            # relaxing cannot reprice any further; exhaust what is left
            if drain():
                stop_reason = "budget-exhausted"
            break
        if decision.kind in ("tighten", "relax"):
            alternations += 1
            if alternations > config.relax_limit:
                if drain():
                    stop_reason = "budget-exhausted"
                break
            eps = decision.epsilon
            continue
        if not run_round(plan.delta_m, plan.predicted_cost):
            break
        alternations = 0
        eps_prev = eps

    if config.cost_mode == "measured" and ledger.overshoot > 0.0:
        flags.append("measured-overshoot")
    return RunResult(config=config, data=data, rounds=rounds, ledger=ledger,
                     losses=losses, rates=rates, errors=errors,
                     epsilon_final=eps, stop_reason=stop_reason, flags=flags)
