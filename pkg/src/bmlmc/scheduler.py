"""Multi-sample load distribution on a power-of-two processor set.

Samples of one level are executed in waves.  Within a wave every sample
gets a disjoint contiguous group of 2^k units, with k chosen per wave
from the residual sample count so that

    2^k <= p / m < 2^(k+1)        (k = 0 once m >= p).

Full waves (m >= p) are stored run-length encoded so plans for millions
of samples stay O(1) in memory.  Wall time is simulated analytically: a
sample of cost c on 2^k units takes c * 2^(-k*sigma_eff) wall time and
occupies c * 2^(k*(1-sigma_eff)) unit-time, which models the
communication loss of spreading one solve over more units; units outside
any group idle for the wave span.

Statistics are accumulated in fixed-size ordinal chunks and reduced by a
fixed-shape binary tree, so the result is bit-identical for any worker
count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.optimize import least_squares

from . import _kernels
from .errors import DivergedSampleError
from .seeding import sample_seed
from .stats import LevelAccumulator, merge_tree

CHUNK = 8192


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def split_exponent(p_size: int, m: int) -> int:
    """Group-size exponent k with 2^k <= p/m < 2^(k+1); k = 0 for m >= p."""
    if not is_power_of_two(p_size):
        raise ValueError(f"processor count must be a power of two, got {p_size}")
    if m < 1:
        raise ValueError(f"sample count must be >= 1, got {m}")
    if m >= p_size:
        return 0
    return (p_size // m).bit_length() - 1


@dataclass(frozen=True)
class WaveRun:
    """repeat identical waves of `groups` groups, each of 2^k units."""
    repeat: int
    k: int
    groups: int

    @property
    def samples(self) -> int:
        return self.repeat * self.groups


@dataclass(frozen=True)
class LevelPlan:
    level: int
    delta_m: int
    waves: tuple[WaveRun, ...]


@dataclass(frozen=True)
class SampleGroup:
    group_id: int
    level: int
    wave: int
    sample_index: int
    unit_lo: int
    unit_hi: int
    seed: int

    @property
    def units(self) -> int:
        return self.unit_hi - self.unit_lo


@dataclass(frozen=True)
class SchedulePlan:
    """Per-level wave assignment, levels in descending execution order."""
    p_size: int
    levels: tuple[LevelPlan, ...]

    def level(self, ell: int) -> LevelPlan:
        for lp in self.levels:
            if lp.level == ell:
                return lp
        raise KeyError(ell)


def build_plan(p_size: int, delta_m: Sequence[int]) -> SchedulePlan:
    """Wave plan for delta_m[level] new samples per level.

    Levels are ordered descending; within a level, full waves of p
    singleton groups come first and a final partial wave regroups the
    residual onto larger groups (k from the residual count).
    """
    if not is_power_of_two(p_size):
        raise ValueError(f"processor count must be a power of two, got {p_size}")
    plans = []
    for level in range(len(delta_m) - 1, -1, -1):
        n = int(delta_m[level])
        if n < 0:
            raise ValueError(f"negative sample count at level {level}")
        waves = []
        full, rem = divmod(n, p_size)
        if full:
            waves.append(WaveRun(repeat=full, k=0, groups=p_size))
        if rem:
            waves.append(WaveRun(repeat=1, k=split_exponent(p_size, rem),
                                 groups=rem))
        plans.append(LevelPlan(level=level, delta_m=n, waves=tuple(waves)))
    return SchedulePlan(p_size=p_size, levels=tuple(plans))


def expand_groups(plan: SchedulePlan, level: int, master_seed: int,
                  ordinal_offset: int,
                  seed_fn: Callable[[int, int, int], int]) -> Iterator[SampleGroup]:
    """Materialize SampleGroups for one level (lazy; plans may be huge)."""
    lp = plan.level(level)
    local = 0
    wave_no = 0
    for run in lp.waves:
        size = 1 << run.k
        for _ in range(run.repeat):
            for g in range(run.groups):
                ordinal = ordinal_offset + local
                yield SampleGroup(
                    group_id=g, level=level, wave=wave_no,
                    sample_index=ordinal, unit_lo=g * size,
                    unit_hi=(g + 1) * size,
                    seed=seed_fn(master_seed, level, ordinal))
                local += 1
            wave_no += 1


@dataclass
class LevelCost:
    level: int
    samples: int = 0
    raw_cost: float = 0.0
    charged_cost: float = 0.0
    busy: float = 0.0
    idle: float = 0.0
    span: float = 0.0


@dataclass
class CostRecord:
    """Simulated (or measured) cost bookkeeping for one execution."""
    p_size: int
    levels: list[LevelCost] = field(default_factory=list)
    sync_span: float = 0.0

    @property
    def wall_span(self) -> float:
        return sum(lc.span for lc in self.levels) + self.sync_span

    @property
    def raw_cost(self) -> float:
        return sum(lc.raw_cost for lc in self.levels)

    @property
    def charged_cost(self) -> float:
        return sum(lc.charged_cost for lc in self.levels)

    @property
    def busy(self) -> float:
        return sum(lc.busy for lc in self.levels)

    @property
    def idle(self) -> float:
        return sum(lc.idle for lc in self.levels) + self.sync_span * self.p_size

    @property
    def comm_loss(self) -> float:
        """Units-time spent beyond the intrinsic sample cost (group spread)."""
        return self.busy - self.raw_cost

    def cluster_cost(self) -> float:
        """Reserved units x simulated wall time, idle and sync included."""
        return self.p_size * self.wall_span


@dataclass
class SchedulerConfig:
    p_size: int = 4
    sigma_eff: float = 0.9
    accounting: str = "samples"       # samples | cluster
    sync_span: float = 0.0            # serial wall time charged per round
    exec_mode: str = "simulated"      # simulated | threaded
    workers: int = 1

    def __post_init__(self):
        if not is_power_of_two(self.p_size):
            raise ValueError(f"p_size must be a power of two, got {self.p_size}")
        if not 0.0 <= self.sigma_eff <= 1.0:
            raise ValueError("sigma_eff must be in [0, 1]")
        if self.accounting not in ("samples", "cluster"):
            raise ValueError(f"unknown accounting mode {self.accounting!r}")
        if self.exec_mode not in ("simulated", "threaded"):
            raise ValueError(f"unknown exec mode {self.exec_mode!r}")
        if self.accounting == "cluster" and self.exec_mode != "simulated":
            raise ValueError("cluster accounting needs simulated execution")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.sync_span < 0.0:
            raise ValueError("sync_span must be >= 0")


class Scheduler:
    """Executes per-round sample plans and accounts their cost."""

    def __init__(self, config: SchedulerConfig,
                 trace_sink: Callable[[dict], None] | None = None):
        self.config = config
        self.trace_sink = trace_sink

    # -- pricing ---------------------------------------------------------

    def _level_span(self, n: int, unit_cost: float) -> float:
        """Simulated wall time for n equal-cost samples of one level."""
        if n == 0:
            return 0.0
        p = self.config.p_size
        full, rem = divmod(n, p)
        span = full * unit_cost
        if rem:
            k = split_exponent(p, rem)
            span += unit_cost * 2.0 ** (-k * self.config.sigma_eff)
        return span

    def price(self, delta_m: Sequence[int], unit_costs: Sequence[float]) -> float:
        """Predicted budget consumption of a plan, in the active accounting.

        samples: plain sum of per-sample costs.  cluster: reserved units
        times predicted wall span, idle waves and the round sync included.
        """
        if self.config.accounting == "samples":
            return math.fsum(int(delta_m[ell]) * unit_costs[ell]
                             for ell in range(len(delta_m)))
        span = math.fsum(self._level_span(int(delta_m[ell]), unit_costs[ell])
                         for ell in range(len(delta_m)))
        if any(delta_m):
            span += self.config.sync_span
        return self.config.p_size * span

    def cheapest_unit(self, unit_cost_level0: float) -> float:
        """Price of the smallest indivisible piece of work (one level-0 sample)."""
        return self.price([1], [unit_cost_level0])

    # -- execution -------------------------------------------------------

    def execute(self, delta_m: Sequence[int], model, master_seed: int,
                ordinal_offsets: Sequence[int], round_index: int = 0
                ) -> tuple[list[LevelAccumulator], CostRecord]:
        """Run all samples of a round plan, levels descending.

        Returns per-level delta accumulators (zero-count accumulators for
        levels without work) and the cost record.  A non-finite sample
        value aborts the whole round.
        """
        plan = build_plan(self.config.p_size, delta_m)
        record = CostRecord(p_size=self.config.p_size)
        deltas = [LevelAccumulator(level=ell) for ell in range(len(delta_m))]
        any_work = False
        for lp in plan.levels:
            if lp.delta_m == 0:
                continue
            any_work = True
            acc, level_cost = self._execute_level(
                lp, model, master_seed, int(ordinal_offsets[lp.level]),
                round_index)
            deltas[lp.level] = acc
            record.levels.append(level_cost)
        if any_work:
            record.sync_span = self.config.sync_span
        return deltas, record

    def _evaluate_chunks(self, model, level: int, start: int, count: int,
                         master_seed: int):
        """Yield (chunk_start, qf, qc, cost) with deterministic boundaries."""
        spans = [(s, min(s + CHUNK, start + count))
                 for s in range(start, start + count, CHUNK)]

        def job(lo_hi):
            lo, hi = lo_hi
            return model.evaluate_ordinals(level, lo, hi - lo, master_seed)

        if self.config.workers > 1 and len(spans) > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                results = list(pool.map(job, spans))
        else:
            results = [job(s) for s in spans]
        for (lo, _), res in zip(spans, results):
            yield lo, *res

    def _execute_level(self, lp: LevelPlan, model, master_seed: int,
                       offset: int, round_index: int):
        cfg = self.config
        p = cfg.p_size
        level = lp.level
        measured = cfg.exec_mode == "threaded"
        n_full, rem = divmod(lp.delta_m, p)
        full_samples = n_full * p
        partial_k = split_exponent(p, rem) if rem else 0

        chunk_accs = []
        raw_costs = np.empty(lp.delta_m)
        wall_clock = time.perf_counter() if measured else None
        for lo, qf, qc, cost in self._evaluate_chunks(
                model, level, offset, lp.delta_m, master_seed):
            bad = ~(np.isfinite(qf) & np.isfinite(qc) & np.isfinite(cost))
            if bad.any():
                ordinal = lo + int(np.argmax(bad))
                raise DivergedSampleError(level, ordinal,
                                          sample_seed(master_seed, level, ordinal))
            local = np.arange(lo - offset, lo - offset + len(qf))
            raw_costs[local] = cost
            charged = cost
            if cfg.accounting == "cluster":
                factor = np.where(local < full_samples, 1.0,
                                  2.0 ** (partial_k * (1.0 - cfg.sigma_eff)))
                charged = cost * factor
            stats7 = _kernels.welford_chunk(np.ascontiguousarray(qf),
                                            np.ascontiguousarray(qc),
                                            np.ascontiguousarray(charged))
            chunk_accs.append(LevelAccumulator(
                level=level, count=int(stats7[0]), mean_q=stats7[1],
                s2_q=stats7[2], mean_y=stats7[3], s2_y=stats7[4],
                mean_cost=stats7[5], total_cost=stats7[6]))
        acc = merge_tree(chunk_accs)

        lc = LevelCost(level=level, samples=lp.delta_m)
        lc.raw_cost = float(np.sum(raw_costs))
        if measured:
            lc.span = time.perf_counter() - wall_clock
            lc.busy = lc.raw_cost
            lc.charged_cost = lc.raw_cost
            lc.idle = max(cfg.workers * lc.span - lc.busy, 0.0)
        else:
            span = 0.0
            busy = 0.0
            if n_full:
                walls = raw_costs[:full_samples].reshape(n_full, p)
                span += float(np.sum(np.max(walls, axis=1)))
                busy += float(np.sum(walls))
            if rem:
                wave_costs = raw_costs[full_samples:]
                span += float(np.max(wave_costs)) * 2.0 ** (-partial_k * cfg.sigma_eff)
                busy += float(np.sum(wave_costs)) * 2.0 ** (partial_k * (1.0 - cfg.sigma_eff))
            lc.span = span
            lc.busy = busy
            lc.charged_cost = busy if cfg.accounting == "cluster" else lc.raw_cost
            lc.idle = p * span - busy
        if self.trace_sink is not None:
            self._emit_trace(lp, raw_costs, master_seed, offset, round_index)
        return acc, lc

    @staticmethod
    def _iter_waves(lp: LevelPlan):
        for run in lp.waves:
            for _ in range(run.repeat):
                yield run.k, run.groups

    def _emit_trace(self, lp: LevelPlan, raw_costs: np.ndarray,
                    master_seed: int, offset: int, round_index: int) -> None:
        pos = 0
        for wave_no, (k, groups) in enumerate(self._iter_waves(lp)):
            for g in range(groups):
                ordinal = offset + pos
                self.trace_sink({
                    "round": round_index, "level": lp.level, "wave": wave_no,
                    "group": g, "units": 1 << k,
                    "seed": f"{sample_seed(master_seed, lp.level, ordinal):#018x}",
                    "cost": raw_costs[pos],
                })
                pos += 1


@dataclass(frozen=True)
class WeakScalingFit:
    err_s: float
    err_p: float
    delta_hat: float
    residual: float
    degenerate: bool = False


def fit_weak_scaling(points: Sequence[tuple[float, float]]) -> WeakScalingFit:
    """Fit err(k) = err_s + err_p * 2^(k*delta) with err_s, err_p >= 0.

    k counts halvings away from the largest machine, so rmse grows with
    k.  Needs >= 3 distinct k values; equal rmse values degenerate to
    err_p = 0 with an undefined exponent.
    """
    if len(points) < 3:
        raise ValueError("weak-scaling fit needs at least 3 points")
    ks = np.array([p[0] for p in points], float)
    es = np.array([p[1] for p in points], float)
    if len(set(ks.tolist())) != len(ks):
        raise ValueError("k values must be distinct")
    if np.ptp(es) <= 1e-15 * max(abs(es).max(), 1.0):
        return WeakScalingFit(float(es.mean()), 0.0, math.nan, 0.0,
                              degenerate=True)

    def resid(x):
        return x[0] + x[1] * 2.0 ** (ks * x[2]) - es

    best = None
    scale = float(es.max())
    for d0 in (0.2, 0.5, 1.0, 2.0):
        x0 = [max(es.min() * 0.5, 1e-12), max(scale * 0.1, 1e-12), d0]
        sol = least_squares(resid, x0, bounds=([0.0, 0.0, 1e-9], [np.inf, np.inf, 16.0]),
                            xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if best is None or sol.cost < best.cost:
            best = sol
    res = float(np.sqrt(2.0 * best.cost / len(ks)))
    return WeakScalingFit(float(best.x[0]), float(best.x[1]),
                          float(best.x[2]), res)
