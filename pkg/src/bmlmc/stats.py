"""Mergeable per-level sample statistics.

One LevelAccumulator tracks, for a single discretization level, the
running count, means and centered second moments of the fine quantity Q,
of the level difference Y (Y = Q at level 0), and the mean and total of
the per-sample cost.  Accumulators merge pairwise with the numerically
stable combination rule

    m_ab = m_a + m_b
    d    = mean_b - mean_a
    mean_ab = mean_a + (m_b / m_ab) * d
    s2_ab   = s2_a + s2_b + (m_a * m_b / m_ab) * d * d

so per-worker partial statistics reduce to the same values as a single
sequential pass, up to roundoff.  The empty accumulator is the exact
identity element of the merge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


class StatsError(ValueError):
    pass


class UndefinedVarianceError(StatsError):
    """Raised when a variance is requested from fewer than two samples."""


@dataclass(frozen=True)
class LevelAccumulator:
    level: int
    count: int = 0
    mean_q: float = 0.0
    s2_q: float = 0.0
    mean_y: float = 0.0
    s2_y: float = 0.0
    mean_cost: float = 0.0
    total_cost: float = 0.0

    def __post_init__(self):
        if self.level < 0:
            raise StatsError(f"level must be >= 0, got {self.level}")
        if self.count < 0:
            raise StatsError(f"count must be >= 0, got {self.count}")

    def to_json_dict(self) -> dict:
        """Full-precision serialization (floats as hex strings)."""
        return {
            "level": self.level,
            "count": self.count,
            "mean_q": self.mean_q.hex(),
            "s2_q": self.s2_q.hex(),
            "mean_y": self.mean_y.hex(),
            "s2_y": self.s2_y.hex(),
            "mean_cost": self.mean_cost.hex(),
            "total_cost": self.total_cost.hex(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "LevelAccumulator":
        return cls(
            level=int(d["level"]),
            count=int(d["count"]),
            mean_q=float.fromhex(d["mean_q"]),
            s2_q=float.fromhex(d["s2_q"]),
            mean_y=float.fromhex(d["mean_y"]),
            s2_y=float.fromhex(d["s2_y"]),
            mean_cost=float.fromhex(d["mean_cost"]),
            total_cost=float.fromhex(d["total_cost"]),
        )


def _check_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise StatsError(f"non-finite sample value {name}={value!r}")


def accumulate(acc: LevelAccumulator, q_fine: float, q_coarse: float,
               cost: float) -> LevelAccumulator:
    """Add one sample (single-point Welford update).

    Level 0 requires q_coarse == 0 so that Y = Q flows through the same
    path.  Non-finite inputs are rejected: a diverged solver sample must
    be reported, silently dropping it would bias the estimator.
    """
    _check_finite("q_fine", q_fine)
    _check_finite("q_coarse", q_coarse)
    _check_finite("cost", cost)
    if cost < 0.0:
        raise StatsError(f"cost must be >= 0, got {cost}")
    if acc.level == 0 and q_coarse != 0.0:
        raise StatsError("level 0 convention requires q_coarse = 0")
    n = acc.count + 1
    dq = q_fine - acc.mean_q
    mean_q = acc.mean_q + dq / n
    s2_q = acc.s2_q + dq * (q_fine - mean_q)
    y = q_fine - q_coarse
    dy = y - acc.mean_y
    mean_y = acc.mean_y + dy / n
    s2_y = acc.s2_y + dy * (y - mean_y)
    mean_cost = acc.mean_cost + (cost - acc.mean_cost) / n
    return replace(acc, count=n, mean_q=mean_q, s2_q=s2_q, mean_y=mean_y,
                   s2_y=s2_y, mean_cost=mean_cost,
                   total_cost=acc.total_cost + cost)


def merge(a: LevelAccumulator, b: LevelAccumulator) -> LevelAccumulator:
    """Combine two accumulators of the same level."""
    if a.level != b.level:
        raise StatsError(f"level mismatch in merge: {a.level} != {b.level}")
    if b.count == 0:
        return a
    if a.count == 0:
        return b
    n = a.count + b.count
    w = b.count / n
    dq = b.mean_q - a.mean_q
    dy = b.mean_y - a.mean_y
    cross = a.count * b.count / n
    return LevelAccumulator(
        level=a.level,
        count=n,
        mean_q=a.mean_q + w * dq,
        s2_q=a.s2_q + b.s2_q + cross * dq * dq,
        mean_y=a.mean_y + w * dy,
        s2_y=a.s2_y + b.s2_y + cross * dy * dy,
        mean_cost=a.mean_cost + w * (b.mean_cost - a.mean_cost),
        total_cost=a.total_cost + b.total_cost,
    )


def merge_tree(accs: list[LevelAccumulator]) -> LevelAccumulator:
    """Fixed-shape binary-tree reduction (adjacent pairs per pass).

    The tree shape depends only on len(accs), never on which worker
    produced an entry, so the reduction order is deterministic.
    """
    if not accs:
        raise StatsError("merge_tree needs at least one accumulator")
    layer = list(accs)
    while len(layer) > 1:
        nxt = []
        for i in range(0, len(layer) - 1, 2):
            nxt.append(merge(layer[i], layer[i + 1]))
        if len(layer) % 2:
            nxt.append(layer[-1])
        layer = nxt
    return layer[0]


def sample_variance(acc: LevelAccumulator) -> float:
    """Unbiased variance of Y: s^2 = S_2 / (count - 1)."""
    if acc.count < 2:
        raise UndefinedVarianceError(
            f"level {acc.level} has {acc.count} samples, variance needs >= 2")
    return acc.s2_y / (acc.count - 1)


def sample_variance_q(acc: LevelAccumulator) -> float:
    if acc.count < 2:
        raise UndefinedVarianceError(
            f"level {acc.level} has {acc.count} samples, variance needs >= 2")
    return acc.s2_q / (acc.count - 1)


@dataclass(frozen=True)
class MlmcDataset:
    """Contiguous per-level accumulators plus the estimation-round index."""

    accumulators: tuple[LevelAccumulator, ...] = ()
    round_index: int = 0

    def __post_init__(self):
        for expect, acc in enumerate(self.accumulators):
            if acc.level != expect:
                raise StatsError("levels must be contiguous from 0")

    @property
    def max_level(self) -> int:
        return len(self.accumulators) - 1

    @property
    def counts(self) -> list[int]:
        return [a.count for a in self.accumulators]

    def level(self, ell: int) -> LevelAccumulator:
        return self.accumulators[ell]

    def q_hat(self) -> float:
        """Telescoped estimate: sum of the per-level Y means."""
        return sum(a.mean_y for a in self.accumulators)

    def to_json_dict(self) -> dict:
        return {
            "round_index": self.round_index,
            "accumulators": [a.to_json_dict() for a in self.accumulators],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "MlmcDataset":
        accs = tuple(LevelAccumulator.from_json_dict(a)
                     for a in d["accumulators"])
        return cls(accumulators=accs, round_index=int(d["round_index"]))


def empty_dataset(n_levels: int) -> MlmcDataset:
    return MlmcDataset(tuple(LevelAccumulator(level=ell)
                             for ell in range(n_levels)))


def merge_datasets(old: MlmcDataset, delta: MlmcDataset) -> MlmcDataset:
    """Per-level merge; the delta may extend the level range (level growth)."""
    n = max(len(old.accumulators), len(delta.accumulators))
    merged = []
    for ell in range(n):
        if ell >= len(old.accumulators):
            merged.append(delta.accumulators[ell])
        elif ell >= len(delta.accumulators):
            merged.append(old.accumulators[ell])
        else:
            merged.append(merge(old.accumulators[ell], delta.accumulators[ell]))
    return MlmcDataset(tuple(merged), round_index=old.round_index + 1)
