import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bmlmc.stats import (LevelAccumulator, MlmcDataset, StatsError,
                         UndefinedVarianceError, accumulate, empty_dataset,
                         merge, merge_datasets, merge_tree, sample_variance,
                         sample_variance_q)
from conftest import acc_from_samples, batch_stats


def test_first_sample():
    acc = accumulate(LevelAccumulator(level=0), 3.0, 0.0, 1.0)
    assert acc.count == 1
    assert acc.mean_q == 3.0
    assert acc.s2_q == 0.0
    assert acc.mean_y == 3.0
    assert acc.mean_cost == 1.0


def test_second_sample_matches_batch_formula():
    acc = accumulate(LevelAccumulator(level=0), 1.0, 0.0, 1.0)
    acc = accumulate(acc, 3.0, 0.0, 1.0)
    assert acc.count == 2
    assert acc.mean_q == 2.0
    assert acc.s2_q == 2.0  # sum (x - 2)^2 over {1, 3}


def test_four_samples():
    acc = acc_from_samples([1.0, 2.0, 3.0, 4.0])
    assert acc.mean_q == pytest.approx(2.5, rel=1e-15)
    assert acc.s2_q == pytest.approx(5.0, rel=1e-14)
    assert sample_variance_q(acc) == pytest.approx(5.0 / 3.0, rel=1e-14)


def test_level0_requires_zero_coarse():
    with pytest.raises(StatsError):
        accumulate(LevelAccumulator(level=0), 1.0, 0.5, 1.0)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_nonfinite_rejected(bad):
    with pytest.raises(StatsError):
        accumulate(LevelAccumulator(level=1), bad, 0.0, 1.0)
    with pytest.raises(StatsError):
        accumulate(LevelAccumulator(level=1), 1.0, 0.0, bad)


def test_negative_cost_rejected():
    with pytest.raises(StatsError):
        accumulate(LevelAccumulator(level=0), 1.0, 0.0, -1.0)


def test_merge_identity_is_exact():
    acc = acc_from_samples([1.0, 2.0])
    empty = LevelAccumulator(level=0)
    assert merge(acc, empty) == acc
    assert merge(empty, acc) == acc


def test_merge_matches_batch():
    a = acc_from_samples([1.0, 2.0])
    b = acc_from_samples([3.0, 4.0])
    m = merge(a, b)
    assert m.count == 4
    assert m.mean_q == pytest.approx(2.5, rel=1e-15)
    assert m.s2_q == pytest.approx(5.0, rel=1e-14)


def test_merge_commutes():
    a = acc_from_samples([1.0, 5.0, -2.0], cost=[1.0, 2.0, 3.0])
    b = acc_from_samples([4.0, 0.5], cost=[5.0, 1.0])
    ab, ba = merge(a, b), merge(b, a)
    for name in ("count", "mean_q", "s2_q", "mean_y", "s2_y", "mean_cost",
                 "total_cost"):
        x, y = getattr(ab, name), getattr(ba, name)
        assert x == pytest.approx(y, rel=1e-12)


def test_merge_level_mismatch():
    with pytest.raises(StatsError):
        merge(LevelAccumulator(level=0), LevelAccumulator(level=1))


def test_sample_variance_needs_two():
    acc = accumulate(LevelAccumulator(level=0), 1.0, 0.0, 1.0)
    with pytest.raises(UndefinedVarianceError):
        sample_variance(acc)


def test_sample_variance_examples():
    assert sample_variance(acc_from_samples([1.0, 3.0])) == 2.0
    assert sample_variance(acc_from_samples([4.0, 4.0, 4.0])) == 0.0
    acc = acc_from_samples([1.0, 2.0, 3.0, 4.0])
    assert sample_variance(acc) == pytest.approx(5.0 / 3.0, rel=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(min_value=-1e6, max_value=1e6,
                          allow_nan=False, allow_infinity=False),
                min_size=2, max_size=60),
       st.integers(min_value=1, max_value=59),
       st.randoms())
def test_merge_batch_equivalence_property(values, cut, rnd):
    cut = min(cut, len(values) - 1)
    a = acc_from_samples(values[:cut])
    b = acc_from_samples(values[cut:])
    m = merge(a, b)
    mean, s2 = batch_stats(np.array(values))
    scale_m = max(abs(mean), 1e-9)
    scale_s = max(abs(s2), 1e-6)
    assert abs(m.mean_q - mean) <= 1e-12 * scale_m + 1e-15
    assert abs(m.s2_q - s2) <= 1e-10 * scale_s + 1e-9
    assert m.count == len(values)


def test_merge_tree_associativity(rng):
    values = rng.normal(size=1000) * np.exp(rng.uniform(-3, 6, size=1000))
    groups = np.array_split(values, 17)
    accs = [acc_from_samples(g) for g in groups]
    t1 = merge_tree(accs)
    t2 = accs[0]
    for acc in accs[1:]:
        t2 = merge(t2, acc)
    assert t1.count == t2.count == 1000
    assert t1.mean_q == pytest.approx(t2.mean_q, rel=1e-12)
    assert t1.s2_q == pytest.approx(t2.s2_q, rel=1e-10)


def test_serialization_roundtrip_bitwise():
    acc = acc_from_samples([1.1, -2.7, 3.1415926535, 1e-13],
                           cost=[0.1, 0.2, 0.3, 0.4])
    blob = json.dumps(acc.to_json_dict())
    back = LevelAccumulator.from_json_dict(json.loads(blob))
    assert back == acc


def test_dataset_roundtrip_and_merge():
    ds = MlmcDataset((acc_from_samples([1.0, 2.0], level=0),
                      acc_from_samples([0.1, 0.2], qc=[0.0, 0.1], level=1)),
                     round_index=3)
    back = MlmcDataset.from_json_dict(json.loads(json.dumps(ds.to_json_dict())))
    assert back == ds


def test_merge_datasets_empty_identity():
    d = MlmcDataset((acc_from_samples([1.0, 2.0], level=0),))
    merged = merge_datasets(empty_dataset(1), d)
    assert merged.accumulators == d.accumulators
    assert merged.round_index == 1


def test_merge_datasets_extends_levels():
    base = MlmcDataset((acc_from_samples([1.0, 2.0], level=0),))
    delta = MlmcDataset((LevelAccumulator(level=0),
                         acc_from_samples([0.5], qc=[0.2], level=1)))
    merged = merge_datasets(base, delta)
    assert merged.max_level == 1
    assert merged.level(0).count == 2
    assert merged.level(1).count == 1


def test_dataset_rejects_gaps():
    with pytest.raises(StatsError):
        MlmcDataset((LevelAccumulator(level=1),))


def test_counts_exactly_additive(rng):
    parts = [acc_from_samples(rng.normal(size=n)) for n in (3, 17, 29, 1)]
    assert merge_tree(parts).count == 50


def test_q_hat_telescopes():
    ds = MlmcDataset((acc_from_samples([2.0, 4.0], level=0),
                      acc_from_samples([1.0, 1.5], qc=[0.75, 1.25], level=1)))
    assert ds.q_hat() == pytest.approx(3.0 + 0.25, rel=1e-15)


def test_three_round_merge_association_orders(rng):
    rounds = [rng.normal(size=n) * 10.0 ** rng.uniform(-2, 4, size=n)
              for n in (37, 119, 53)]
    accs = [acc_from_samples(r) for r in rounds]
    left = merge(merge(accs[0], accs[1]), accs[2])
    right = merge(accs[0], merge(accs[1], accs[2]))
    assert left.count == right.count
    assert left.mean_q == pytest.approx(right.mean_q, rel=1e-10)
    assert left.s2_q == pytest.approx(right.s2_q, rel=1e-10)
