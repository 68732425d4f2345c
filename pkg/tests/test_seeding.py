import numpy as np
from scipy import stats as sps

from bmlmc.seeding import (mix64, sample_seed, sample_seeds, standard_normals,
                           uniforms)


def test_mix64_is_64bit_and_stable():
    v = mix64(12345)
    assert 0 <= v < 2**64
    assert mix64(12345) == v
    assert mix64(12346) != v


def test_sample_seed_scalar_vs_vector():
    ords = np.arange(100, dtype=np.uint64)
    vec = sample_seeds(99, 3, ords)
    for i in range(100):
        assert int(vec[i]) == sample_seed(99, 3, i)


def test_sample_seed_distinct_axes():
    seen = {sample_seed(m, l, o)
            for m in (0, 1) for l in (0, 1, 2) for o in range(50)}
    assert len(seen) == 2 * 3 * 50


def test_uniform_range():
    u = uniforms(7, 0, 10000)
    assert np.all((0.0 <= u) & (u < 1.0))


def test_normals_distribution():
    z = standard_normals(1234, 100_000)
    # Kolmogorov-Smirnov against the standard normal
    stat, pvalue = sps.kstest(z, "norm")
    assert pvalue > 1e-4


def test_normals_disjoint_offsets_are_independent_draws():
    a = standard_normals(55, 100, start=0)
    b = standard_normals(55, 100, start=100)
    assert not np.allclose(a, b)
    joint = standard_normals(55, 200, start=0)
    np.testing.assert_array_equal(joint[:100], a)
    np.testing.assert_array_equal(joint[100:], b)


def test_normals_no_correlation_across_seeds():
    a = standard_normals(1, 50_000)
    b = standard_normals(2, 50_000)
    corr = np.corrcoef(a, b)[0, 1]
    assert abs(corr) < 0.02
