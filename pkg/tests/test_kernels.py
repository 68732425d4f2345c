"""Cross-backend equivalence of the numba and numpy kernel paths."""

import numpy as np
import pytest

from bmlmc import _kernels
from bmlmc.models.wave1d import assemble_blocks, project_profile, ricker
from bmlmc.seeding import sample_seeds


@pytest.fixture
def both_backends():
    available = ["numpy"]
    try:
        _kernels._load("numba")
        available.append("numba")
    except ImportError:
        pass
    if len(available) < 2:
        pytest.skip("numba not available")
    prev = _kernels.backend_name()
    yield available
    _kernels.set_backend(prev)


def run_on(backend, fn, *args):
    _kernels.set_backend(backend)
    return fn(*args)


def test_synthetic_chunk_agrees(both_backends):
    seeds = sample_seeds(42, 3, np.arange(4096, dtype=np.uint64))
    args = (seeds, 3, 0.5, 1.0, 1.0, 2.0, 1.0, 4.0, 1.0, 1.0, 3.0, 0.25)
    out = [run_on(b, _kernels.synthetic_chunk, *args) for b in both_backends]
    for a, b in zip(out[0], out[1]):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_welford_chunk_agrees(both_backends, rng):
    qf = rng.normal(size=5000) * 1e3
    qc = rng.normal(size=5000)
    cost = rng.random(5000) + 0.1
    out = [run_on(b, _kernels.welford_chunk, qf, qc, cost)
           for b in both_backends]
    assert out[0][0] == out[1][0]
    for a, b in zip(out[0][1:], out[1][1:]):
        assert a == pytest.approx(b, rel=1e-12)


@pytest.mark.parametrize("degree", [0, 1, 2])
def test_wave_step_loop_agrees(both_backends, rng, degree):
    n = 64
    h = 1.0 / n
    rho = np.exp(rng.normal(size=n))
    blocks = assemble_blocks(rho, 1.0, h, degree)
    tau = h / 8
    steps = 256
    t_mid = (np.arange(steps) + 0.5) * tau
    g1 = ricker(t_mid, np.pi / 10, 10.0)
    space = project_profile(lambda x: np.exp(-((x - 0.5) ** 2) / 0.01), n, h,
                            degree, "p")
    src_time = np.ascontiguousarray(g1[None, :])
    src_space = np.ascontiguousarray(space[None])
    u0 = np.zeros((n, 2 * (degree + 1)))
    out = [run_on(b, _kernels.wave_step_loop, blocks[0], blocks[1], blocks[2],
                  blocks[3], tau, steps, src_time, src_space, u0)
           for b in both_backends]
    scale = np.abs(out[0][0]).max()
    np.testing.assert_allclose(out[0][0], out[1][0], rtol=0, atol=1e-11 * scale)
    np.testing.assert_allclose(out[0][1], out[1][1], rtol=1e-10)


def test_env_selection(monkeypatch):
    import importlib

    monkeypatch.setenv("BMLMC_KERNELS", "numpy")
    import bmlmc._kernels as mod
    importlib.reload(mod)
    assert mod.backend_name() == "numpy"
    monkeypatch.setenv("BMLMC_KERNELS", "nonsense")
    importlib.reload(mod)
    with pytest.raises(ValueError):
        mod.backend_name()
    monkeypatch.delenv("BMLMC_KERNELS")
    importlib.reload(mod)
    assert mod.backend_name() in ("numba", "numpy")


def test_set_backend_returns_previous():
    prev = _kernels.backend_name()
    old = _kernels.set_backend("numpy")
    assert old == prev
    _kernels.set_backend(prev)
