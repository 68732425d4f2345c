#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure numpy fallback.

Times the three hot kernels (synthetic sample batches, bulk statistics
accumulation, wave time stepping) and an end-to-end budgeted run under
both backends.  Usage:

    python benchmarks/kernel_bench.py [--repeat N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from bmlmc import _kernels
from bmlmc.controller import BmlmcConfig, run
from bmlmc.models import SyntheticProblem, SyntheticSpec
from bmlmc.models.wave1d import (assemble_blocks, bump_profile,
                                 project_profile, ricker)
from bmlmc.scheduler import Scheduler, SchedulerConfig
from bmlmc.seeding import sample_seeds


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_synthetic(n: int):
    seeds = sample_seeds(42, 4, np.arange(n, dtype=np.uint64))
    args = (seeds, 4, 0.5, 1.0, 1.0, 2.0, 1.0, 4.0, 1.0, 1.0, 3.0, 0.0)
    return lambda: _kernels.synthetic_chunk(*args), f"{n} samples at level 4"


def bench_welford(n: int):
    rng = np.random.default_rng(3)
    qf = rng.normal(size=n)
    qc = 0.5 * qf
    cost = np.abs(qf) + 1.0
    return lambda: _kernels.welford_chunk(qf, qc, cost), f"{n} samples"


def bench_wave(n_cells: int, steps: int):
    rng = np.random.default_rng(5)
    degree = 1
    h = 1.0 / n_cells
    rho = np.exp(rng.normal(size=n_cells))
    blocks = [np.ascontiguousarray(b)
              for b in assemble_blocks(rho, 1.0, h, degree)]
    tau = h / 8
    t_mid = (np.arange(steps) + 0.5) * tau
    src_time = np.ascontiguousarray(
        ricker(t_mid, np.pi / 10, 10.0)[None, :])
    src_space = np.ascontiguousarray(project_profile(
        bump_profile(0.5, 0.1), n_cells, h, degree, "p")[None])
    u0 = np.zeros((n_cells, 2 * (degree + 1)))

    def step():
        _kernels.wave_step_loop(blocks[0], blocks[1], blocks[2], blocks[3],
                                tau, steps, src_time, src_space, u0)

    return step, f"{n_cells} cells x {steps} steps, dG(1)"


def bench_end_to_end(budget: float):
    model = SyntheticProblem(SyntheticSpec(alpha=2.0, beta=4.0, gamma=3.0,
                                           h0=0.5))

    def go():
        cfg = BmlmcConfig(budget=budget, init_samples=(256, 64, 16),
                          master_seed=1)
        run(cfg, model, Scheduler(SchedulerConfig(p_size=4)))

    return go, f"budgeted run, B={budget:g}"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    cases = [
        ("synthetic batch", *bench_synthetic(200_000)),
        ("welford bulk", *bench_welford(2_000_000)),
        ("wave stepper", *bench_wave(256, 2048)),
        ("end-to-end", *bench_end_to_end(3e6)),
    ]
    backends = ["numpy"]
    try:
        _kernels._load("numba")
        backends.append("numba")
    except ImportError:
        print("numba unavailable; timing the numpy path only")

    results = {}
    for backend in backends:
        _kernels.set_backend(backend)
        for name, fn, detail in cases:
            fn()  # warm up (jit compile)
            results[(name, backend)] = best_of(fn, args.repeat)

    width = max(len(c[0]) for c in cases)
    header = f"{'kernel':<{width}}  {'numpy':>10}"
    if "numba" in backends:
        header += f"  {'numba':>10}  {'speedup':>8}"
    print(header)
    for name, _, detail in cases:
        t_np = results[(name, "numpy")]
        line = f"{name:<{width}}  {t_np * 1e3:>8.2f}ms"
        if "numba" in backends:
            t_nb = results[(name, "numba")]
            line += f"  {t_nb * 1e3:>8.2f}ms  {t_np / t_nb:>7.1f}x"
        print(line + f"    ({detail})")


if __name__ == "__main__":
    main()
