"""numba @njit implementations of the hot kernels.

Selected by default when numba imports; see package __init__ for the
BMLMC_KERNELS switch.  All kernels release the GIL so the thread-pool
executor can scale.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NAME = "numba"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO53 = 1.0 / 2**53


@njit(cache=True, nogil=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True, inline="always")
def _normal(seed, i):
    # normal i consumes stream words 2i and 2i+1
    w1 = _mix64(seed + (np.uint64(2 * i) + np.uint64(1)) * _GOLDEN)
    w2 = _mix64(seed + (np.uint64(2 * i) + np.uint64(2)) * _GOLDEN)
    u1 = (np.float64(w1 >> np.uint64(11)) + 1.0) * _TWO53
    u2 = np.float64(w2 >> np.uint64(11)) * _TWO53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@njit(cache=True, nogil=True)
def synthetic_chunk(seeds, level, h0, q_bar, c_alpha, alpha, c_beta, beta, v0,
                    c_gamma, gamma, jitter_sigma):
    n = len(seeds)
    qf = np.empty(n)
    qc = np.empty(n)
    cost = np.empty(n)
    h_fine = h0 * 0.5**level
    base_cost = c_gamma * h_fine ** (-gamma)
    sqrt_v0 = np.sqrt(v0)
    for m in range(n):
        s = seeds[m]
        q = q_bar + c_alpha * h_fine**alpha + sqrt_v0 * _normal(s, 0)
        for i in range(1, level + 1):
            h_i = h0 * 0.5**i
            q += np.sqrt(c_beta * h_i**beta) * _normal(s, i)
        qf[m] = q
        if level == 0:
            qc[m] = 0.0
        else:
            h_c = h0 * 0.5 ** (level - 1)
            qc[m] = (q - np.sqrt(c_beta * h_fine**beta) * _normal(s, level)
                     - c_alpha * h_fine**alpha + c_alpha * h_c**alpha)
        if jitter_sigma > 0.0:
            z = _normal(s, level + 1)
            cost[m] = base_cost * np.exp(jitter_sigma * z - 0.5 * jitter_sigma**2)
        else:
            cost[m] = base_cost
    return qf, qc, cost


@njit(cache=True, nogil=True)
def welford_chunk(q_fine, q_coarse, cost):
    n = len(q_fine)
    mean_q = 0.0
    s2_q = 0.0
    mean_y = 0.0
    s2_y = 0.0
    mean_c = 0.0
    total_c = 0.0
    for m in range(n):
        k = m + 1
        dq = q_fine[m] - mean_q
        mean_q += dq / k
        s2_q += dq * (q_fine[m] - mean_q)
        y = q_fine[m] - q_coarse[m]
        dy = y - mean_y
        mean_y += dy / k
        s2_y += dy * (y - mean_y)
        mean_c += (cost[m] - mean_c) / k
        total_c += cost[m]
    return (n, mean_q, s2_q, mean_y, s2_y, mean_c, total_c)


@njit(cache=True, nogil=True)
def wave_step_loop(mass, a_lower, a_diag, a_upper, tau, n_steps, src_time,
                   src_space, u0):
    n, s = mass.shape
    half = 0.5 * tau
    # system blocks: S = M + tau/2 A (solved), B = M - tau/2 A (applied)
    s_diag = half * a_diag.copy()
    b_diag = -half * a_diag.copy()
    for i in range(n):
        for a in range(s):
            s_diag[i, a, a] += mass[i, a]
            b_diag[i, a, a] += mass[i, a]
    s_low = half * a_lower
    s_up = half * a_upper
    # block-Thomas factorization, inverses stored (blocks well conditioned)
    g = np.empty((n, s, s))
    c = np.empty((max(n - 1, 1), s, s))
    g[0] = np.linalg.inv(s_diag[0])
    for i in range(1, n):
        c[i - 1] = s_low[i - 1] @ g[i - 1]
        g[i] = np.linalg.inv(s_diag[i] - c[i - 1] @ s_up[i - 1])

    n_terms = src_space.shape[0]
    u = u0.copy()
    r = np.empty((n, s))
    y = np.empty((n, s))
    energies = np.empty(n_steps + 1)
    e0 = 0.0
    for i in range(n):
        for a in range(s):
            e0 += mass[i, a] * u[i, a] * u[i, a]
    energies[0] = 0.5 * e0

    for step in range(n_steps):
        # r = B u + tau * b(t_mid)
        for i in range(n):
            for a in range(s):
                acc = 0.0
                for b in range(s):
                    acc += b_diag[i, a, b] * u[i, b]
                if i > 0:
                    for b in range(s):
                        acc -= half * a_lower[i - 1, a, b] * u[i - 1, b]
                if i < n - 1:
                    for b in range(s):
                        acc -= half * a_upper[i, a, b] * u[i + 1, b]
                for t in range(n_terms):
                    acc += tau * src_time[t, step] * src_space[t, i, a]
                r[i, a] = acc
        # forward sweep
        for a in range(s):
            y[0, a] = r[0, a]
        for i in range(1, n):
            for a in range(s):
                acc = r[i, a]
                for b in range(s):
                    acc -= c[i - 1, a, b] * y[i - 1, b]
                y[i, a] = acc
        # back substitution
        for a in range(s):
            acc = 0.0
            for b in range(s):
                acc += g[n - 1, a, b] * y[n - 1, b]
            u[n - 1, a] = acc
        for i in range(n - 2, -1, -1):
            for a in range(s):
                acc = y[i, a]
                for b in range(s):
                    acc -= s_up[i, a, b] * u[i + 1, b]
                y[i, a] = acc
            for a in range(s):
                acc = 0.0
                for b in range(s):
                    acc += g[i, a, b] * y[i, b]
                u[i, a] = acc
        e = 0.0
        for i in range(n):
            for a in range(s):
                e += mass[i, a] * u[i, a] * u[i, a]
        energies[step + 1] = 0.5 * e
    return u, energies
