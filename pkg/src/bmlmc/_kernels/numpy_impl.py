"""Pure numpy/scipy implementations of the hot kernels.

Fallback path used when numba is unavailable or when BMLMC_KERNELS=numpy.
Same signatures as numba_impl; results agree up to floating-point
reassociation (the chunk statistics use a two-pass batch formula instead
of the per-sample recurrence).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..seeding import _finalize_array, _U_GOLDEN

NAME = "numpy"

_TWO53 = 1.0 / 2**53


def _normal_matrix(seeds: np.ndarray, n_components: int) -> np.ndarray:
    """(len(seeds), n_components) standard normals, stream-position keyed."""
    idx = np.arange(n_components, dtype=np.uint64)
    base = seeds[:, None] + (np.uint64(2) * idx + np.uint64(1))[None, :] * _U_GOLDEN
    w1 = _finalize_array(base)
    w2 = _finalize_array(base + _U_GOLDEN)
    u1 = ((w1 >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO53
    u2 = (w2 >> np.uint64(11)).astype(np.float64) * _TWO53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def synthetic_chunk(seeds, level, h0, q_bar, c_alpha, alpha, c_beta, beta, v0,
                    c_gamma, gamma, jitter_sigma):
    """Evaluate a chunk of synthetic samples at one level.

    Returns (q_fine, q_coarse, cost); q_coarse is zero at level 0.
    """
    xi = _normal_matrix(seeds, level + 2)
    h = h0 * 0.5 ** np.arange(level + 1)
    q = q_bar + c_alpha * h[level] ** alpha + np.sqrt(v0) * xi[:, 0]
    for i in range(1, level + 1):
        q = q + np.sqrt(c_beta * h[i] ** beta) * xi[:, i]
    if level == 0:
        qc = np.zeros_like(q)
    else:
        qc = (q - np.sqrt(c_beta * h[level] ** beta) * xi[:, level]
              - c_alpha * h[level] ** alpha + c_alpha * h[level - 1] ** alpha)
    base_cost = c_gamma * h[level] ** (-gamma)
    if jitter_sigma > 0.0:
        z = xi[:, level + 1]
        cost = base_cost * np.exp(jitter_sigma * z - 0.5 * jitter_sigma**2)
    else:
        cost = np.full(len(seeds), base_cost)
    return q, qc, cost


def welford_chunk(q_fine, q_coarse, cost):
    """Chunk statistics (count, mean_q, s2_q, mean_y, s2_y, mean_cost, total_cost).

    Two-pass batch formulas; equivalent to the sequential recurrence up to
    roundoff.
    """
    n = len(q_fine)
    y = q_fine - q_coarse
    mean_q = float(np.mean(q_fine))
    dq = q_fine - mean_q
    mean_y = float(np.mean(y))
    dy = y - mean_y
    return (n, mean_q, float(np.dot(dq, dq)), mean_y, float(np.dot(dy, dy)),
            float(np.mean(cost)), float(np.sum(cost)))


def _block_tridiag(lower, diag, upper):
    n, s, _ = diag.shape
    blocks = [diag]
    rows = [np.repeat(np.arange(n) * s, s * s).reshape(n, s, s)
            + np.arange(s)[None, :, None]]
    cols = [np.repeat(np.arange(n) * s, s * s).reshape(n, s, s)
            + np.arange(s)[None, None, :]]
    if n > 1:
        blocks.append(lower)
        rows.append(rows[0][1:])
        cols.append(cols[0][:-1])
        blocks.append(upper)
        rows.append(rows[0][:-1])
        cols.append(cols[0][1:])
    data = np.concatenate([b.ravel() for b in blocks])
    r = np.concatenate([b.ravel() for b in rows])
    c = np.concatenate([b.ravel() for b in cols])
    return sp.coo_matrix((data, (r, c)), shape=(n * s, n * s))


def wave_step_loop(mass, a_lower, a_diag, a_upper, tau, n_steps, src_time,
                   src_space, u0):
    """Implicit-midpoint time loop on the block-tridiagonal dG system.

    mass (n,s) holds the diagonal mass entries per cell, a_* the operator
    blocks.  src_time (n_terms, n_steps) are the time factors at the step
    midpoints, src_space (n_terms, n, s) the projected spatial profiles.
    Returns the final state (n, s) and the energy history (n_steps + 1,).
    """
    n, s = mass.shape
    half = 0.5 * tau
    a_mat = _block_tridiag(a_lower, a_diag, a_upper).tocsc()
    m_mat = sp.diags(mass.ravel()).tocsc()
    lu = splu((m_mat + half * a_mat).tocsc())
    b_mat = (m_mat - half * a_mat).tocsr()
    u = u0.ravel().copy()
    md = mass.ravel()
    n_terms = src_space.shape[0]
    src_flat = src_space.reshape(n_terms, n * s)
    energies = np.empty(n_steps + 1)
    energies[0] = 0.5 * np.dot(md * u, u)
    for step in range(n_steps):
        r = b_mat @ u
        for t in range(n_terms):
            r += (tau * src_time[t, step]) * src_flat[t]
        u = lu.solve(r)
        energies[step + 1] = 0.5 * np.dot(md * u, u)
    return u.reshape(n, s), energies
