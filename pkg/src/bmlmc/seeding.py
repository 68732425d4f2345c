"""Counter-based deterministic random numbers.

Every sample drawn anywhere in the engine is a pure function of
(master_seed, level, sample ordinal), so results do not depend on which
worker or in which order a sample was computed.  The generator is a
splitmix64 finalizer over a Weyl sequence; it is implemented three times
with identical integer arithmetic: scalar Python (here), vectorized numpy
(here), and inside the numba kernels.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_U_GOLDEN = np.uint64(GOLDEN)
_U_MIX1 = np.uint64(_MIX1)
_U_MIX2 = np.uint64(_MIX2)


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    z = (z + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def sample_seed(master_seed: int, level: int, ordinal: int) -> int:
    """Derive the 64-bit seed of one sample from its identity.

    The ordinal is the global per-level sample counter, so seeds are
    independent of round boundaries, schedule, and worker count.
    """
    h = mix64(master_seed & MASK64)
    h = mix64(h ^ (level & MASK64))
    h = mix64(h ^ (ordinal & MASK64))
    return h


def _finalize_array(z: np.ndarray) -> np.ndarray:
    """xor-shift/multiply finalizer (no Weyl increment)."""
    z = (z ^ (z >> np.uint64(30))) * _U_MIX1
    z = (z ^ (z >> np.uint64(27))) * _U_MIX2
    return z ^ (z >> np.uint64(31))


def _mix64_array(z: np.ndarray) -> np.ndarray:
    return _finalize_array(z + _U_GOLDEN)


def sample_seeds(master_seed: int, level: int, ordinals: np.ndarray) -> np.ndarray:
    """Vectorized sample_seed for an array of ordinals (returns uint64)."""
    h = mix64(mix64(master_seed & MASK64) ^ (level & MASK64))
    return _mix64_array(np.uint64(h) ^ ordinals.astype(np.uint64))


def hash_stream(seed: int | np.ndarray, index: np.ndarray) -> np.ndarray:
    """index-th 64-bit word of the stream keyed by seed.

    word_j = finalize(seed + (j + 1) * GOLDEN); the kernels implement the
    identical arithmetic.
    """
    idx = index.astype(np.uint64) + np.uint64(1)
    return _finalize_array(np.uint64(seed) + idx * _U_GOLDEN)


def uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """count uniforms in [0, 1) from stream positions start..start+count-1."""
    words = hash_stream(seed, np.arange(start, start + count, dtype=np.uint64))
    return (words >> np.uint64(11)).astype(np.float64) * (1.0 / 2**53)


def standard_normals(seed: int, count: int, start: int = 0) -> np.ndarray:
    """count iid standard normals via Box-Muller on the hash stream.

    Normal i consumes stream words 2i and 2i+1 (offset by start), so
    disjoint index ranges give independent draws.
    """
    idx = np.arange(start, start + count, dtype=np.uint64)
    w1 = hash_stream(seed, np.uint64(2) * idx)
    w2 = hash_stream(seed, np.uint64(2) * idx + np.uint64(1))
    # u1 in (0, 1] so the log is finite
    u1 = ((w1 >> np.uint64(11)).astype(np.float64) + 1.0) * (1.0 / 2**53)
    u2 = (w2 >> np.uint64(11)).astype(np.float64) * (1.0 / 2**53)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
