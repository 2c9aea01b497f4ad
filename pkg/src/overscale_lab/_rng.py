"""Counter-based pseudo-random primitives shared by every stochastic code path.

All Monte-Carlo subset sampling and synthetic trace generation derive their
randomness from splitmix64 evaluated at explicit counters, keyed by
(seed, question_id, budget).  Because the value at counter i never depends on
the value at counter i-1 having been produced, work can be chunked, threaded,
or re-ordered freely and still reproduce the same stream bit for bit.  The
numba and numpy kernel backends evaluate the identical function, so they are
interchangeable without changing any output byte.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
SM64_GAMMA = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53


def splitmix64(z: int) -> int:
    """Finalizer of the splitmix64 generator on a plain Python integer."""
    z = (z + SM64_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def fnv1a64(data: str) -> int:
    """FNV-1a hash of a UTF-8 string, used to fold question ids into keys."""
    h = 0xCBF29CE484222325
    for byte in data.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & MASK64
    return h


def derive_key(seed: int, question_id: str, budget: int) -> int:
    """Stream key for one (dataset seed, question, budget) sampling task."""
    k = splitmix64((seed & MASK64) ^ fnv1a64(question_id))
    return splitmix64(k ^ (budget & MASK64))


def counter_uniform(key: int, counter: int) -> float:
    """Uniform in [0, 1) at an absolute counter position of the keyed stream."""
    x = splitmix64((key + counter) & MASK64)
    return (x >> 11) * _INV_2_53


def counter_uniform_array(key: int, counters: np.ndarray) -> np.ndarray:
    """Vectorised counter_uniform; `counters` is any uint64 array."""
    z = (np.uint64(key) + counters.astype(np.uint64)) + np.uint64(SM64_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * _INV_2_53
