"""Reproducible random streams for blocked Monte Carlo.

Work is cut into fixed-size blocks of sample indices.  Block ``b`` of stream
``s`` always draws from the Philox generator keyed by ``(seed, s, b)``, so the
numbers a sample sees depend only on its index and never on how many worker
threads processed the blocks.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK_SIZE = 8192

_threads = 1


def set_threads(n: int) -> None:
    """Cap the number of worker threads used by :func:`map_blocks`."""
    global _threads
    _threads = max(1, int(n))


def get_threads() -> int:
    return _threads


def stream_id(*tags) -> int:
    """Stable 32-bit id for a tuple of tags (names, indices, rounded floats)."""
    text = "|".join(repr(t) for t in tags)
    return zlib.crc32(text.encode())


def generator(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for the substream ``key`` of ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def block_ranges(n: int, block_size: int = BLOCK_SIZE):
    return [(a, min(a + block_size, n)) for a in range(0, n, block_size)]


def map_blocks(fn, n: int, seed: int, stream: int, block_size: int = BLOCK_SIZE):
    """Run ``fn(rng, start, stop)`` on every block and return results in block order."""
    ranges = block_ranges(n, block_size)
    jobs = [(generator(seed, stream, b), a, z) for b, (a, z) in enumerate(ranges)]
    if _threads == 1 or len(jobs) == 1:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=_threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


class MomentAccumulator:
    """Mean and covariance of a vector of per-sample statistics.

    Each block contributes its own centered moments; blocks are merged in
    block order with the pairwise update of Chan et al., so the result does
    not depend on which thread produced which block.
    """

    def __init__(self, width: int):
        self.width = width
        self._parts: list[tuple[int, np.ndarray, np.ndarray]] = []

    def add(self, values) -> None:
        values = np.asarray(values, dtype=float).reshape(-1, self.width)
        m = values.mean(axis=0)
        c = values - m
        self._parts.append((len(values), m, c.T @ c))

    def merge(self, other: "MomentAccumulator") -> None:
        self._parts.extend(other._parts)

    @property
    def count(self) -> int:
        return sum(p[0] for p in self._parts)

    def _combined(self):
        n, mean, m2 = 0, np.zeros(self.width), np.zeros((self.width, self.width))
        for nb, mb, m2b in self._parts:
            tot = n + nb
            delta = mb - mean
            mean = mean + delta * (nb / tot)
            m2 = m2 + m2b + np.outer(delta, delta) * (n * nb / tot)
            n = tot
        return n, mean, m2

    def mean(self) -> np.ndarray:
        return self._combined()[1]

    def cov(self) -> np.ndarray:
        """Unbiased sample covariance."""
        n, _, m2 = self._combined()
        return m2 / (n - 1)
