"""Seed splitting.

Every random stream is ``numpy.random.SeedSequence([seed, stream, replica])``;
results never depend on worker count because each replica owns its stream.
"""
from __future__ import annotations

import numpy as np

STREAM_MAP = 1
STREAM_TREE = 2
STREAM_DECORATE = 3
STREAM_WALK = 4


def stream_rng(seed: int, stream: int = 0, replica: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), int(replica)]))


def replica_rngs(seed: int, replicas: int, stream: int = 0):
    for i in range(replicas):
        yield stream_rng(seed, stream, i)


def randbelow(rng: np.random.Generator, n: int) -> int:
    """Uniform integer in [0, n) for arbitrarily large n (rejection on raw bits)."""
    if n <= 0:
        raise ValueError("n must be positive")
    if n < 2**62:
        return int(rng.integers(0, n))
    bits = n.bit_length()
    words = (bits + 31) // 32
    while True:
        r = 0
        for w in rng.integers(0, 2**32, size=words, dtype=np.uint64):
            r = (r << 32) | int(w)
        r >>= words * 32 - bits
        if r < n:
            return r
