"""Seeded substream randomness.

Every random draw in this package derives from (seed, stream label, chunk
index), so any sample's value is a pure function of those three things and
never of worker count, scheduling, or draw order. Bulk draws are produced in
fixed-size chunks: chunk c of a stream always holds the same values, so
shards can be generated concurrently and concatenated in index order.
"""
from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

# fixed chunk size: changing it changes every stream's contents
CHUNK = 512

SEED_ENV = "HARDNET_SEED"
_MASK64 = (1 << 64) - 1


def default_seed() -> int:
    """Seed from the HARDNET_SEED environment variable, else 0."""
    raw = os.environ.get(SEED_ENV, "").strip()
    if not raw:
        return 0
    return int(raw) & _MASK64


def _label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(seed: int, label: str, index: int = 0) -> np.random.Generator:
    """Independent generator for chunk `index` of stream `label` under `seed`."""
    if index < 0:
        raise ValueError("chunk index must be nonnegative")
    entropy = [seed & _MASK64, _label_key(label), index]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def chunked(
    seed: int,
    label: str,
    count: int,
    draw: Callable[[np.random.Generator, int], np.ndarray],
    threads: int = 1,
) -> np.ndarray:
    """Concatenate draw(gen_c, n_c) over fixed-size chunks, in index order.

    draw(gen, n) must return an array whose leading axis has length n.
    The result is identical for every value of `threads`.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    if count == 0:
        return draw(substream(seed, label, 0), 0)
    n_chunks = (count + CHUNK - 1) // CHUNK
    sizes = [min(CHUNK, count - c * CHUNK) for c in range(n_chunks)]

    def one(c: int) -> np.ndarray:
        return draw(substream(seed, label, c), sizes[c])

    if threads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, range(n_chunks)))
    else:
        parts = [one(c) for c in range(n_chunks)]
    return np.concatenate(parts, axis=0)


def half_gaussian(seed: int, label: str, count: int, dim: int, threads: int = 1) -> np.ndarray:
    """(count, dim) draws from |N(0, 1)| per coordinate."""
    return chunked(seed, label, count, lambda g, n: np.abs(g.standard_normal((n, dim))), threads)


def half_uniform(seed: int, label: str, count: int, dim: int, threads: int = 1) -> np.ndarray:
    """(count, dim) draws from |U(-1, 1)| per coordinate."""
    return chunked(seed, label, count, lambda g, n: np.abs(g.uniform(-1.0, 1.0, (n, dim))), threads)


def signs(seed: int, label: str, count: int, dim: int, threads: int = 1) -> np.ndarray:
    """(count, dim) uniform draws from {-1, +1}, dtype int8."""
    return chunked(
        seed, label, count,
        lambda g, n: (2 * g.integers(0, 2, (n, dim)) - 1).astype(np.int8), threads,
    )


def bits(seed: int, label: str, count: int, dim: int, threads: int = 1) -> np.ndarray:
    """(count, dim) uniform draws from {0, 1}, dtype int8."""
    return chunked(
        seed, label, count,
        lambda g, n: g.integers(0, 2, (n, dim)).astype(np.int8), threads,
    )


def integers(seed: int, label: str, count: int, low: int, high: int, threads: int = 1) -> np.ndarray:
    """(count,) uniform integer draws from [low, high)."""
    return chunked(seed, label, count, lambda g, n: g.integers(low, high, n), threads)
