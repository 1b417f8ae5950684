"""Seeded stream partitioning for Monte Carlo work.

Paths are cut into fixed-size blocks; block ``k`` always draws from the
``k``-th child of ``SeedSequence(seed)``. Results depend on ``(seed, paths)``
only, never on how many workers processed the blocks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

DEFAULT_SEED = 0x5EED
BLOCK_PATHS = 8192

T = TypeVar("T")


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("TRIAX_WORKERS", "1")))
    except ValueError:
        return 1


def block_sizes(paths: int, block: int = BLOCK_PATHS) -> list[int]:
    if paths < 1:
        raise ValueError(f"paths must be >= 1, got {paths}")
    n_full, rest = divmod(paths, block)
    return [block] * n_full + ([rest] if rest else [])


def generators(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(ss)) for ss in np.random.SeedSequence(seed).spawn(n)]


def map_blocks(
    fn: Callable[[np.random.Generator, int], T],
    seed: int,
    paths: int,
    workers: int | None = None,
    block: int = BLOCK_PATHS,
) -> list[T]:
    """Run ``fn(rng, size)`` on every block; results come back in stream order."""
    sizes = block_sizes(paths, block)
    rngs = generators(seed, len(sizes))
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(sizes) == 1:
        return [fn(r, n) for r, n in zip(rngs, sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, rngs, sizes))


def merge_mean(sums: list[np.ndarray], sumsqs: list[np.ndarray], counts: list[int]):
    """Mean and standard error from per-block sums, combined in block order.

    Works elementwise on arrays of equal shape; uses compensated summation so
    the result is independent of floating accumulation order inside a block set.
    """
    n = sum(counts)
    s = np.array([math.fsum(v) for v in zip(*[np.ravel(x) for x in sums])]).reshape(np.shape(sums[0]))
    q = np.array([math.fsum(v) for v in zip(*[np.ravel(x) for x in sumsqs])]).reshape(np.shape(sums[0]))
    mean = s / n
    if n > 1:
        var = np.maximum(q - n * mean * mean, 0.0) / (n - 1)
    else:
        var = np.zeros_like(mean)
    return mean, np.sqrt(var / n)


def derive(seed: int, tag: int) -> int:
    """Independent 63-bit seed for an auxiliary stream, keyed by ``(seed, tag)``."""
    state = np.random.SeedSequence((int(seed), int(tag))).generate_state(2, np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])
