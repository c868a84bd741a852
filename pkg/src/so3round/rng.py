"""Deterministic random streams and chunked parallel execution.

Every estimator in the package draws from counter-based Philox streams keyed
by (seed, stream index). Work is split into fixed-size chunks, one stream per
chunk, so results are identical for any thread count and across runs.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

THREADS_ENV = "SO3ROUND_THREADS"

_MASK64 = (1 << 64) - 1


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Generator for stream `index` of the family keyed by `seed`."""
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    if index < 0:
        raise ValueError(f"stream index must be nonnegative, got {index}")
    key = np.array([seed & _MASK64, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def default_threads() -> int:
    """Thread cap: SO3ROUND_THREADS if set, else the CPU count."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        return default_threads()
    return max(1, int(threads))


def chunk_sizes(total: int, chunk: int) -> list[int]:
    """Split `total` items into chunks of at most `chunk` (fixed partition)."""
    if total < 0:
        raise ValueError("total must be nonnegative")
    full, rest = divmod(total, chunk)
    sizes = [chunk] * full
    if rest:
        sizes.append(rest)
    return sizes


def map_chunks(fn, total: int, chunk: int, threads: int | None = None) -> list:
    """Run fn(chunk_index, size) for a fixed partition of `total` items.

    Results come back ordered by chunk index regardless of the number of
    worker threads, so any order-sensitive reduction stays deterministic.
    """
    sizes = chunk_sizes(total, chunk)
    workers = min(resolve_threads(threads), max(1, len(sizes)))
    if workers <= 1:
        return [fn(i, m) for i, m in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(len(sizes)), sizes))
