"""Seeded random substreams and an order-preserving worker pool.

Every Monte-Carlo work item draws from its own generator keyed by
(seed, *item keys), so results never depend on how many workers run.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

THREADS_ENV = 'DETQUANT_THREADS'


def substream(seed, *keys) -> np.random.Generator:
    """Return the generator for work item ``keys`` under ``seed``."""
    if isinstance(seed, (list, tuple)):
        entropy = [int(s) for s in seed]
    else:
        entropy = [int(seed)]
    entropy.extend(int(k) for k in keys)
    if any(e < 0 for e in entropy):
        raise ValueError('seeds and substream keys must be nonnegative integers')
    return np.random.default_rng(entropy)


def worker_count(threads: int | None = None) -> int:
    """Resolve the worker cap: explicit argument, then env var, then 1."""
    if threads is None:
        raw = os.environ.get(THREADS_ENV, '')
        try:
            threads = int(raw) if raw else 1
        except ValueError:
            threads = 1
    return max(1, int(threads))


def ordered_map(fn, items, threads: int | None = None) -> list:
    """Apply ``fn`` to every item, returning results in input order."""
    items = list(items)
    workers = min(worker_count(threads), max(1, len(items)))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def chunk_slices(total: int, size: int) -> list:
    """Split ``range(total)`` into consecutive slices of at most ``size``."""
    size = max(1, int(size))
    return [slice(start, min(start + size, total)) for start in range(0, total, size)]
