"""Bounded thread-pool map for embarrassingly parallel per-item work.

Results are assembled by item index, so the schedule can never change the
output; each item's computation is internally sequential numpy.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def effective_threads(threads: int = 0) -> int:
    """0 means use available parallelism."""
    if threads < 0:
        raise ValueError(f"threads must be >= 0, got {threads}")
    return threads if threads > 0 else (os.cpu_count() or 1)


def parallel_map(fn, items, threads: int = 1) -> list:
    """Map ``fn`` over ``items``, preserving order; sequential when threads <= 1."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))
