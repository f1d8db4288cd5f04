"""Order-preserving worker pool over trials and grid chunks.

Results are reduced by index, and every task draws from its own Philox
substream, so outputs are identical for any thread count or schedule.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["default_threads", "parallel_map"]


def default_threads():
    env = os.environ.get("BROWNLAB_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def parallel_map(fn, items, threads=None):
    """Map fn over items, preserving order; threads<=1 runs inline."""
    items = list(items)
    threads = default_threads() if threads is None else int(threads)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
