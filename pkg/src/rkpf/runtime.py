"""Parallelism helpers. RKPF_THREADS caps worker threads (default 1)."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import ConfigError


def thread_count() -> int:
    raw = os.environ.get("RKPF_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"RKPF_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def parallel_map(fn, items) -> list:
    """Order-preserving map, threaded when RKPF_THREADS > 1.

    Results are schedule-independent as long as fn is pure, so callers must
    not rely on shared mutable state.
    """
    items = list(items)
    workers = min(thread_count(), len(items)) if items else 1
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
