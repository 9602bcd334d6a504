"""Deterministic fan-out of indexed replicate work across processes."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional

ENV_THREADS = "ISOMATCH_THREADS"


def resolve_workers(requested: Optional[int] = None) -> int:
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get(ENV_THREADS)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, int(n))


def indexed_map(func: Callable[[int], object], count: int, workers: Optional[int] = None) -> list:
    """``[func(0), ..., func(count - 1)]``, serially or in a process pool.

    Results come back in index order regardless of completion order, so any
    reduction over them is independent of the worker count.
    """
    workers = resolve_workers(workers)
    if workers == 1 or count < 2:
        return [func(i) for i in range(count)]
    chunk = max(1, count // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, range(count), chunksize=chunk))
