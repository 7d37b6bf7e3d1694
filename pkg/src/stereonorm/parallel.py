"""Row-chunk execution helper for the per-pixel estimation passes.

Every estimator processes pixels independently from read-only inputs and
writes disjoint output rows, so a frame can be split into horizontal bands
and handed to a thread pool.  Chunk workers must not share mutable state.

The chunk grid is a fixed function of the row count alone, never of the
thread count, so outputs are bit-identical no matter how many workers run
them.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

THREADS_ENV = "STEREONORM_THREADS"
CHUNK_ROWS = 96


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}")
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1")
        return n
    return os.cpu_count() or 1


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        return default_threads()
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    return int(threads)


def row_chunks(n_rows: int, chunk_rows: int = CHUNK_ROWS) -> list[tuple[int, int]]:
    bounds = list(range(0, n_rows, chunk_rows)) + [n_rows]
    return [(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]


def run_row_chunks(n_rows: int, threads: int | None,
                   work: Callable[[int, int], None]) -> None:
    """Invoke ``work(row_start, row_stop)`` over a fixed grid of row bands.

    ``threads == 1`` runs the same chunks sequentially in order, giving a
    fully deterministic reference execution path with identical output.
    """
    threads = resolve_threads(threads)
    if n_rows <= 0:
        return
    chunks = row_chunks(n_rows)
    if threads == 1 or len(chunks) == 1:
        for r0, r1 in chunks:
            work(r0, r1)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(work, r0, r1) for r0, r1 in chunks]
        for fut in futures:
            fut.result()
