"""Replication worker pool.

Workers own replication indices and results are reduced in index order, so
campaign output is identical for any thread budget.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def pmap(fn, n: int, threads: int = 1) -> list:
    if threads <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))
