"""Order-preserving map over worker processes."""

import os
from concurrent.futures import ProcessPoolExecutor


def resolve_threads(threads=None):
    env = os.environ.get("MOREAULAB_THREADS")
    if env:
        return max(1, int(env))
    return max(1, int(threads or 1))


def parallel_map(fn, items, threads=1):
    """``[fn(i) for i in items]``, possibly across processes; results keep input order."""
    items = list(items)
    threads = resolve_threads(threads)
    if threads == 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))
