"""Order-preserving map over worker processes."""

import os
from concurrent.futures import ProcessPoolExecutor

THREADS_ENV = "SQUIDJPA_THREADS"


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def pmap(fn, items, workers=None):
    """``list(map(fn, items))``, fanned out when ``workers > 1``.

    Results come back in input order, so reductions are independent of the
    worker count.
    """
    items = list(items)
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))
