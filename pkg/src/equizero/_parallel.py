"""Order-preserving parallel map; results never depend on the worker count."""

import os
from concurrent.futures import ThreadPoolExecutor

_workers_override = None


def worker_count() -> int:
    if _workers_override is not None:
        return _workers_override
    env = os.environ.get("EQUIZERO_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def set_workers(n):
    global _workers_override
    _workers_override = None if n is None else max(1, int(n))


def pmap(fn, items, workers=None):
    items = list(items)
    workers = workers or worker_count()
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
