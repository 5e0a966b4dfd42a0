"""Deterministic trial distribution over worker processes.

Trials are cut into contiguous blocks, each block runs in one worker with
per-trial random substreams, and results come back in trial order.  The
output therefore does not depend on the number of workers.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "HYPVORONOI_WORKERS"


def default_workers():
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    if hasattr(os, "sched_getaffinity"):
        return max(1, len(os.sched_getaffinity(0)))
    return os.cpu_count() or 1


def _run_block(fn, args, lo, hi):
    return [fn(t, *args) for t in range(lo, hi)]


def trial_map(fn, trials, args=(), workers=None):
    """``[fn(t, *args) for t in range(trials)]``, possibly in parallel.

    ``fn`` must be a module-level function so it can be pickled.
    """
    workers = default_workers() if workers is None else max(1, int(workers))
    workers = min(workers, trials) if trials else 1
    if workers == 1:
        return _run_block(fn, args, 0, trials)
    bounds = [trials * i // (4 * workers) for i in range(4 * workers + 1)]
    out = []
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(_run_block, fn, args, lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        for f in futs:
            out.extend(f.result())
    return out
