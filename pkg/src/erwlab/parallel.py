"""Replicate-parallel campaigns with per-replicate random streams.

Replicate r always draws from stream (seed, r), so results do not depend on
the thread count or the chunking.  Kernels are compiled with ``nogil`` and
run concurrently in a thread pool; chunks are reassembled in replicate order.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .rng import streams

THREADS_ENV = "ERWLAB_THREADS"


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV, "").strip()
    if env:
        n = int(env)
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer")
        return n
    return os.cpu_count() or 1


def chunks(replicates: int, chunk: int):
    return [(lo, min(lo + chunk, replicates)) for lo in range(0, replicates, chunk)]


def _concat(parts):
    first = parts[0]
    if isinstance(first, tuple):
        return tuple(np.concatenate([q[i] for q in parts]) for i in range(len(first)))
    return np.concatenate(parts)


def run_replicates(task, seed: int, replicates: int, threads: int | None = None,
                   chunk: int | None = None):
    """Evaluate ``task(gens)`` over replicate chunks and stack the results.

    ``task`` receives the list of generators for one chunk and returns an
    array (or tuple of arrays) whose first axis runs over those replicates.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    threads = default_threads() if threads is None else int(threads)
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if chunk is None:
        chunk = max(1, min(4096, -(-replicates // (4 * threads))))
    spans = chunks(replicates, chunk)

    def work(span):
        return task(streams(seed, *span))

    if threads == 1 or len(spans) == 1:
        parts = [work(s) for s in spans]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, spans))
    return _concat(parts)
