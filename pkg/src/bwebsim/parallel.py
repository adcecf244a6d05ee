"""Replica-parallel execution.

Replicas are split into fixed-size contiguous chunks that do not depend on
the worker count, evaluated on a thread pool (the compiled kernels release
the GIL) and concatenated in replica order.  Results are therefore identical
for any number of workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 256


def map_replicas(fn, seeds: np.ndarray, workers: int = 1, chunk: int = CHUNK):
    """Apply ``fn`` to contiguous slices of ``seeds``; concatenate along axis 0.

    ``fn`` may return an array or a tuple of arrays.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    seeds = np.asarray(seeds, dtype=np.uint64)
    parts = [seeds[i : i + chunk] for i in range(0, seeds.size, chunk)] or [seeds]
    if workers == 1 or len(parts) == 1:
        results = [fn(p) for p in parts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, parts))
    if isinstance(results[0], tuple):
        return tuple(np.concatenate(cols, axis=0) for cols in zip(*results))
    return np.concatenate(results, axis=0)
