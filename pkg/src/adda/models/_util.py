"""Helpers shared by the model kernels."""

import numpy as np


def check_partition(partition, n):
    """Sorted int arrays of a disjoint cover of ``range(n)``; raises ``ValueError`` otherwise."""
    parts = [np.sort(np.asarray(p, dtype=np.int64).ravel()) for p in partition]
    if not parts:
        raise ValueError("partition must have at least one part")
    if any(p.size == 0 for p in parts):
        raise ValueError("partition parts must be nonempty")
    allidx = np.concatenate(parts)
    if allidx.size != n or not np.array_equal(np.sort(allidx), np.arange(n)):
        raise ValueError(f"partition must cover 0..{n - 1} with disjoint parts")
    return parts
