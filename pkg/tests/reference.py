"""Sequential parent DA: every worker's I step, then the P step, every iteration.

Written without the engine so that the reduction of ADDA to its parent can be
checked draw for draw.  Worker ``i`` uses stream ``i + 1`` and the P step
stream ``0``, the same assignment the engine documents.
"""

import numpy as np

from adda.distributions import rng_stream


def parent_da(kernel, iters, seed):
    manager = rng_stream(seed, 0)
    workers = [rng_stream(seed, i + 1) for i in range(kernel.k)]
    theta, blocks = kernel.init_state()
    blocks = list(blocks)
    rows = []
    for _ in range(iters):
        blocks = [kernel.i_step(i, theta, workers[i]) for i in range(kernel.k)]
        theta = kernel.p_step(blocks, manager)
        rows.append(np.asarray(kernel.functionals(theta), dtype=float))
    return np.array(rows)
