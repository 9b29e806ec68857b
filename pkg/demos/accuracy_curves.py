"""Accuracy and SE curves of asynchronous lasso chains against the parent sampler.

Runs the Bayesian lasso on simulated n = p = 50 data with k = 10 workers,
once as the parent two-block Gibbs sampler and once for each r with
epsilon = 0.1, then prints Acc and SE averaged over the coefficients.

    python3 demos/accuracy_curves.py [iters]
"""

import sys

import numpy as np

from adda.datagen import gen_lasso, partition
from adda.diagnostics import accuracy_curve, se_curve
from adda.engine import SelectionPolicy, estimated_r, run_chain
from adda.models import LassoKernel


def main(iters=5000):
    data, beta, _ = gen_lasso(50, 0)
    kern = LassoKernel(data, partition(50, 10, 0))
    parent, _ = run_chain(kern, SelectionPolicy(k=10, r=1.0), iters, 1)
    grid = [t for t in (500, 1000, 2000, 5000, 10_000, 20_000) if t <= iters]
    for j, r in enumerate((0.2, 0.5, 0.8)):
        draws, stats = run_chain(kern, SelectionPolicy(k=10, r=r, epsilon=0.1), iters, 2 + j)
        acc = accuracy_curve(draws, parent, grid)
        se = se_curve(draws, parent, grid)
        print(f"r={r}: estimated r per worker {np.round(estimated_r(stats), 3).tolist()}")
        for t, a, s in zip(grid, acc.average, se.average):
            print(f"  t={t:6d}  Acc={a:.3f}  SE={s:.4f}")
    nz = beta != 0
    print("posterior mean of the nonzero coefficients:", np.round(parent.values[iters // 5:, :50][:, nz].mean(0), 3))
    print("true values:", beta[nz])


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 5000)
