"""Ergodicity conditions for the fixed-Gamma mixed-effects chain.

Condition (b) ties the Wishart prior degrees of freedom s to epsilon and the
number of subjects; (c) needs epsilon to exceed a threshold set by the
sample sizes and the design.  The conditions are sufficient, not necessary:
the demo scans them, then runs an r = 0.2, epsilon = 0.1 chain anyway and
compares its estimates with the truth.

    python3 demos/lme_assumption.py
"""

import numpy as np

from adda.datagen import gen_lme, partition
from adda.engine import SelectionPolicy, run_chain
from adda.models import LmeKernel, LmePrior, check_assumption1


def main():
    data, truth = gen_lme(100, 0)
    p, q, m = data.p, data.q, data.m
    for s in (q + 2.0, q + 1.0 + m):
        prior = LmePrior(M=1.0, a=1.0, V_alpha=np.eye(p), W=np.eye(q), s=s)
        for eps in (0.1, 0.5, 0.9, 0.99, 1.0):
            rep = check_assumption1(data, prior, eps)
            print(f"s={s:5.1f} eps={eps:4.2f}: a={rep.a} b={rep.b} c={rep.c} "
                  f"min eigenvalue {rep.min_eigenvalue:+.4f}")

    kern = LmeKernel(data, partition(m, 10, 0), fix_gamma=True)
    draws, _ = run_chain(kern, SelectionPolicy(k=10, r=0.2, epsilon=0.1), 4000, 0)
    post = draws.values[1000:].mean(0)
    print("beta   estimate", np.round(post[:p], 3), "truth", truth["beta"])
    print("Sigma  diagonal", np.round([post[p], post[p + 2], post[p + 5]], 3), "truth", np.diag(truth["Sigma"]))
    print("sigma2 estimate", round(float(post[-1]), 3), "truth", truth["sigma2"])


if __name__ == "__main__":
    main()
