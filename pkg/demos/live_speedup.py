"""Wall-clock effect of waiting for fewer workers.

Live mode runs one thread per worker and injects lognormal delays, so a
straggler holds up a full-synchronisation iteration.  Waiting for only
ceil(r k) fresh blocks cuts the time per iteration.

    python3 demos/live_speedup.py
"""

from adda.datagen import gen_lasso, partition
from adda.engine import DelayModel, SelectionPolicy, run_chain
from adda.models import LassoKernel


def main(iters=300, tick=2e-3):
    data, _, _ = gen_lasso(50, 0)
    kern = LassoKernel(data, partition(50, 10, 0))
    delays = DelayModel("lognormal", mu=0.0, sigma=0.5)
    base = None
    for r in (1.0, 0.8, 0.5, 0.2):
        pol = SelectionPolicy(k=10, r=r, epsilon=0.0, mode="live", delays=delays, tick=tick)
        _, stats = run_chain(kern, pol, iters, 0)
        ms = 1e3 * stats.iter_times.mean()
        base = base or ms
        print(f"r={r:.1f}: {ms:6.2f} ms per iteration, speedup {base / ms:4.2f}x, "
              f"stale blocks discarded {stats.discarded}")


if __name__ == "__main__":
    main()
