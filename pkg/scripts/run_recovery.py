"""Re-convergence after corrupting a fraction of nodes in an already converged world."""

import argparse
import random
import statistics

from sstdma.analysis import rounds_for_confidence, tmax_cdf_bound
from sstdma.protocol import FrameConfig
from sstdma.simulator import FaultKind, inject_fault, make_world, run_until_safe
from sstdma.topology import fig4_range, generate_rgg


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("-N", type=int, default=100)
    p.add_argument("--fraction", type=float, default=0.2)
    p.add_argument("--seeds", type=int, default=50)
    p.add_argument("-T", type=int, default=15)
    a = p.parse_args()

    cfg = FrameConfig(T=a.T, n=2)
    t_max = []
    for seed in range(a.seeds):
        w = make_world(generate_rgg(a.N, fig4_range(a.N), seed), cfg, seed)
        run_until_safe(w, 200)
        inject_fault(w, FaultKind.STATE_CORRUPTION, random.Random(f"fault/{seed}"), fraction=a.fraction)
        res = run_until_safe(w, 200)
        t_max.append(res.t_max if res.converged else float("inf"))

    n_eff = round(a.fraction * a.N)
    print(f"re-converged {sum(t != float('inf') for t in t_max)}/{a.seeds}; "
          f"mean t_max {statistics.fmean(t_max):.2f}; k(0.01, {n_eff}) = {rounds_for_confidence(0.01, n_eff, 1, 2):.1f}")
    print("k,empirical_cdf,bound")
    for k in range(1, int(max(t_max)) + 2):
        emp = sum(t < k for t in t_max) / len(t_max)
        print(f"{k},{emp:.3f},{tmax_cdf_bound(k, 0.25, n_eff):.3f}")


if __name__ == "__main__":
    main()
