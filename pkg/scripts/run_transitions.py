"""Measured relative-state transition frequencies on complete graphs K_m.

Prints Ready->Allocated (q) and Obtaining->Allocated (w) frequencies, with
standard errors, for each m.
"""

import argparse
import math

from sstdma.protocol import FrameConfig, RelativeState
from sstdma.simulator import make_world, run_until_safe
from sstdma.topology import complete_graph

READY, OBTAINING, ALLOCATED = RelativeState.READY, RelativeState.OBTAINING, RelativeState.ALLOCATED


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("-m", type=int, nargs="+", default=[3, 4, 5, 6])
    p.add_argument("-n", type=int, default=2)
    p.add_argument("--samples", type=int, default=10_000)
    a = p.parse_args()

    print("m,T,n,q,q_se,w,w_se,runs")
    for m in a.m:
        cfg = FrameConfig(T=m + 1, n=a.n)
        counts = {READY: [0, 0], OBTAINING: [0, 0]}
        seed = 0
        while counts[OBTAINING][0] < a.samples:
            res = run_until_safe(make_world(complete_graph(m), cfg, seed), 500, keep_traces=True)
            for tr in res.traces:
                for b, after in zip(tr.relative_before, tr.relative_after):
                    if b in counts:
                        counts[b][0] += 1
                        counts[b][1] += after is ALLOCATED
            seed += 1
        (rn, rk), (on, ok) = counts[READY], counts[OBTAINING]
        q, w = rk / rn, ok / on
        print(f"{m},{m + 1},{a.n},{q:.4f},{math.sqrt(q * (1 - q) / rn):.4f},"
              f"{w:.4f},{math.sqrt(w * (1 - w) / on):.4f},{seed}")


if __name__ == "__main__":
    main()
