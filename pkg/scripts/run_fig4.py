"""Empirical t_max CDF vs. the closed-form bound on random geometric graphs.

Runs the N=500 panel by default; pass ``-N 500 2500 5000`` for all three.
Writes one CSV per N plus a ``.meta.json`` with seeds and per-run results.
"""

import argparse
import json
from pathlib import Path

from sstdma.cli import FIG4_HEADER, format_csv, fig4_runs, fig4_table, write_atomic
from sstdma.topology import fig4_range


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("-N", type=int, nargs="+", default=[500])
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("-T", type=int, default=15)
    p.add_argument("-n", type=int, default=2)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--outdir", default="results")
    a = p.parse_args()

    outdir = Path(a.outdir)
    seeds = list(range(a.seeds))
    for N in a.N:
        runs = fig4_runs(N, seeds, a.T, a.n, workers=a.workers)
        rows = fig4_table(runs, N)
        path = outdir / f"fig4_N{N}.csv"
        write_atomic(path, format_csv(FIG4_HEADER, rows))
        meta = {"N": N, "T": a.T, "n": a.n, "range": fig4_range(N), "seeds": seeds, "runs": runs}
        write_atomic(str(path) + ".meta.json", json.dumps(meta, indent=2) + "\n")
        t = sorted(r["t_max"] for r in runs if r["converged"])
        print(f"N={N}: {len(t)}/{len(runs)} converged, median t_max {t[len(t) // 2]}, max {t[-1]} -> {path}")


if __name__ == "__main__":
    main()
