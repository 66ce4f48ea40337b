"""Contour grid of the rounds needed for 99% confidence, k(n, N), at load ratio 1."""

import argparse
from pathlib import Path

import numpy as np

from sstdma.cli import FIG6_HEADER, format_csv, fig6_grid, write_atomic


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n-max", type=int, default=20)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--out", default="results/fig6.csv")
    a = p.parse_args()

    N_values = np.unique(np.logspace(1, 6, 26).round().astype(int)).tolist()
    rows = fig6_grid(range(2, a.n_max + 1), N_values, 1.0, a.alpha)
    write_atomic(Path(a.out), format_csv(FIG6_HEADER, rows))
    for n, N, _, _, k in rows:
        if N in (100, 10000, 1000000) and n in (2, 3, 5, 10, 20):
            print(f"n={n:2d} N={N:>7d} k={k:6.2f}")


if __name__ == "__main__":
    main()
