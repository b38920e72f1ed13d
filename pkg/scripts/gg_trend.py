"""Ghirlanda-Guerra statistic phi(R23, n=3, p) at two sizes over independent seed batches.

    python scripts/gg_trend.py --batches 10 --n-disorder 1500 --n-arrays 40
"""

import argparse

from parisilab.diagnostics import GGQuery, gg_statistic, simulator_overlap_arrays
from parisilab.model import MixtureSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", nargs=2, type=int, default=[6, 12])
    ap.add_argument("--batches", type=int, default=10)
    ap.add_argument("--n-disorder", type=int, default=1500)
    ap.add_argument("--n-arrays", type=int, default=40)
    args = ap.parse_args()
    spec = MixtureSpec.from_squares({2: 1.0, 3: 1.0})
    small, large = args.sizes
    wins = {1: 0, 2: 0}
    for batch in range(args.batches):
        phi = {}
        for N in args.sizes:
            R, g = simulator_overlap_arrays(N, spec, True, args.n_disorder, args.n_arrays, 4, seed=(batch, N))
            phi[N] = {p: gg_statistic(R, GGQuery.parse("R23", 3, p), g) for p in (1, 2)}
        for p in (1, 2):
            wins[p] += phi[large][p].phi < phi[small][p].phi
        print(f"batch {batch}: " + "  ".join(
            f"N={N} p={p} phi={phi[N][p].phi:.4f}+-{phi[N][p].stderr:.4f}" for N in args.sizes for p in (1, 2)),
            flush=True)
    print(f"phi(N={large}) < phi(N={small}): p=1 {wins[1]}/{args.batches}, p=2 {wins[2]}/{args.batches}")


if __name__ == "__main__":
    main()
