"""Cascade Monte Carlo against nested quadrature on random (k, m, q) points.

    python scripts/rpc_crosscheck.py --points 25 --M 512 --n-samples 10000
"""

import argparse

import numpy as np

from parisilab.model import MixtureSpec
from parisilab.parisi import RSBParams, evaluate_X0
from parisilab.rpc import evaluate_X0_rpc


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--points", type=int, default=25)
    ap.add_argument("--M", type=int, default=512)
    ap.add_argument("--n-samples", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    zs = []
    for i in range(args.points):
        k = int(rng.integers(1, 4))
        params = RSBParams(tuple(np.sort(rng.uniform(0.05, 0.95, k))), tuple(np.sort(rng.uniform(0, 1, k))))
        spec = MixtureSpec.from_squares({p: float(rng.uniform(0, 0.6)) for p in (1, 2, 3)})
        exact = evaluate_X0(spec, params)
        est = evaluate_X0_rpc(spec, params, args.M, args.n_samples, seed=i)
        zs.append((est.mean - exact) / est.stderr)
        print(f"k={k} m={np.round(params.m, 3)} q={np.round(params.q, 3)} quad={exact:.6f} "
              f"rpc={est.mean:.6f}+-{est.stderr:.6f} z={zs[-1]:+.2f}", flush=True)
    print(f"max |z| = {np.max(np.abs(zs)):.2f}")


if __name__ == "__main__":
    main()
