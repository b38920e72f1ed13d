"""phi(t) along the interpolation path, with its endpoint oracles.

    python scripts/interpolation_grid.py --beta2-sq 0.36 --N 8 --m 0.3 0.7 --q 0.2 0.6
"""

import argparse

import numpy as np

from parisilab.bounds import guerra_phi_grid
from parisilab.model import MixtureSpec
from parisilab.parisi import RSBParams, evaluate_X0, evaluate_parisi
from parisilab.simulator import free_energy_mc


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--beta2-sq", type=float, default=0.36)
    ap.add_argument("--N", type=int, default=8)
    ap.add_argument("--m", nargs="+", type=float, default=[0.3, 0.7])
    ap.add_argument("--q", nargs="+", type=float, default=[0.2, 0.6])
    ap.add_argument("--n-samples", type=int, default=400)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    spec = MixtureSpec.from_squares({2: args.beta2_sq})
    params = RSBParams(tuple(args.m), tuple(args.q))
    ts = np.linspace(0, 1, 9)
    for p in guerra_phi_grid(args.N, spec, params, ts, n_samples=args.n_samples, seed=args.seed):
        print(f"t={p.t:.3f} phi={p.mean:.6f} +- {p.stderr:.6f}")
    fe = free_energy_mc(args.N, spec, args.n_samples, pert=True, seed=args.seed)
    print(f"F_N (pert on) = {fe.mean:.6f} +- {fe.stderr:.6f}")
    print(f"X0 = {evaluate_X0(spec, params):.6f}   P = {evaluate_parisi(spec, params):.6f}")


if __name__ == "__main__":
    main()
