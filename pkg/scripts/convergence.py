#!/usr/bin/env python3
"""Particle vs PDE discrepancy as the lattice is refined."""
import argparse

import numpy as np

from kacturing.harness import convergence_experiment
from kacturing.lattice import KernelSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    ap.add_argument("--sizes", default="128,512,2048")
    ap.add_argument("--ensemble", type=int, default=32)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()

    gauss = KernelSpec.gaussian(0.1)
    rep = convergence_experiment(lambda r: 0.4 * np.cos(2 * np.pi * r), lambda r: 0 * r, 1.0, 1.0, 0.5, gauss, gauss,
                                 [int(n) for n in args.sizes.split(",")], args.ensemble, 1.0, ["1", "cos1", "sin1"],
                                 args.seed, args.threads)
    print(f"{'N':>6} " + " ".join(f"{f:>16}" for f in rep.mean_error))
    for i, n in enumerate(rep.lattice_sizes):
        cells = [f"{rep.mean_error[f][i]:.4f}+-{rep.stderr[f][i] or float('nan'):.4f}" for f in rep.mean_error]
        print(f"{n:6d} " + " ".join(f"{c:>16}" for c in cells))
    print("slopes:", {f: round(s, 3) for f, s in rep.slope.items()}, "monotone:", rep.monotone)


if __name__ == "__main__":
    main()
