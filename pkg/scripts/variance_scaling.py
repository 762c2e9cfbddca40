#!/usr/bin/env python3
"""Variance of the martingale residual against the lattice spacing."""
import argparse

from kacturing.harness import test_function, variance_scaling_experiment
from kacturing.lattice import KernelSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    ap.add_argument("--sizes", default="64,256,1024")
    ap.add_argument("--ensemble", type=int, default=200)
    ap.add_argument("--seed", type=int, default=5)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()

    gauss = KernelSpec.gaussian(0.1)
    rep = variance_scaling_experiment(1.0, 1.0, 0.5, gauss, gauss, [int(n) for n in args.sizes.split(",")],
                                      args.ensemble, 1.0, test_function("cos1"), args.seed, args.threads)
    labels = {"1": "line 1", "2": "line 2", "3": "eta"}
    for key, var in rep.variance.items():
        cells = "  ".join(f"N={n}: {v:.3e}" for n, v in zip(rep.lattice_sizes, var))
        print(f"{labels[key]:>6}  {cells}  slope={rep.slope[key]:.3f}  C={rep.c_estimate[key]:.3f}  "
              f"spread={rep.c_spread[key]:.2f}  violations={rep.violations[key]}")


if __name__ == "__main__":
    main()
