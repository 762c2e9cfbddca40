#!/usr/bin/env python3
"""Scan the Turing box and confirm the strongest rows with the nonlinear PDE."""
import argparse

import numpy as np

from kacturing.stability import confirm_turing, regime_scan, scan_box


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    ap.add_argument("--points", type=int, default=16, help="grid points per beta axis")
    ap.add_argument("--lam-points", type=int, default=20, help="grid points on the lambda axis")
    ap.add_argument("--k-max", type=int, default=30)
    ap.add_argument("--confirm", type=int, default=5, help="number of top rows to integrate")
    args = ap.parse_args()

    scales = [0.02, 0.05, 0.1, 0.2, 0.3]
    betas = np.linspace(0.5, 2.0, args.points)
    grid = scan_box(betas, betas, np.linspace(0.1, 2.0, args.lam_points), scales, scales)
    rows = [r for r in regime_scan(grid, args.k_max) if r.turing]
    print(f"{len(rows)} of {len(grid)} points are Turing-unstable")
    print(f"{'beta1':>6} {'beta2':>6} {'lambda':>7} {'s1':>5} {'s2':>5} {'g(0)':>9} {'g(k*)':>8} {'k*':>3} {'growth':>7}")
    for r in sorted(rows, key=lambda r: -r.growth_nonzero)[: args.confirm]:
        conf = confirm_turing(r.point)
        print(f"{r.beta1:6.3f} {r.beta2:6.3f} {r.lam:7.3f} {r.scale1:5.2f} {r.scale2:5.2f} "
              f"{r.growth_k0:9.4f} {r.growth_nonzero:8.4f} {r.best_k:3d} {conf.growth_factor:7.2f}")


if __name__ == "__main__":
    main()
