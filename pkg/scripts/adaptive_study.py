#!/usr/bin/env python3
"""Adaptive-vs-oracle study: selection-rule risk against every single
bandwidth on its grid.

For each replication the selection trace already contains the fit at
every grid bandwidth, so the adaptive risk and all single-bandwidth
risks come from the same fits.  Prints the risk table, the ratio to the
best bandwidth, and the logarithmic inflation the theory allows.
"""

import argparse
import math

import numpy as np

from roblp.contrast import curvature_constant, huber
from roblp.harness import Estimator
from roblp.simulate import NOISE_FAMILIES, NoiseModel, gen_data, sinusoid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=4096)
    ap.add_argument("--degree", type=int, default=3)
    ap.add_argument("--replications", type=int, default=200)
    ap.add_argument("--seed", type=int, default=20240810)
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--scale", type=float, default=0.5)
    args = ap.parse_args()

    f = sinusoid(beta=2.0)
    model = NoiseModel(family="gaussian", base_scale=args.scale)
    c = curvature_constant(NOISE_FAMILIES["gaussian"], args.gamma, model.sigma_min)
    est = Estimator(
        kind="adaptive",
        contrast=huber(args.gamma),
        kernel_kind="uniform",
        bound=8.0,
        degree=args.degree,
        curvature=c,
        risk_power=2.0,
    )
    x0 = (0.25,)
    target = float(f(np.array(x0)))

    adaptive_errs, per_k, chosen = [], [], []
    bandwidths = None
    for rep in range(args.replications):
        data = gen_data(f, model, args.n, 1, (args.seed, rep))
        trace = est.selection_trace(data, x0)
        bandwidths = [h for _, h, _ in trace.estimates]
        adaptive_errs.append((trace.selected - target) ** 2)
        per_k.append([(e - target) ** 2 for _, _, e in trace.estimates])
        chosen.append(trace.chosen_k)

    adaptive_risk = float(np.mean(adaptive_errs))
    single = np.mean(np.asarray(per_k), axis=0)
    print(f"curvature constant c = {c:.6f}")
    print(f"{'k':>3} {'h':>10} {'risk':>12} {'chosen%':>8}")
    for k, (h, risk) in enumerate(zip(bandwidths, single)):
        share = 100.0 * np.mean(np.asarray(chosen) == k)
        print(f"{k:>3} {h:>10.5f} {risk:>12.6f} {share:>7.1f}%")
    ratio = adaptive_risk / single.min()
    ln_factor = math.log(args.n) ** (2.0 / 5.0)
    print(f"adaptive risk {adaptive_risk:.6f}, best single {single.min():.6f}")
    print(f"ratio {ratio:.3f} (logarithmic allowance ~{ln_factor:.2f})")


if __name__ == "__main__":
    main()
