"""Measure the convergence rate of the first-order product formula for exp(i M_s t).

Prints error(n) and the ratio error(2n)/error(n) for several random instances.
"""

import argparse

import numpy as np

from hyquls.cv_inversion import trotter_product_error
from hyquls.kernels import KernelSpec, gram_matrix


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--t", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--steps", type=int, nargs="+", default=[8, 16, 32, 64])
    args = p.parse_args()

    print("seed  steps  error         ratio")
    for seed in range(args.seeds):
        x = np.random.default_rng(seed).standard_normal((args.m, 2))
        g = gram_matrix(KernelSpec.rbf(1.0), x)
        prev = None
        for n in args.steps:
            err = trotter_product_error(g, args.gamma, args.t, n)
            ratio = "" if prev is None else f"{err / prev:.5f}"
            print(f"{seed:4d}  {n:5d}  {err:.6e}  {ratio}")
            prev = err


if __name__ == "__main__":
    main()
