"""Swap-test shot noise: standard error vs shots and the fitted log-log slope."""

import argparse
import math

import numpy as np

from hyquls.hvq import swap_test_inner


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--overlap", type=float, default=0.3)
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--shots", type=int, nargs="+", default=[10**2, 10**3, 10**4, 10**5])
    args = p.parse_args()

    a = np.array([1.0, 0.0])
    b = np.array([args.overlap, math.sqrt(1 - args.overlap**2)])
    errs = []
    print("   shots  stderr      binomial")
    for n in args.shots:
        est = [swap_test_inner(a, b, n, seed=s) for s in range(args.seeds)]
        errs.append(np.std(est))
        print(f"{n:8d}  {errs[-1]:.4e}  {math.sqrt((1 - args.overlap**2) / n):.4e}")
    slope = np.polyfit(np.log(args.shots), np.log(errs), 1)[0]
    print(f"log-log slope: {slope:.3f}")


if __name__ == "__main__":
    main()
