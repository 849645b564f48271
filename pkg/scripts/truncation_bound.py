"""Compare the measured truncation error with the bound as T runs from 1 to R.

Reports, per T, the largest measured |g - g_T| over the probes, the largest
bound, and how often the signed single-sum form fails to bound the error.
"""

import argparse

import numpy as np

from hyquls.data import Dataset
from hyquls.kernels import KernelSpec, kernel_matrix, gram_matrix
from hyquls.qsls import (
    CompressedProblem,
    kernel_spectrum,
    project_components,
    qsls_decision_values,
    solve_compressed,
    truncated_solution,
    truncation_error_bound,
)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--probes", type=int, default=20)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    data = Dataset(rng.standard_normal((args.m, 3)), rng.choice([-1.0, 1.0], args.m))
    kernel = KernelSpec.rbf(1.0)
    spec = kernel_spectrum(gram_matrix(kernel, data))
    full = solve_compressed(CompressedProblem.build(spec, project_components(spec, data.labels), spec.rank), args.gamma)
    kx = kernel_matrix(kernel, data.features, rng.standard_normal((args.probes, 3)))

    print("   T  max|g-g_T|    max bound     signed-form failures")
    for t in range(1, spec.rank + 1):
        trunc = truncated_solution(spec, full, t)
        err = [abs(qsls_decision_values(spec, full, kx[:, j]) - qsls_decision_values(spec, trunc, kx[:, j]))
               for j in range(args.probes)]
        bound = [truncation_error_bound(spec, full.alpha_rot, kx[:, j], t) for j in range(args.probes)]
        signed = [truncation_error_bound(spec, full.alpha_rot, kx[:, j], t, form="printed") for j in range(args.probes)]
        fails = sum(e > s for e, s in zip(err, signed))
        print(f"{t:4d}  {max(err):.4e}   {max(bound):.4e}   {fails}/{args.probes}")


if __name__ == "__main__":
    main()
