"""Show how the window width L and detector width eps_q damp small eigencomponents.

For a blob dataset, prints |c_k F(lambda_k) / lambda_k| per eigenvalue of the
saddle matrix, and the HVQ vs classical label agreement, for each (L, eps_q).
"""

import argparse

import numpy as np

from hyquls.cv_inversion import DetectionNoise, StepWindow
from hyquls.data import generate_blobs
from hyquls.hvq import HvqConfig, fit_hvq
from hyquls.kernels import KernelSpec
from hyquls.lssvm import decision_values, fit_lssvm, sign


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--m-per-class", type=int, default=10)
    p.add_argument("--separation", type=float, default=4.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--L", type=float, nargs="+", default=[100.0, 10.0, 3.0, 1.0, 0.3])
    p.add_argument("--eps", type=float, nargs="+", default=[0.0, 0.1, 0.5])
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    data = generate_blobs(args.m_per_class, 2, args.separation, args.seed)
    kernel = KernelSpec.rbf(1.0)
    ref = sign(decision_values(fit_lssvm(data, kernel, args.gamma), data.features))
    for eps in args.eps:
        for L in args.L:
            model = fit_hvq(data, kernel, args.gamma, HvqConfig(StepWindow(L), DetectionNoise(eps)))
            res = model.result
            order = np.argsort(np.abs(res.eigenvalues))
            mags = np.abs(res.coeffs * res.attenuations / res.eigenvalues)[order]
            agree = np.mean(sign(model.decision_values(data.features)) == ref)
            head = " ".join(f"{v:.2e}" for v in mags[:4])
            print(f"eps={eps:<4} L={L:<6} agree={agree:.3f}  smallest-|lambda| weights: {head}")


if __name__ == "__main__":
    main()
