"""Sparse LS-SVM in the eigenbasis of the kernel matrix.

Spectrum extraction (a quantum principal-component step in the hybrid
algorithm) is done by a thresholded classical eigendecomposition. Labels and
the all-ones vector are projected onto the retained eigenvectors, a T x T
system is solved classically, and test points are classified through the
projections k(x_hat) . u_i, which equal sigma_i phi(x_hat) v_i without ever
forming the right singular vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from hyquls.hvq import swap_test_inner
from hyquls.kernels import KernelSpec
from hyquls.lssvm import COND_CAP, SingularSystem, sign

RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SpectrumModel:
    eigenvalues: np.ndarray  # descending, clipped at zero
    eigenvectors: np.ndarray  # columns u_i
    rank: int
    retained: int
    tau: float

    @property
    def singular_values(self) -> np.ndarray:
        return np.sqrt(self.eigenvalues)

    @property
    def m(self) -> int:
        return self.eigenvectors.shape[0]


def canonicalize_signs(u: np.ndarray) -> np.ndarray:
    """Flip columns so that the largest-magnitude entry is positive (first index on ties)."""
    u = u.copy()
    idx = np.argmax(np.abs(u), axis=0)
    flip = u[idx, np.arange(u.shape[1])] < 0
    u[:, flip] *= -1
    return u


def kernel_spectrum(gram, tau: float = 0.0, t_max: int | None = None, rank_tol: float = RANK_TOL) -> SpectrumModel:
    """Eigendecomposition of K with rank R and retained count T.

    R counts eigenvalues above rank_tol * lambda_1; T keeps those with
    sigma_i >= tau, at most t_max and at most R.
    """
    k = np.asarray(gram, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError("Gram matrix must be square")
    if np.max(np.abs(k - k.T)) > 1e-12 * max(1.0, np.max(np.abs(k))):
        raise ValueError("Gram matrix is not symmetric")
    lam, u = np.linalg.eigh((k + k.T) / 2)
    order = np.argsort(lam)[::-1]
    lam, u = lam[order], u[:, order]
    top = max(lam[0], 0.0)
    if lam[-1] < -1e-9 * max(top, 1e-300):
        raise ValueError(f"Gram matrix is not PSD (min eigenvalue {lam[-1]:.3g})")
    lam = np.clip(lam, 0.0, None)
    rank = int(np.sum(lam > rank_tol * top)) if top > 0 else 0
    count = int(np.sum(np.sqrt(lam[:rank]) >= tau))
    if t_max is not None:
        count = min(count, int(t_max))
    return SpectrumModel(lam, canonicalize_signs(u), rank, count, float(tau))


def truncate(spectrum: SpectrumModel, t: int) -> SpectrumModel:
    if not 0 <= t <= spectrum.rank:
        raise ValueError(f"T must lie in [0, {spectrum.rank}]")
    return SpectrumModel(spectrum.eigenvalues, spectrum.eigenvectors, spectrum.rank, int(t), spectrum.tau)


@dataclass(frozen=True, eq=False)
class Projections:
    """Rotated labels and ones over all M eigenvectors, plus sum(y)."""

    y_rot: np.ndarray
    ones_rot: np.ndarray
    ones_dot_y: float


def _derived_seed(seed, *labels) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), *labels])


def project_components(spectrum: SpectrumModel, labels, shots: int | None = None, seed=0) -> Projections:
    """u_i . y, u_i . 1 and 1 . y, optionally estimated by swap tests.

    Sampled estimates use unit states y / sqrt(M) and 1 / sqrt(M) and are
    rescaled by those known norms.
    """
    y = np.asarray(labels, dtype=float)
    u = spectrum.eigenvectors
    m = u.shape[0]
    if shots is None:
        return Projections(u.T @ y, u.T @ np.ones(m), float(y.sum()))
    root = math.sqrt(m)
    y_unit = y / np.linalg.norm(y)
    ones_unit = np.ones(m) / root
    y_norm = float(np.linalg.norm(y))
    y_rot = np.empty(m)
    ones_rot = np.empty(m)
    for i in range(m):
        s_y, s_1 = _derived_seed(seed, 0, i).generate_state(2)
        y_rot[i] = y_norm * swap_test_inner(u[:, i], y_unit, shots, int(s_y))
        ones_rot[i] = root * swap_test_inner(u[:, i], ones_unit, shots, int(s_1))
    s_dot = int(_derived_seed(seed, 1).generate_state(1)[0])
    ones_dot_y = y_norm * root * swap_test_inner(y_unit, ones_unit, shots, s_dot)
    return Projections(y_rot, ones_rot, ones_dot_y)


@dataclass(frozen=True, eq=False)
class CompressedProblem:
    lambda_r: np.ndarray
    y_rot: np.ndarray
    ones_rot: np.ndarray
    ones_dot_y: float
    m: int

    @classmethod
    def build(cls, spectrum: SpectrumModel, proj: Projections, t: int | None = None) -> "CompressedProblem":
        t = spectrum.retained if t is None else t
        return cls(spectrum.eigenvalues[:t], proj.y_rot[:t], proj.ones_rot[:t], proj.ones_dot_y, spectrum.m)


@dataclass(frozen=True, eq=False)
class SparseSolution:
    alpha_rot: np.ndarray
    b: float


def solve_compressed(cp: CompressedProblem, gamma: float, cond_cap: float = COND_CAP) -> SparseSolution:
    """Solve the T x T rotated PLS-SVM system and recover the bias."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    t = cp.lambda_r.size
    if t == 0:
        raise ValueError("compressed problem is empty (T = 0)")
    lam = cp.lambda_r
    o = cp.ones_rot
    lo = lam * o
    a = np.diag(lam / gamma + lam**2) - np.outer(lo, lo) / cp.m
    rhs = lam * (cp.y_rot - cp.ones_dot_y / cp.m * o)
    with np.errstate(divide="ignore"):
        cond = float(np.linalg.cond(a))
    if not np.isfinite(cond) or cond > cond_cap:
        raise SingularSystem("compressed system", cond)
    alpha = scipy.linalg.solve(a, rhs, assume_a="sym")
    b = (cp.ones_dot_y - lo @ alpha) / cp.m
    return SparseSolution(alpha, float(b))


def qsls_decision_values(spectrum: SpectrumModel, sol: SparseSolution, kernel_vectors) -> np.ndarray:
    """Decision values for kernel vectors given as columns (M x P) or a single vector."""
    kv = np.asarray(kernel_vectors, dtype=float)
    single = kv.ndim == 1
    kv = kv.reshape(kv.shape[0], -1)
    if kv.shape[0] != spectrum.m:
        raise ValueError(f"dimension mismatch: {kv.shape[0]} vs {spectrum.m}")
    t = sol.alpha_rot.size
    proj = spectrum.eigenvectors[:, :t].T @ kv
    values = sol.alpha_rot @ proj + sol.b
    return values[0] if single else values


def qsls_decision(spectrum: SpectrumModel, sol: SparseSolution, kernel_vector) -> tuple[float, int]:
    value = float(qsls_decision_values(spectrum, sol, np.asarray(kernel_vector, dtype=float).ravel()))
    return value, int(sign(value))


def truncation_error_bound(spectrum: SpectrumModel, alpha_rot_full, kernel_vector, t: int, form: str = "triangle") -> float:
    """Upper bound on |g - g_T| from dropping rotated components T+1..R.

    Per dropped component the bracket is phi(x_hat) V_i + sigma_i (1_Omega)_i,
    with phi(x_hat) V_i = k(x_hat) . u_i / sigma_i, and the sum is scaled by
    sigma_{T+1}. ``form="triangle"`` bounds each bracket by |phi V_i| +
    sigma_i |(1_Omega)_i| and sums magnitudes, which dominates the error for
    every x_hat. ``form="printed"`` is sigma_{T+1} |sum alpha_i bracket_i|;
    its terms can cancel, so it is not a bound in general.
    """
    r = spectrum.rank
    if not 0 <= t <= r:
        raise ValueError(f"T must lie in [0, {r}]")
    if t == r:
        return 0.0
    sigma = spectrum.singular_values
    if sigma[t] == 0:
        return 0.0
    alpha = np.asarray(alpha_rot_full, dtype=float)[t:r]
    kv = np.asarray(kernel_vector, dtype=float).ravel()
    u = spectrum.eigenvectors[:, t:r]
    sig = sigma[t:r]
    # zero modes contribute nothing: k(x_hat) has no component along them
    feat = np.divide(u.T @ kv, sig, out=np.zeros_like(sig), where=sig > 0)
    ones_term = sig * (u.T @ np.ones(spectrum.m))
    if form == "triangle":
        return float(sigma[t] * np.sum(np.abs(alpha) * (np.abs(feat) + np.abs(ones_term))))
    if form == "printed":
        return float(sigma[t] * abs(np.sum(alpha * (feat + ones_term))))
    raise ValueError(f"unknown form {form!r}")


def truncated_solution(spectrum: SpectrumModel, full: SparseSolution, t: int) -> SparseSolution:
    """Sparse model (alpha_1..alpha_T, 0, ...) with the bias recomputed from the kept terms."""
    n = full.alpha_rot.size
    if not 0 <= t <= n:
        raise ValueError(f"T must lie in [0, {n}]")
    lam = spectrum.eigenvalues[t:n]
    ones_rot = spectrum.eigenvectors[:, t:n].T @ np.ones(spectrum.m)
    b = full.b + float(np.sum(ones_rot * lam * full.alpha_rot[t:n])) / spectrum.m
    return SparseSolution(full.alpha_rot[:t].copy(), b)


def linear_weights(spectrum: SpectrumModel, sol: SparseSolution, features, kernel: KernelSpec | None = None) -> np.ndarray:
    """Primal weights A^T U_T alpha_rot for the linear kernel."""
    if kernel is not None and kernel.kind != "linear":
        raise ValueError("primal weights exist only for the linear kernel")
    a = np.asarray(features, dtype=float)
    t = sol.alpha_rot.size
    return a.T @ (spectrum.eigenvectors[:, :t] @ sol.alpha_rot)


def original_alpha(spectrum: SpectrumModel, sol: SparseSolution) -> np.ndarray:
    """Map rotated coefficients back to per-sample coefficients U_T alpha_rot."""
    t = sol.alpha_rot.size
    return spectrum.eigenvectors[:, :t] @ sol.alpha_rot
