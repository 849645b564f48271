"""Simulation of the hybrid-variable LS-SVM pipeline.

The saddle system is inverted spectrally: the label state is expanded in the
eigenbasis of M_s, each component is scaled by F(lambda)/lambda, and the
classifier output is read out as a swap-test inner product. Every norm that a
quantum state would discard is kept in a :class:`NormLedger`, so the exact
mode reproduces the classical decision value and not only its sign.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hyquls.cv_inversion import DetectionNoise, StepWindow, apply_filtered_inverse
from hyquls.data import Dataset
from hyquls.kernels import KernelSpec, gram_matrix, kernel_matrix
from hyquls.lssvm import SaddleSystem, build_saddle_system, sign


@dataclass(frozen=True)
class HvqConfig:
    """``window=None`` picks L = 10 / min|lambda(M_s)|; ``shots=None`` is exact mode."""

    window: StepWindow | None = None
    noise: DetectionNoise = field(default_factory=DetectionNoise)
    shots: int | None = None
    seed: int = 0
    floor: float | None = None

    def __post_init__(self):
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be >= 1")


@dataclass(frozen=True)
class NormLedger:
    ys_norm: float
    solution_norm: float = 1.0  # norm of the post-selected state before renormalization
    probe_norm: float = 1.0

    @property
    def scale(self) -> float:
        return self.ys_norm * self.solution_norm * self.probe_norm


def encode_ys(labels) -> tuple[np.ndarray, float]:
    """Unit amplitudes proportional to (y, 0) and the discarded norm."""
    y = np.asarray(labels, dtype=float)
    ys = np.append(y, 0.0)
    norm = float(np.linalg.norm(ys))
    if norm == 0:
        raise ValueError("labels are all zero")
    return ys / norm, norm


@dataclass(frozen=True, eq=False)
class HvqResult:
    alpha_s: np.ndarray  # (alpha, b) with norms restored
    ledger: NormLedger
    eigenvalues: np.ndarray
    coeffs: np.ndarray
    attenuations: np.ndarray
    kept: np.ndarray
    window: StepWindow

    def table(self) -> list[dict]:
        return [
            {"lambda": float(l), "c": float(c), "F_hat": float(f), "kept": bool(k)}
            for l, c, f, k in zip(self.eigenvalues, self.coeffs, self.attenuations, self.kept)
        ]


def default_window(eigenvalues, floor: float | None = None) -> StepWindow:
    lam = np.abs(np.asarray(eigenvalues, dtype=float))
    if floor is None:
        floor = 1e-10 * lam.max()
    return StepWindow(10.0 / lam[lam >= floor].min())


def hvq_solve(system: SaddleSystem, labels, config: HvqConfig = HvqConfig()) -> HvqResult:
    psi, ys_norm = encode_ys(labels)
    lam, u = np.linalg.eigh(system.m_s)
    coeffs = u.T @ psi
    window = config.window or default_window(lam, config.floor)
    filt = apply_filtered_inverse(lam, u, coeffs, window, config.noise, config.floor)
    psi3_norm = float(np.linalg.norm(filt.vector))
    ledger = NormLedger(ys_norm, psi3_norm)
    return HvqResult(ys_norm * filt.vector, ledger, lam, coeffs, filt.attenuations, filt.kept, window)


class NotUnitVector(ValueError):
    pass


def swap_test_inner(a, b, shots: int | None = None, seed=0) -> float:
    """Estimate Re<a|b> from sigma_x measurements on the swap-test ancilla.

    Each shot yields +1 with probability (1 + Re<a|b>) / 2.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    for v in (a, b):
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise NotUnitVector(f"input has norm {np.linalg.norm(v)!r}")
    exact = float(np.real(np.vdot(a, b)))
    if shots is None:
        return exact
    p_plus = min(max((1.0 + exact) / 2, 0.0), 1.0)
    rng = np.random.default_rng(seed)
    plus = rng.binomial(shots, p_plus)
    return 2.0 * plus / shots - 1.0


@dataclass(frozen=True, eq=False)
class HvqModel:
    dataset: Dataset
    kernel: KernelSpec
    gamma: float
    config: HvqConfig
    result: HvqResult

    def decision(self, x_hat, shots: int | None = None, seed=None) -> tuple[float, int, NormLedger]:
        """Contract (k(x_hat), 1) with (alpha, b) through a swap test."""
        x_hat = np.asarray(x_hat, dtype=float).reshape(1, -1)
        if x_hat.shape[1] != self.dataset.n:
            raise ValueError(f"dimension mismatch: {x_hat.shape[1]} vs {self.dataset.n}")
        row = np.append(kernel_matrix(self.kernel, self.dataset.features, x_hat)[:, 0], 1.0)
        probe_norm = float(np.linalg.norm(row))
        sol = self.result.alpha_s
        sol_norm = float(np.linalg.norm(sol))
        ledger = NormLedger(self.result.ledger.ys_norm, self.result.ledger.solution_norm, probe_norm)
        if sol_norm == 0:
            return 0.0, 1, ledger
        est = swap_test_inner(
            row / probe_norm,
            sol / sol_norm,
            shots=self.config.shots if shots is None else shots,
            seed=self.config.seed if seed is None else seed,
        )
        # ys_norm * solution_norm equals |alpha_s|
        value = ledger.scale * est
        return value, int(sign(value)), ledger

    def decision_values(self, x_hat, shots: int | None = None, seed=None) -> np.ndarray:
        x_hat = np.atleast_2d(np.asarray(x_hat, dtype=float))
        if shots is None and self.config.shots is None:
            kx = kernel_matrix(self.kernel, self.dataset.features, x_hat)
            return self.result.alpha_s[:-1] @ kx + self.result.alpha_s[-1]
        base = self.config.seed if seed is None else seed
        seeds = np.random.SeedSequence(base).generate_state(len(x_hat))
        return np.array([self.decision(x, shots, int(s))[0] for x, s in zip(x_hat, seeds)])


def fit_hvq(dataset: Dataset, kernel: KernelSpec, gamma: float, config: HvqConfig = HvqConfig()) -> HvqModel:
    system = build_saddle_system(gram_matrix(kernel, dataset), gamma, dataset.labels)
    return HvqModel(dataset, kernel, gamma, config, hvq_solve(system, dataset.labels, config))


def hvq_decision(dataset: Dataset, kernel: KernelSpec, gamma: float, config: HvqConfig, x_hat) -> tuple[float, int]:
    value, label, _ = fit_hvq(dataset, kernel, gamma, config).decision(x_hat)
    return value, label
