"""Exact LS-SVM and PLS-SVM solvers; the reference for both quantum pipelines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from hyquls.data import Dataset
from hyquls.kernels import KernelSpec, gram_matrix, kernel_matrix

COND_CAP = 1e12


class SingularSystem(ArithmeticError):
    """The linear system is singular or too ill-conditioned to trust."""

    def __init__(self, what: str, condition: float):
        super().__init__(f"{what} is singular or ill-conditioned (condition ~ {condition:.3g})")
        self.condition = condition


@dataclass(frozen=True, eq=False)
class SaddleSystem:
    """The bordered system [[K + I/gamma, 1^T], [1, 0]] (alpha, b) = (y, 0)."""

    m_s: np.ndarray
    y_s: np.ndarray
    gamma: float

    @property
    def m(self) -> int:
        return self.m_s.shape[0] - 1


@dataclass(frozen=True, eq=False)
class LsSvmModel:
    alpha: np.ndarray
    b: float
    kernel: KernelSpec | None = None
    training_data: Dataset | None = None

    def to_json(self) -> dict:
        out = {"alpha": [float(a) for a in self.alpha], "b": float(self.b)}
        if self.kernel is not None:
            out["kernel"] = self.kernel.to_json()
        return out


def sign(values):
    """Elementwise sign with sign(0) = +1."""
    return np.where(np.asarray(values) >= 0, 1, -1)


def _as_gram(gram) -> np.ndarray:
    g = np.asarray(gram, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("Gram matrix must be square")
    return g


def build_saddle_system(gram, gamma: float, labels=None) -> SaddleSystem:
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    k = _as_gram(gram)
    m = k.shape[0]
    m_s = np.zeros((m + 1, m + 1))
    m_s[:m, :m] = k + np.eye(m) / gamma
    m_s[:m, m] = 1.0
    m_s[m, :m] = 1.0
    y_s = np.zeros(m + 1)
    if labels is not None:
        y_s[:m] = labels
    return SaddleSystem(m_s, y_s, float(gamma))


def _condition(a: np.ndarray) -> float:
    with np.errstate(divide="ignore"):
        c = np.linalg.cond(a)
    return float(c) if np.isfinite(c) else float("inf")


def solve_lssvm_direct(system: SaddleSystem, labels=None, cond_cap: float = COND_CAP) -> LsSvmModel:
    """Solve the saddle system with a symmetric-indefinite factorization."""
    m = system.m
    rhs = system.y_s.copy()
    if labels is not None:
        rhs[:m] = labels
        rhs[m] = 0.0
    cond = _condition(system.m_s)
    if cond > cond_cap:
        raise SingularSystem("saddle system", cond)
    sol = scipy.linalg.solve(system.m_s, rhs, assume_a="sym")
    resid = np.linalg.norm(system.m_s @ sol - rhs)
    if not np.all(np.isfinite(sol)) or resid > 1e-10 * max(np.linalg.norm(rhs), 1.0):
        raise SingularSystem("saddle system", cond)
    return LsSvmModel(sol[:m], float(sol[m]))


def plssvm_matrix(gram, gamma: float) -> np.ndarray:
    k = _as_gram(gram)
    m = k.shape[0]
    k1 = k.sum(axis=1)
    return k / gamma + k @ k.T - np.outer(k1, k1) / m


def solve_plssvm(gram, gamma: float, labels, cond_cap: float = COND_CAP) -> LsSvmModel:
    """Representer-form LS-SVM: alpha from the reduced normal equations, then b."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    k = _as_gram(gram)
    y = np.asarray(labels, dtype=float)
    m = k.shape[0]
    a = plssvm_matrix(k, gamma)
    rhs = k @ (y - y.sum() / m)
    cond = _condition(a)
    if cond > cond_cap:
        raise SingularSystem("PLS-SVM system", cond)
    alpha = scipy.linalg.solve(a, rhs, assume_a="sym")
    if not np.all(np.isfinite(alpha)) or np.linalg.norm(a @ alpha - rhs) > 1e-10 * max(np.linalg.norm(rhs), 1.0):
        raise SingularSystem("PLS-SVM system", cond)
    b = (y.sum() - (k @ alpha).sum()) / m
    return LsSvmModel(alpha, float(b))


def plssvm_objective(gram, gamma: float, labels, alpha, b: float) -> float:
    k = _as_gram(gram)
    y = np.asarray(labels, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    m = k.shape[0]
    quad = 0.5 * alpha @ (k / gamma + k @ k.T) @ alpha
    return float(quad + alpha @ k @ (b - y) - y.sum() * b + m * b * b / 2)


def fit_lssvm(dataset: Dataset, kernel: KernelSpec, gamma: float, method: str = "direct") -> LsSvmModel:
    g = gram_matrix(kernel, dataset)
    if method == "direct":
        raw = solve_lssvm_direct(build_saddle_system(g, gamma, dataset.labels))
    elif method == "plssvm":
        raw = solve_plssvm(g, gamma, dataset.labels)
    else:
        raise ValueError(f"unknown method {method!r}")
    return LsSvmModel(raw.alpha, raw.b, kernel, dataset)


def decision_values(model: LsSvmModel, x_hat) -> np.ndarray:
    """sum_i alpha_i K(x_i, x_hat) + b for each row of x_hat."""
    if model.kernel is None or model.training_data is None:
        raise ValueError("model has no kernel or training data attached")
    x_hat = np.atleast_2d(np.asarray(x_hat, dtype=float))
    if x_hat.shape[1] != model.training_data.n:
        raise ValueError(f"dimension mismatch: {x_hat.shape[1]} vs {model.training_data.n}")
    kx = kernel_matrix(model.kernel, model.training_data.features, x_hat)
    return model.alpha @ kx + model.b


def decision_value(model: LsSvmModel, x_hat) -> float:
    return float(decision_values(model, np.asarray(x_hat, dtype=float).reshape(1, -1))[0])


def predict(model: LsSvmModel, x_hat) -> int:
    return int(sign(decision_value(model, x_hat)))
