"""Soft-margin SVM dual, its eigenbasis rotation, and a projected-gradient solver.

Variants of the dual (all maximized):

``printed`` (default)
    sum_i a_i y_i - 1/2 a^T K a,  sum_i a_i = 0,  0 <= a_i <= gamma/2.
    The box and the equality together force a = 0.
``signed``
    Same objective with box 0 <= y_i a_i <= gamma/2. The label is absorbed
    into the multiplier; this is the standard dual in the variables
    a_i = y_i alpha_i.
``standard``
    sum_i a_i - 1/2 (y*a)^T K (y*a),  sum_i y_i a_i = 0,  0 <= a_i <= gamma/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VARIANTS = ("printed", "signed", "standard")


class InfeasibleQp(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DualQp:
    gram: np.ndarray
    labels: np.ndarray
    gamma: float
    variant: str = "printed"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def size(self) -> int:
        return self.labels.size

    def objective(self, a) -> float:
        a = np.asarray(a, dtype=float)
        if self.variant == "standard":
            w = self.labels * a
            return float(a.sum() - 0.5 * w @ self.gram @ w)
        return float(a @ self.labels - 0.5 * a @ self.gram @ a)

    def gradient(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if self.variant == "standard":
            return 1.0 - self.labels * (self.gram @ (self.labels * a))
        return self.labels - self.gram @ a

    @property
    def constraint(self) -> np.ndarray:
        return self.labels.copy() if self.variant == "standard" else np.ones(self.size)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        half = self.gamma / 2
        if self.variant == "signed":
            return np.where(self.labels > 0, 0.0, -half), np.where(self.labels > 0, half, 0.0)
        return np.zeros(self.size), np.full(self.size, half)

    @property
    def lipschitz(self) -> float:
        return float(max(np.linalg.eigvalsh(self.gram)[-1], 1e-12))

    def expansion(self, a) -> np.ndarray:
        """Coefficients w with f(x) = sum_j w_j K(x_j, x) + b."""
        a = np.asarray(a, dtype=float)
        return self.labels * a if self.variant == "standard" else a

    def multipliers(self, a) -> np.ndarray:
        """The nonnegative Lagrange multipliers of the margin constraints."""
        a = np.asarray(a, dtype=float)
        return self.labels * a if self.variant == "signed" else a


def build_dual(gram, labels, gamma: float, variant: str = "printed") -> DualQp:
    g = np.asarray(gram, dtype=float)
    y = np.asarray(labels, dtype=float)
    if g.shape != (y.size, y.size):
        raise ValueError("Gram matrix and labels disagree in size")
    return DualQp(g, y, float(gamma), variant)


@dataclass(frozen=True, eq=False)
class RotatedQp:
    """Dual in eigen-coordinates a_rot = U^T a.

    The box 0 <= a_rot <= (gamma/2) 1_Omega is applied componentwise; for a
    negative (1_Omega)_i the interval runs from (gamma/2)(1_Omega)_i to 0.
    This is a different feasible set from the rotated original box.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    y_rot: np.ndarray
    ones_rot: np.ndarray
    rank: int
    gamma: float
    fix_null: bool = False

    @property
    def size(self) -> int:
        return self.y_rot.size

    def _quad(self) -> np.ndarray:
        lam = self.eigenvalues.copy()
        lam[self.rank :] = 0.0
        return lam

    def objective(self, a) -> float:
        a = np.asarray(a, dtype=float)
        return float(a @ self.y_rot - 0.5 * np.sum(self._quad() * a * a))

    def gradient(self, a) -> np.ndarray:
        return self.y_rot - self._quad() * np.asarray(a, dtype=float)

    @property
    def constraint(self) -> np.ndarray:
        return self.ones_rot.copy()

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        edge = self.gamma / 2 * self.ones_rot
        lo, hi = np.minimum(0.0, edge), np.maximum(0.0, edge)
        if self.fix_null:
            lo[self.rank :] = 0.0
            hi[self.rank :] = 0.0
        return lo, hi

    @property
    def lipschitz(self) -> float:
        return float(max(self._quad().max(), 1e-12))

    def rotate(self, a) -> np.ndarray:
        return self.eigenvectors.T @ np.asarray(a, dtype=float)

    def unrotate(self, a_rot) -> np.ndarray:
        return self.eigenvectors @ np.asarray(a_rot, dtype=float)

    def restricted(self) -> "RotatedQp":
        """Same problem with the null-space coordinates pinned to zero."""
        return RotatedQp(self.eigenvalues, self.eigenvectors, self.y_rot, self.ones_rot, self.rank, self.gamma, True)


def rotate_dual(dual: DualQp, spectrum) -> RotatedQp:
    if dual.variant == "standard":
        raise ValueError("rotate the printed or signed form; the standard form maps onto signed via a_i -> y_i a_i")
    u = spectrum.eigenvectors
    if u.shape[0] != dual.size:
        raise ValueError(f"dimension mismatch: spectrum of size {u.shape[0]} vs {dual.size} samples")
    return RotatedQp(
        spectrum.eigenvalues.copy(),
        u,
        u.T @ dual.labels,
        u.T @ np.ones(dual.size),
        spectrum.rank,
        dual.gamma,
    )


def project_box_hyperplane(v, c, lo, hi) -> np.ndarray:
    """Euclidean projection of v onto {lo <= x <= hi, c.x = 0}.

    x(mu) = clip(v - mu c, lo, hi) and c.x(mu) is piecewise linear and
    nonincreasing in mu, so the root is found exactly between breakpoints.
    """
    v, c, lo, hi = (np.asarray(t, dtype=float) for t in (v, c, lo, hi))
    if np.any(lo > hi):
        raise InfeasibleQp("empty box")
    active = c != 0
    h_min = np.sum(np.where(c > 0, c * lo, c * hi))
    h_max = np.sum(np.where(c > 0, c * hi, c * lo))
    if h_min > 1e-12 or h_max < -1e-12:
        raise InfeasibleQp("box does not meet the hyperplane")
    if not active.any():
        return np.clip(v, lo, hi)

    def h(mu):
        return float(c @ np.clip(v - mu * c, lo, hi))

    ca = c[active]
    knots = np.unique(np.concatenate([(v[active] - lo[active]) / ca, (v[active] - hi[active]) / ca]))
    vals = np.array([h(k) for k in knots])
    if vals[0] <= 0:
        mu = knots[0]  # h is constant below the first knot
    elif vals[-1] >= 0:
        mu = knots[-1]
    else:
        j = int(np.flatnonzero(vals < 0)[0])
        k0, k1, h0, h1 = knots[j - 1], knots[j], vals[j - 1], vals[j]
        mu = k0 + (k1 - k0) * h0 / (h0 - h1)
    return np.clip(v - mu * c, lo, hi)


@dataclass(frozen=True, eq=False)
class QpSolution:
    alpha: np.ndarray
    objective: float
    iterations: int
    converged: bool
    pg_norm: float
    slacks: np.ndarray | None = None
    kkt_residual: float | None = None
    b: float | None = None
    b_flagged: bool = False


def solve_qp_projected_gradient(qp, tol: float = 1e-8, max_iters: int = 100_000) -> QpSolution:
    """Accelerated projected-gradient ascent with adaptive restart.

    Stops when the gradient-mapping norm Lip * |P(a + grad/Lip) - a| drops to
    ``tol``; otherwise returns with ``converged=False`` at the iteration cap.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    lo, hi = qp.bounds
    c = qp.constraint
    lip = qp.lipschitz

    def proj(v):
        return project_box_hyperplane(v, c, lo, hi)

    a = proj(np.zeros(qp.size))
    z, theta = a.copy(), 1.0
    pg = np.inf
    for it in range(1, max_iters + 1):
        step = proj(a + qp.gradient(a) / lip)
        pg = lip * float(np.linalg.norm(step - a))
        if pg <= tol:
            a = step
            break
        nxt = proj(z + qp.gradient(z) / lip)
        theta_next = (1 + np.sqrt(1 + 4 * theta**2)) / 2
        if qp.objective(nxt) < qp.objective(a):
            # momentum overshot: restart from the plain step
            nxt, theta_next = step, 1.0
            z = step
        else:
            z = nxt + (theta - 1) / theta_next * (nxt - a)
        a, theta = nxt, theta_next
    else:
        it = max_iters
    return QpSolution(a, qp.objective(a), it, pg <= tol, pg)


def recover_bias(dual: DualQp, a, tol: float | None = None) -> tuple[float, bool]:
    """Bias from the first free multiplier; averaged over margin equations otherwise.

    Returns ``(b, flagged)`` where ``flagged`` marks the averaging fallback.
    """
    tol = 1e-9 * dual.gamma if tol is None else tol
    mult = dual.multipliers(a)
    gap = dual.labels - dual.gram @ dual.expansion(a)
    free = np.flatnonzero((mult > tol) & (mult < dual.gamma / 2 - tol))
    if free.size:
        return float(gap[free[0]]), False
    support = mult > tol
    pool = gap[support] if support.any() else gap
    return float(pool.mean()), True


def kkt_residual(dual: DualQp, a, b: float | None = None) -> tuple[float, np.ndarray, float, bool]:
    """Largest violation of the three margin KKT conditions.

    Returns ``(residual, slacks, b, flagged)``. Slacks are
    max(0, 1 - y_i f(x_i)); the conditions checked are complementarity
    mult_i (y_i f(x_i) - 1 + xi_i) = 0, feasibility 1 - xi_i - y_i f(x_i) <= 0
    and mult_i >= 0.
    """
    a = np.asarray(a, dtype=float)
    flagged = False
    if b is None:
        b, flagged = recover_bias(dual, a)
    f = dual.gram @ dual.expansion(a) + b
    yf = dual.labels * f
    xi = np.maximum(0.0, 1.0 - yf)
    mult = dual.multipliers(a)
    comp = np.abs(mult * (yf - 1.0 + xi))
    feas = np.maximum(0.0, 1.0 - xi - yf)
    neg = np.maximum(0.0, -mult)
    return float(max(comp.max(), feas.max(), neg.max())), xi, float(b), flagged


def solve_dual(dual: DualQp, tol: float = 1e-8, max_iters: int = 100_000) -> QpSolution:
    """Solve the dual and attach slacks, bias and the KKT residual."""
    sol = solve_qp_projected_gradient(dual, tol, max_iters)
    resid, xi, b, flagged = kkt_residual(dual, sol.alpha)
    return QpSolution(sol.alpha, sol.objective, sol.iterations, sol.converged, sol.pg_norm, xi, resid, b, flagged)
