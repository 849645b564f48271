"""Continuous-variable matrix inversion modelled through its spectral filters.

A qumode pair prepared in a box state of width L and a p*exp(-p^2/2) state,
coupled by exp(i M p1 p2) and post-selected at p = 0, applies

    lambda -> (1/lambda) * F(lambda)

to each eigencomponent of M. With ideal detection F is the window filter
1 - exp(-lambda^2 L^2 / 2); finite detection width eps_q gives the attenuated
filter of :func:`detection_filter`. Everything here works in the eigenbasis;
:func:`quadrature_inverse` evaluates the underlying double integral directly
as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

# beyond |lambda| p1 = _P1_CUTOFF the p1 integrand carries mass < 1e-15 / |lambda|
_P1_CUTOFF = 8.5


@dataclass(frozen=True)
class StepWindow:
    L: float

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("window width must be positive")


@dataclass(frozen=True)
class DetectionNoise:
    eps_q: float = 0.0

    def __post_init__(self):
        if not self.eps_q >= 0:
            raise ValueError("eps_q must be >= 0")


@dataclass(frozen=True)
class SqueezeParams:
    """Finite-squeezing parameters; ``s1`` is 2 s / (Q1^2 + Q2^2)."""

    s: float
    chi: float = 0.0
    eta: float = 1.0
    q1: float = 1.0
    q2: float = 1.0

    def __post_init__(self):
        if not (self.s > 0 and self.eta > 0 and self.chi >= 0):
            raise ValueError("need s > 0, eta > 0, chi >= 0")

    @classmethod
    def with_s1(cls, s1: float, chi: float = 0.0, eta: float = 1.0) -> "SqueezeParams":
        """Parameters whose post-selected quadratures give the requested s1."""
        if not s1 > 0:
            raise ValueError("s1 must be positive")
        return cls(s=s1, chi=chi, eta=eta, q1=1.0, q2=1.0)

    @property
    def s1(self) -> float:
        q = self.q1**2 + self.q2**2
        return math.inf if q == 0 else 2 * self.s / q


@dataclass(frozen=True, eq=False)
class FilterProfile:
    eigenvalues: np.ndarray
    attenuations: np.ndarray


def _simpson(f, a: float, b: float, tol: float, max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature with Richardson correction."""

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6 * (fa + 4 * fm + fb)

    fa, fb, fm = f(a), f(b), f((a + b) / 2)
    total = 0.0
    stack = [(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 0)]
    while stack:
        a, b, fa, fm, fb, whole, eps, depth = stack.pop()
        m = (a + b) / 2
        flm, frm = f((a + m) / 2), f((m + b) / 2)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth >= max_depth or abs(delta) <= 15 * eps:
            total += left + right + delta / 15
        else:
            stack.append((a, m, fa, flm, fm, left, eps / 2, depth + 1))
            stack.append((m, b, fm, frm, fb, right, eps / 2, depth + 1))
    return total


def quadrature_inverse(lam: float, window: StepWindow, nodes: int = 150, tol: float = 1e-11) -> float:
    """Numerically integrate the two-mode representation of 1/lambda.

    Gauss-Hermite in p2 (weight exp(-p2^2/2)) times adaptive Simpson in p1 over
    the window [0, L]. The raw integral is -(1/lambda)(1 - exp(-lambda^2 L^2/2));
    the sign is flipped so the result approximates +1/lambda.
    """
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    t, w = np.polynomial.hermite.hermgauss(nodes)
    p2 = math.sqrt(2) * t
    weights = math.sqrt(2) * w * p2 / math.sqrt(2 * math.pi)

    def inner(p1):
        # real part of (i/sqrt(2 pi)) * int p2 exp(-p2^2/2) exp(i lam p1 p2) dp2
        return -float(weights @ np.sin(lam * p1 * p2))

    upper = min(window.L, _P1_CUTOFF / abs(lam))
    raw = _simpson(inner, 0.0, upper, tol)
    return -raw


def ideal_inverse_filter(lam, window: StepWindow):
    """1 - exp(-lambda^2 L^2 / 2); zero at lambda = 0."""
    lam = np.asarray(lam, dtype=float)
    with np.errstate(invalid="ignore"):
        out = -np.expm1(-(lam**2) * window.L**2 / 2)
    out = np.where(lam == 0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def detection_filter(lam, window: StepWindow, noise: DetectionNoise):
    """Window filter degraded by homodyne post-selection of width eps_q.

    Uses |lambda| in the noise denominator so negative eigenvalues of
    indefinite matrices are attenuated symmetrically.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam == 0):
        raise ValueError("lambda must be nonzero")
    e2 = noise.eps_q**2
    e4 = e2 * e2
    with np.errstate(invalid="ignore"):
        num = -np.expm1(-(window.L**2) * (lam**2 + e2 + e4) / (2 * (1 + e2)))
    out = num / (1 + (e2 + e4) / np.abs(lam))
    return float(out) if out.ndim == 0 else out


def filter_profile(eigenvalues, window: StepWindow, noise: DetectionNoise) -> FilterProfile:
    lam = np.asarray(eigenvalues, dtype=float)
    return FilterProfile(lam, np.atleast_1d(detection_filter(lam, window, noise)))


@dataclass(frozen=True, eq=False)
class FilteredInverse:
    vector: np.ndarray
    kept: np.ndarray  # boolean mask over eigencomponents
    attenuations: np.ndarray  # zero where dropped

    @property
    def dropped(self) -> np.ndarray:
        return np.flatnonzero(~self.kept)


def apply_filtered_inverse(
    eigenvalues,
    eigenvectors,
    coeffs,
    window: StepWindow,
    noise: DetectionNoise,
    floor: float | None = None,
) -> FilteredInverse:
    """sum_k c_k F(lambda_k) / lambda_k u_k over components above the floor.

    ``eigenvectors`` holds u_k as columns. The default floor is
    1e-10 * max |lambda|.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    u = np.asarray(eigenvectors, dtype=float)
    c = np.asarray(coeffs, dtype=float)
    if np.max(np.abs(u.T @ u - np.eye(u.shape[1]))) > 1e-10:
        raise ValueError("eigenvectors are not orthonormal")
    if floor is None:
        floor = 1e-10 * np.max(np.abs(lam))
    kept = np.abs(lam) >= floor
    if not kept.any():
        raise ArithmeticError("every eigenvalue is below the spectral floor")
    att = np.zeros_like(lam)
    att[kept] = detection_filter(lam[kept], window, noise)
    weights = np.zeros_like(lam)
    weights[kept] = c[kept] * att[kept] / lam[kept]
    return FilteredInverse(u @ weights, kept, att)


def squeeze_factor(lam, params: SqueezeParams):
    """C(s1, lambda) = exp(-1 / (alpha^2 s1^2)) with alpha = eta (lambda^2 + chi).

    The lambda-independent 1/s1 prefactor is dropped; only ratios of C across
    eigenvalues carry information.
    """
    s1 = params.s1
    if s1 == 0:
        raise ValueError("s1 must be nonzero")
    lam = np.asarray(lam, dtype=float)
    alpha = params.eta * (lam**2 + params.chi)
    with np.errstate(divide="ignore"):
        out = np.exp(-1.0 / (alpha**2 * s1**2))
    return float(out) if out.ndim == 0 else out


def squeeze_attenuation(lam, params: SqueezeParams):
    """Attenuated inverse weight lambda / (lambda^2 + chi) * C(s1, lambda)."""
    lam = np.asarray(lam, dtype=float)
    out = lam / (lam**2 + params.chi) * squeeze_factor(lam, params)
    return float(out) if np.ndim(out) == 0 else out


def squeeze_ratios(eigenvalues, params: SqueezeParams) -> np.ndarray:
    """C(s1, lambda_i) / C(s1, lambda_1) for eigenvalues sorted in decreasing order."""
    lam = np.sort(np.asarray(eigenvalues, dtype=float))[::-1]
    if params.s1 == 0:
        raise ValueError("s1 must be nonzero")
    # log space: C itself underflows for small alpha * s1
    alpha = params.eta * (lam**2 + params.chi)
    with np.errstate(divide="ignore"):
        log_c = -1.0 / (alpha**2 * params.s1**2)
    if not np.isfinite(log_c[0]):
        raise ValueError("C vanishes at the leading eigenvalue")
    return np.exp(log_c - log_c[0])


def trotter_terms(gram, gamma: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split the saddle matrix into kernel, ridge and border blocks."""
    k = np.asarray(gram, dtype=float)
    m = k.shape[0]
    g1 = np.zeros((m + 1, m + 1))
    g1[:m, :m] = k
    g2 = np.zeros((m + 1, m + 1))
    g2[:m, :m] = np.eye(m) / gamma
    g3 = np.zeros((m + 1, m + 1))
    g3[:m, m] = 1.0
    g3[m, :m] = 1.0
    return g1, g2, g3


def trotter_product_error(gram, gamma: float, t: float, steps: int) -> float:
    """Spectral-norm distance between exp(i M_s t) and its first-order product formula."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    terms = trotter_terms(gram, gamma)
    exact = scipy.linalg.expm(1j * t * sum(terms))
    step = np.eye(exact.shape[0], dtype=complex)
    for g in terms:
        step = step @ scipy.linalg.expm(1j * t / steps * g)
    approx = np.linalg.matrix_power(step, steps)
    return float(np.linalg.norm(exact - approx, 2))
