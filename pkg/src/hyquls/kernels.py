"""Kernels, Gram matrices and tensor-power feature states.

Feature states are kept implicit (base vector, tensor order, norm factor):
every quantity the pipelines need is an inner product, and inner products of
tensor powers factorize as powers of base inner products. Explicit
materialization exists only for small cross-checks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from hyquls.data import Dataset

KINDS = ("linear", "poly", "rbf", "rbf_approx")

# dot products over more features than this use compensated summation
_FSUM_THRESHOLD = 1000


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    d: int | None = None
    omega: float | None = None
    k: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "poly" and (self.d is None or int(self.d) != self.d or self.d < 1):
            raise ValueError("poly kernel needs an integer d >= 1")
        if self.kind in ("rbf", "rbf_approx") and not (self.omega is not None and self.omega > 0):
            raise ValueError("rbf kernels need omega > 0")
        if self.kind == "rbf_approx" and (self.k is None or int(self.k) != self.k or self.k < 1):
            raise ValueError("rbf_approx needs an integer k >= 1")

    @classmethod
    def linear(cls):
        return cls("linear")

    @classmethod
    def poly(cls, d: int):
        return cls("poly", d=int(d))

    @classmethod
    def rbf(cls, omega: float):
        return cls("rbf", omega=float(omega))

    @classmethod
    def rbf_approx(cls, omega: float, k: int):
        return cls("rbf_approx", omega=float(omega), k=int(k))

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "poly":
            out["d"] = self.d
        if self.kind in ("rbf", "rbf_approx"):
            out["omega"] = self.omega
        if self.kind == "rbf_approx":
            out["k"] = self.k
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "KernelSpec":
        kind = obj.get("kind")
        if kind == "poly":
            return cls.poly(obj["d"])
        if kind == "rbf":
            return cls.rbf(obj["omega"])
        if kind == "rbf_approx":
            return cls.rbf_approx(obj["omega"], obj["k"])
        return cls(kind)


def _dot(x: np.ndarray, z: np.ndarray) -> float:
    if x.shape[-1] > _FSUM_THRESHOLD:
        return math.fsum(np.multiply(x, z))
    return float(np.dot(x, z))


def _cross_dots(xs: np.ndarray, zs: np.ndarray) -> np.ndarray:
    if xs.shape[1] <= _FSUM_THRESHOLD:
        return xs @ zs.T
    out = np.empty((xs.shape[0], zs.shape[0]))
    for i, x in enumerate(xs):
        for j, z in enumerate(zs):
            out[i, j] = math.fsum(x * z)
    return out


def _check_dims(x, z):
    x = np.asarray(x, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if x.shape != z.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {z.shape[0]}")
    return x, z


def kernel_eval(spec: KernelSpec, x, z) -> float:
    x, z = _check_dims(x, z)
    xz = np.array([[_dot(x, z)]])
    return float(_from_dots(spec, xz, np.array([_dot(x, x)]), np.array([_dot(z, z)]))[0, 0])


def _from_dots(spec: KernelSpec, xz: np.ndarray, xx: np.ndarray, zz: np.ndarray) -> np.ndarray:
    if spec.kind == "linear":
        return xz
    if spec.kind == "poly":
        return (xz + 1.0) ** spec.d
    w2 = spec.omega**2
    if spec.kind == "rbf":
        sq = np.maximum(xx[:, None] + zz[None, :] - 2 * xz, 0.0)
        return np.exp(-sq / (2 * w2))
    edge = np.exp(-xx / (2 * w2))[:, None] * np.exp(-zz / (2 * w2))[None, :]
    # (1 + s/k)^k evaluated in log space for large k
    k = spec.k
    s = xz / w2
    base = 1.0 + s / k
    with np.errstate(invalid="ignore", divide="ignore"):
        body = np.where(base > 0, np.exp(k * np.log1p(s / k)), base**k)
    return edge * body


def kernel_matrix(spec: KernelSpec, xs, zs) -> np.ndarray:
    """Cross-kernel matrix with entry (i, j) = K(xs[i], zs[j])."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    if xs.shape[1] != zs.shape[1]:
        raise ValueError(f"dimension mismatch: {xs.shape[1]} vs {zs.shape[1]}")
    xx = np.einsum("ij,ij->i", xs, xs)
    zz = np.einsum("ij,ij->i", zs, zs)
    return _from_dots(spec, _cross_dots(xs, zs), xx, zz)


def gram_matrix(spec: KernelSpec, data) -> np.ndarray:
    """Symmetric M x M Gram matrix; symmetry is enforced exactly."""
    x = data.features if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data, dtype=float))
    g = kernel_matrix(spec, x, x)
    return (g + g.T) / 2


def kernel_vector(spec: KernelSpec, data, x_hat) -> np.ndarray:
    x = data.features if isinstance(data, Dataset) else np.atleast_2d(data)
    return kernel_matrix(spec, x, np.atleast_2d(x_hat))[:, 0]


@dataclass(frozen=True)
class FeatureState:
    """Implicit tensor-power state |x'>^(x)order / sqrt(norm_factor).

    ``norm_factor`` is chosen so that ``inner(a, b) * sqrt(Na * Nb)`` gives
    the unnormalized feature-space inner product.
    """

    base_vector: np.ndarray
    tensor_order: int
    norm_factor: float

    def inner(self, other: "FeatureState") -> float:
        a, b = self.base_vector, other.base_vector
        if a.shape != b.shape or self.tensor_order != other.tensor_order:
            raise ValueError("feature states live in different spaces")
        cos = _dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
        return float(np.clip(cos, -1.0, 1.0) ** self.tensor_order)

    def materialize(self) -> np.ndarray:
        """Explicit unit-norm amplitude vector, registers in lexicographic order."""
        v = self.base_vector / np.linalg.norm(self.base_vector)
        out = np.ones(1)
        for _ in range(self.tensor_order):
            out = np.kron(out, v)
        return out


def poly_feature_state(x, d: int) -> FeatureState:
    if d < 1:
        raise ValueError("d must be >= 1")
    base = np.append(np.asarray(x, dtype=float).ravel(), 1.0)
    return FeatureState(base, int(d), float(np.dot(base, base) ** d))


def rbf_feature_state(x, omega: float, k: int) -> FeatureState:
    """State for the exp(x.z / omega^2) factor of the RBF kernel at tensor order k."""
    if not omega > 0 or k < 1:
        raise ValueError("need omega > 0 and k >= 1")
    x = np.asarray(x, dtype=float).ravel()
    c = omega**2 * k
    base = np.append(x, omega * math.sqrt(k))
    norm = math.exp(k * math.log1p(float(np.dot(x, x)) / c))
    return FeatureState(base, int(k), norm)


def limit_gap(s: float, k: int) -> float:
    """|e^s - (1 + s/k)^k|."""
    if 1 + s / k <= 0:
        return abs(math.exp(s) - (1 + s / k) ** k)
    return abs(math.exp(s) - math.exp(k * math.log1p(s / k)))


class OrderCapExceeded(ValueError):
    def __init__(self, cap: int, achieved: float):
        super().__init__(f"no k <= {cap} reaches the accuracy; bound at cap is {achieved:.3g}")
        self.cap = cap
        self.achieved = achieved


def rbf_order_for_accuracy(delta: float, s_max: float = 1.0, cap: int = 10**6) -> int:
    """Smallest k with |e^s - (1+s/k)^k| < delta for all |s| <= s_max.

    The gap is largest at the endpoints s = +-s_max and decreases in k, so a
    bisection over k on the endpoint bound suffices.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not 0 <= s_max <= 1:
        raise ValueError("s_max must lie in [0, 1]")

    def bound(k):
        return max(limit_gap(s_max, k), limit_gap(-s_max, k))

    if bound(1) < delta:
        return 1
    if bound(cap) >= delta:
        raise OrderCapExceeded(cap, bound(cap))
    lo, hi = 1, cap  # bound(lo) >= delta > bound(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bound(mid) < delta:
            hi = mid
        else:
            lo = mid
    return hi


def _dataset_features(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.features
    return np.atleast_2d(np.asarray(data, dtype=float))


def dataset_state_gram_check(data, omega: float, k: int, cap: int = 10**6) -> np.ndarray:
    """Reduced density matrix of the sample register of the RBF data state.

    The amplitude of |i>|j1..jk> is exp(-|x_i|^2 / 2 omega^2) times the product
    of the k components x'_{i j} / (omega sqrt(k)), x'_i = (x_i, omega sqrt(k)).
    The whole state is normalized to unit norm before the partial trace over
    the feature registers, so the result has unit trace.
    """
    x = _dataset_features(data)
    m, n = x.shape
    dim = n + 1
    if dim**k * m > cap:
        raise ValueError(f"explicit state would have {dim**k * m} amplitudes (cap {cap})")
    scale = omega * math.sqrt(k)
    amps = np.empty((m, dim**k))
    for i, row in enumerate(x):
        v = np.append(row, scale) / scale
        t = np.ones(1)
        for _ in range(k):
            t = np.kron(t, v)
        amps[i] = math.exp(-float(row @ row) / (2 * omega**2)) * t
    amps /= np.linalg.norm(amps)
    rho = amps @ amps.T
    return (rho + rho.T) / 2


def dataset_state_gram_implicit(data, omega: float, k: int) -> np.ndarray:
    """Closed form of :func:`dataset_state_gram_check` via factorized inner products."""
    x = _dataset_features(data)
    g = gram_matrix(KernelSpec.rbf_approx(omega, k), x)
    return g / np.trace(g)


def a9_printed(data, omega: float, k: int) -> np.ndarray:
    """The reduced matrix with the M^(1/k) exponent divisor, taken literally."""
    x = _dataset_features(data)
    m = x.shape[0]
    sq = np.einsum("ij,ij->i", x, x)
    return np.exp(x @ x.T / (m ** (1.0 / k) * omega**2)) * np.exp(-(sq[:, None] + sq[None, :]) / (2 * omega**2))


def explicit_poly_features(x, d: int) -> np.ndarray:
    """Unnormalized (x, 1)^(x)d in lexicographic register order."""
    base = np.append(np.asarray(x, dtype=float).ravel(), 1.0)
    return np.array([math.prod(base[list(idx)]) for idx in itertools.product(range(base.size), repeat=d)])
