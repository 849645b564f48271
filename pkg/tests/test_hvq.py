import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyquls.cv_inversion import DetectionNoise, StepWindow
from hyquls.data import Dataset, generate_blobs
from hyquls.hvq import (
    HvqConfig,
    NormLedger,
    NotUnitVector,
    encode_ys,
    fit_hvq,
    hvq_decision,
    hvq_solve,
    swap_test_inner,
)
from hyquls.kernels import KernelSpec, gram_matrix
from hyquls.lssvm import SaddleSystem, build_saddle_system, decision_values, fit_lssvm, sign
from instances import rel_close

TWO_POINT = Dataset(np.array([[1.0], [-1.0]]), np.array([1, -1]))
K2 = np.array([[1.0, -1.0], [-1.0, 1.0]])


def test_encode_ys():
    psi, norm = encode_ys([1, -1])
    np.testing.assert_allclose(psi, [1 / math.sqrt(2), -1 / math.sqrt(2), 0], rtol=1e-15)
    assert encode_ys(np.tile([1.0, -1.0], 8))[1] == pytest.approx(4.0)
    system = build_saddle_system(gram_matrix(KernelSpec.rbf(1.0), np.arange(6.0)[:, None]), 1.0)
    result = hvq_solve(system, [1, 1, -1, -1, 1, -1])
    assert np.sum(result.coeffs**2) == pytest.approx(1.0, abs=1e-14)


def test_two_point_large_window():
    res = hvq_solve(build_saddle_system(K2, 1.0), [1, -1], HvqConfig(window=StepWindow(100.0)))
    np.testing.assert_allclose(res.alpha_s, [1 / 3, -1 / 3, 0], atol=1e-8)


def test_two_point_small_window_attenuation():
    system = build_saddle_system(K2, 1.0)
    res = hvq_solve(system, [1, -1], HvqConfig(window=StepWindow(0.1)))
    lam, u = np.linalg.eigh(system.m_s)
    c = u.T @ np.array([1, -1, 0]) / math.sqrt(2)
    expected = math.sqrt(2) * u @ (c * (1 - np.exp(-(lam**2) / 200)) / lam)
    np.testing.assert_allclose(res.alpha_s, expected, rtol=1e-12, atol=1e-16)
    np.testing.assert_allclose(res.attenuations, 1 - np.exp(-(lam**2) / 200), rtol=1e-12)


def test_diagonal_system():
    system = SaddleSystem(np.diag([1.0, 2.0, 4.0]), np.array([1.0, -1.0, 0.0]), 1.0)
    res = hvq_solve(system, [1, -1], HvqConfig(window=StepWindow(1e3)))
    np.testing.assert_allclose(res.alpha_s, [1.0, -0.5, 0.0], rtol=1e-15)


def test_swap_test_exact_and_contract():
    a = np.array([0.6, 0.8])
    assert swap_test_inner(a, a) == pytest.approx(1.0)
    assert swap_test_inner(np.array([1.0, 0]), np.array([0, 1.0])) == 0.0
    with pytest.raises(NotUnitVector):
        swap_test_inner(np.array([1.0, 1.0]), a)
    assert swap_test_inner(a, a, shots=100, seed=3) == swap_test_inner(a, a, shots=100, seed=3)


def test_swap_test_sampled_half():
    a = np.array([1.0, 0.0])
    b = np.array([0.5, math.sqrt(0.75)])
    tol = 3 * math.sqrt(1 - 0.25) / math.sqrt(1e4)
    hits = sum(abs(swap_test_inner(a, b, shots=10**4, seed=s) - 0.5) <= tol for s in range(100))
    assert hits >= 99


def test_two_point_decision():
    cfg = HvqConfig(window=StepWindow(100.0))
    value, label = hvq_decision(TWO_POINT, KernelSpec.linear(), 1.0, cfg, [0.9])
    assert value == pytest.approx(0.6, abs=1e-8)
    assert label == 1


@pytest.mark.parametrize("seed", range(3))
def test_blob_labels_match_classical(seed):
    data = generate_blobs(20, 2, 6.0, seed)
    model = fit_hvq(data, KernelSpec.rbf(1.0), 1.0)
    classical = decision_values(fit_lssvm(data, KernelSpec.rbf(1.0), 1.0), data.features)
    values = np.array([model.decision(x)[0] for x in data.features])
    assert rel_close(values, classical, 1e-8)
    assert np.array_equal(sign(values), sign(classical))


@pytest.mark.parametrize("seed", range(5))
def test_shot_noise_labels(seed):
    # rbf keeps the ledger scale near 4, so 1e5 shots put the 0.1 margin beyond 10 sigma
    data = generate_blobs(20, 2, 6.0, seed)
    kernel = KernelSpec.rbf(1.0)
    model = fit_hvq(data, kernel, 1.0, HvqConfig(shots=10**5, seed=seed))
    classical = decision_values(fit_lssvm(data, kernel, 1.0), data.features)
    sampled = model.decision_values(data.features)
    mask = np.abs(classical) > 0.1
    assert np.array_equal(sign(sampled[mask]), sign(classical[mask]))
    assert np.array_equal(sampled, model.decision_values(data.features))


def test_oracle_equivalence_m64():
    rng = np.random.default_rng(64)
    data = Dataset(rng.standard_normal((64, 3)), rng.choice([-1.0, 1.0], 64))
    kernel = KernelSpec.rbf(1.0)
    model = fit_hvq(data, kernel, 1.0)
    probes = rng.standard_normal((20, 3))
    assert rel_close(model.decision_values(probes), decision_values(fit_lssvm(data, kernel, 1.0), probes), 1e-8)


def test_regularization_direction():
    system = build_saddle_system(gram_matrix(KernelSpec.rbf(1.0), np.linspace(-2, 2, 7)[:, None]), 1.0)
    labels = [1, 1, -1, -1, 1, -1, 1]
    prev = None
    for L in (100.0, 10.0, 3.0, 1.0, 0.3, 0.1):
        res = hvq_solve(system, labels, HvqConfig(window=StepWindow(L)))
        mag = np.abs(res.coeffs * res.attenuations / res.eigenvalues)
        if prev is not None:
            assert np.all(mag <= prev)
        prev = mag


def test_sampling_rate():
    a = np.array([1.0, 0.0])
    b = np.array([0.3, math.sqrt(0.91)])
    shots = np.array([1e2, 1e3, 1e4, 1e5]).astype(int)
    err = [np.std([swap_test_inner(a, b, int(n), seed=s) for s in range(100)]) for n in shots]
    slope = np.polyfit(np.log(shots), np.log(err), 1)[0]
    assert abs(slope + 0.5) <= 0.1


def test_default_window_and_table():
    data = generate_blobs(5, 2, 4.0, 0)
    model = fit_hvq(data, KernelSpec.rbf(1.0), 1.0)
    lam = np.abs(model.result.eigenvalues)
    assert model.result.window.L == pytest.approx(10 / lam.min())
    table = model.result.table()
    assert len(table) == data.m + 1 and set(table[0]) == {"lambda", "c", "F_hat", "kept"}


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(-1, 1))
def test_label_scale_invariance(c1, c2, est):
    ledger = NormLedger(2.0, 0.7, 1.3)
    scaled = NormLedger(2.0 * c1, 0.7 * c2, 1.3)
    assert sign(ledger.scale * est) == sign(scaled.scale * est)


def test_noise_shrinks_values():
    data = generate_blobs(8, 2, 6.0, 1)
    clean = fit_hvq(data, KernelSpec.rbf(1.0), 1.0)
    noisy = fit_hvq(data, KernelSpec.rbf(1.0), 1.0, HvqConfig(noise=DetectionNoise(0.3)))
    assert np.all(noisy.result.attenuations <= clean.result.attenuations)
