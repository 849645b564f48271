import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyquls.dual import (
    DualQp,
    InfeasibleQp,
    build_dual,
    kkt_residual,
    project_box_hyperplane,
    recover_bias,
    rotate_dual,
    solve_dual,
    solve_qp_projected_gradient,
)
from hyquls.kernels import KernelSpec, gram_matrix
from hyquls.qsls import kernel_spectrum
from oracles import central_gradient, grid_search_dual


def _instance(seed, m, kernel=KernelSpec.rbf(1.0)):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((m, 2))
    y = rng.choice([-1.0, 1.0], m)
    y[:2] = (1.0, -1.0)
    return gram_matrix(kernel, x), y


def test_origin_and_two_point_objective():
    g, y = _instance(0, 2)
    for variant in ("printed", "signed"):
        dual = build_dual(g, y, 1.0, variant)
        assert dual.objective(np.zeros(2)) == 0.0
        for t in (0.1, -0.3, 0.25):
            expected = t * (y[0] - y[1]) - 0.5 * t * t * (g[0, 0] - 2 * g[0, 1] + g[1, 1])
            assert dual.objective([t, -t]) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("variant", ["printed", "signed", "standard"])
def test_gradient_matches_finite_differences(variant):
    g, y = _instance(1, 5)
    dual = build_dual(g, y, 1.0, variant)
    a = np.random.default_rng(2).uniform(-0.5, 0.5, 5)
    np.testing.assert_allclose(dual.gradient(a), central_gradient(dual.objective, a), atol=1e-6)


def test_printed_default_collapses_to_zero():
    g, y = _instance(3, 5)
    dual = build_dual(g, y, 1.0)
    assert dual.variant == "printed"
    sol = solve_dual(dual)
    np.testing.assert_array_equal(sol.alpha, np.zeros(5))
    assert sol.kkt_residual <= 1e-15


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 8))
def test_rotation_objective_invariance(seed, m):
    g, y = _instance(seed, m)
    dual = build_dual(g, y, 1.0, "signed")
    rq = rotate_dual(dual, kernel_spectrum(g))
    rng = np.random.default_rng(seed)
    for _ in range(100):
        a = rng.standard_normal(m)
        assert rq.objective(rq.rotate(a)) == pytest.approx(dual.objective(a), abs=1e-10)
        np.testing.assert_allclose(rq.unrotate(rq.rotate(a)), a, atol=1e-12)


def test_identity_kernel_rotation_is_relabeling():
    y = np.array([1.0, -1.0, 1.0])
    rq = rotate_dual(build_dual(np.eye(3), y, 2.0, "signed"), kernel_spectrum(np.eye(3)))
    perm = np.abs(rq.eigenvectors)
    np.testing.assert_allclose(perm @ perm.T, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(np.abs(rq.y_rot), np.abs(perm.T @ y), atol=1e-15)
    np.testing.assert_array_equal(rq.eigenvalues, np.ones(3))


def test_null_space_terms_linear_only():
    rng = np.random.default_rng(5)
    y = np.array([1.0, -1.0, 1.0, 1.0, -1.0, -1.0])
    x = np.column_stack([y, rng.standard_normal(6)])  # y lies in the range of K
    g = gram_matrix(KernelSpec.linear(), x)
    spec = kernel_spectrum(g)
    assert spec.rank == 2
    rq = rotate_dual(build_dual(g, y, 1.0, "signed"), spec)
    a = rng.standard_normal(6)
    cut = a.copy()
    cut[2:] = 0.0
    assert rq.objective(a) - rq.objective(cut) == pytest.approx(a[2:] @ rq.y_rot[2:], abs=1e-12)
    assert np.abs(rq.y_rot[2:]).max() < 1e-12
    full = solve_qp_projected_gradient(rq)
    pinned = solve_qp_projected_gradient(rq.restricted())
    assert full.objective == pytest.approx(pinned.objective, abs=1e-10)


def test_rotated_box_is_ordered_interval():
    g, y = _instance(6, 4)
    rq = rotate_dual(build_dual(g, y, 2.0), kernel_spectrum(g))
    lo, hi = rq.bounds
    assert np.all(lo <= hi) and np.all(lo <= 0) and np.all(hi >= 0)
    with pytest.raises(ValueError):
        rotate_dual(build_dual(g, y, 1.0, "standard"), kernel_spectrum(g))
    with pytest.raises(ValueError):
        rotate_dual(build_dual(g[:3, :3], y[:3], 1.0), kernel_spectrum(g))


def test_projection_is_euclidean():
    rng = np.random.default_rng(7)
    for _ in range(50):
        v = rng.standard_normal(6) * 2
        c = rng.choice([-1.0, 1.0], 6)
        lo, hi = np.where(c > 0, 0.0, -1.0), np.where(c > 0, 1.0, 0.0)
        p = project_box_hyperplane(v, c, lo, hi)
        assert abs(c @ p) <= 1e-12 and np.all(p >= lo) and np.all(p <= hi)
        # variational inequality for the projection onto a convex set
        for _ in range(20):
            q = project_box_hyperplane(rng.standard_normal(6), c, lo, hi)
            assert (v - p) @ (q - p) <= 1e-10
    with pytest.raises(InfeasibleQp):
        project_box_hyperplane(np.zeros(2), np.ones(2), np.ones(2), 2 * np.ones(2))


def test_interior_optimum_matches_closed_form():
    # K = 2I with balanced labels: the equality-constrained maximizer is y/2,
    # which sits strictly inside the signed box for gamma = 10
    g = 2.0 * np.eye(4)
    y = np.array([1.0, -1.0, 1.0, -1.0])
    kinv = np.linalg.inv(g)
    mu = (np.ones(4) @ kinv @ y) / (np.ones(4) @ kinv @ np.ones(4))
    closed = kinv @ (y - mu)
    sol = solve_dual(build_dual(g, y, 10.0, "signed"))
    assert sol.converged
    np.testing.assert_allclose(sol.alpha, closed, atol=1e-6)
    assert not sol.b_flagged and sol.b == pytest.approx(0.0, abs=1e-9)


def test_invalid_gamma_and_tol():
    with pytest.raises(ValueError):
        build_dual(np.eye(2), [1, -1], -1.0)
    with pytest.raises(ValueError):
        solve_qp_projected_gradient(build_dual(np.eye(2), [1, -1], 1.0), tol=0.0)


def test_iteration_cap_reports_nonconvergence():
    g, y = _instance(8, 6)
    sol = solve_qp_projected_gradient(build_dual(g, y, 100.0, "signed"), tol=1e-14, max_iters=3)
    assert not sol.converged and sol.iterations == 3 and sol.pg_norm > 1e-14


@pytest.mark.parametrize("seed,m", [(10, 3), (11, 4), (12, 4)])
@pytest.mark.parametrize("variant", ["signed", "standard"])
def test_matches_grid_search(seed, m, variant):
    g, y = _instance(seed, m)
    gamma = 0.01
    sol = solve_dual(build_dual(g, y, gamma, variant))
    best, _ = grid_search_dual(g, y, gamma, variant)
    assert sol.objective >= best - 1e-6
    assert abs(sol.objective - best) <= 1e-6
    assert sol.kkt_residual <= 1e-6


def test_separable_kkt():
    x = np.array([[2.0, 0.0], [3.0, 1.0], [-2.0, 0.5], [-3.0, -1.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    sol = solve_dual(build_dual(gram_matrix(KernelSpec.linear(), x), y, 100.0, "signed"), tol=1e-8)
    assert sol.converged and sol.kkt_residual <= 1e-6
    assert np.all(sol.slacks <= 1e-6)


def test_hand_built_violation():
    # K = I, a = (2, -2), b = 0: y f = 2 and multiplier 2, so |2 (2 - 1 + 0)| = 2
    dual = build_dual(np.eye(2), [1.0, -1.0], 10.0, "signed")
    resid, xi, b, flagged = kkt_residual(dual, [2.0, -2.0], b=0.0)
    assert resid == 2.0 and b == 0.0 and not flagged
    np.testing.assert_array_equal(xi, [0.0, 0.0])


def test_inactive_constraints_zero_residual():
    dual = build_dual(np.eye(3), [1.0, 1.0, 1.0], 1.0, "signed")
    assert kkt_residual(dual, np.zeros(3), b=2.0)[0] == 0.0


def test_bias_fallback_is_flagged():
    dual = build_dual(np.eye(2), [1.0, -1.0], 1.0, "signed")
    b, flagged = recover_bias(dual, [0.5, -0.5])
    assert flagged and b == pytest.approx(0.0)
    b, flagged = recover_bias(dual, [0.25, -0.25])
    assert not flagged and b == pytest.approx(0.75)
