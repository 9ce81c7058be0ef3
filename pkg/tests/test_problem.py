import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from proxrate import (
    LinearOperator,
    build_random_lasso,
    build_tridiagonal_lasso,
    condition_number,
    dense_spectrum,
    estimate_lipschitz,
    make_lasso,
    tridiagonal_spectrum,
)
from proxrate.problem import DENSE_SPECTRUM_MAX_DIM, SmoothOracle, make_quadratic, operator_spectrum


def dense_tridiagonal(n, d, o):
    return d * np.eye(n) + o * (np.eye(n, k=1) + np.eye(n, k=-1))


@pytest.mark.parametrize("n,d,o", [(1, 2.0, 1.0), (2, 2.0, 1.0), (7, 3.0, -0.5), (50, 2.0, 1.0), (200, 1.0, 0.3)])
def test_tridiagonal_spectrum_matches_dense_eigensolver(n, d, o):
    A = dense_tridiagonal(n, d, o)
    eig = np.linalg.eigvalsh(A.T @ A)
    mu, L = tridiagonal_spectrum(n, d, o)
    assert L == pytest.approx(eig[-1], rel=1e-12)
    assert mu == pytest.approx(eig[0], rel=1e-6, abs=1e-12)


def test_tridiagonal_spectrum_rejects_empty():
    with pytest.raises(ValueError):
        tridiagonal_spectrum(0, 2.0, 1.0)


def test_tridiagonal_operator_matches_dense(rng):
    op = LinearOperator.tridiagonal(9, 2.5, -0.7)
    A = dense_tridiagonal(9, 2.5, -0.7)
    x = rng.standard_normal(9)
    np.testing.assert_allclose(op.apply(x), A @ x, rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(op.apply_transpose(x), A.T @ x, rtol=1e-14, atol=1e-14)
    np.testing.assert_array_equal(op.to_dense(), A)
    assert op.shape == (9, 9)


def test_single_row_tridiagonal_operator():
    op = LinearOperator.tridiagonal(1, 3.0, 5.0)
    np.testing.assert_array_equal(op.apply(np.array([2.0])), [6.0])


def test_dense_operator_transpose_and_equality(rng):
    M = rng.standard_normal((4, 3))
    op = LinearOperator.dense(M)
    y = rng.standard_normal(4)
    np.testing.assert_allclose(op.apply_transpose(y), M.T @ y)
    assert op == LinearOperator.dense(M.copy())
    assert op != LinearOperator.dense(M + 1.0)
    assert LinearOperator.identity(3) == LinearOperator.dense(np.eye(3))


def test_dense_spectrum_against_eigvalsh(rng):
    M = rng.standard_normal((12, 5))
    eig = np.linalg.eigvalsh(M.T @ M)
    mu, L = dense_spectrum(LinearOperator.dense(M))
    assert mu == pytest.approx(eig[0], rel=1e-10)
    assert L == pytest.approx(eig[-1], rel=1e-12)


def test_dense_spectrum_wide_matrix_has_zero_mu(rng):
    mu, L = dense_spectrum(LinearOperator.dense(rng.standard_normal((3, 6))))
    assert mu == 0.0 and L > 0


def test_dense_spectrum_size_guard():
    op = LinearOperator.dense(np.zeros((1, DENSE_SPECTRUM_MAX_DIM + 1)))
    with pytest.raises(ValueError):
        dense_spectrum(op)


def test_estimate_lipschitz_agrees_with_closed_form():
    op = LinearOperator.tridiagonal(500, 2.0, 1.0)
    _, L = tridiagonal_spectrum(500, 2.0, 1.0)
    est = estimate_lipschitz(op)
    assert est <= L * (1 + 1e-12)
    assert est == pytest.approx(L, abs=1e-3)


def test_estimate_lipschitz_dense_and_zero(rng):
    M = rng.standard_normal((20, 10))
    assert estimate_lipschitz(LinearOperator.dense(M)) == pytest.approx(np.linalg.eigvalsh(M.T @ M)[-1], rel=1e-8)
    assert estimate_lipschitz(LinearOperator.dense(np.zeros((3, 3)))) == 0.0
    with pytest.raises(ValueError):
        estimate_lipschitz(LinearOperator.identity(2), iters=0)


def test_condition_number():
    assert condition_number(2.0, 8.0) == 4.0
    assert condition_number(0.0, 1.0) == math.inf
    with pytest.raises(ValueError):
        condition_number(-1.0, 1.0)


def finite_difference_gradient(fun, x, h=1e-6):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def test_lasso_gradient_matches_finite_differences(small_lasso, rng):
    x = rng.standard_normal(small_lasso.dimension)
    fd = finite_difference_gradient(small_lasso.smooth.value, x)
    np.testing.assert_allclose(small_lasso.smooth.gradient(x), fd, rtol=1e-6, atol=1e-6)


def test_lasso_objective_value(rng):
    M = rng.standard_normal((6, 4))
    b = rng.standard_normal(6)
    mu, L = dense_spectrum(LinearOperator.dense(M))
    problem = make_lasso(LinearOperator.dense(M), b, 0.3, mu, L)
    x = rng.standard_normal(4)
    expected = 0.5 * np.sum((M @ x - b) ** 2) + 0.3 * np.sum(np.abs(x))
    assert problem.objective(x) == pytest.approx(expected, rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-8, 1.0))
def test_objective_difference_matches_direct_subtraction(seed, radius):
    problem = build_random_lasso(8, 5, 0.5, 3.0, seed=3, lam=0.2)
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(5)
    x = y + radius * rng.standard_normal(5)
    direct = problem.objective(x) - problem.objective(y)
    assert problem.objective_difference(x, y) == pytest.approx(direct, abs=1e-12 * (1 + abs(problem.objective(y))))


def test_objective_difference_avoids_cancellation():
    # tiny perturbation of a point with a large objective: direct subtraction loses it
    problem = build_tridiagonal_lasso(50, 2.0, 1.0, 1e4, 1e-6)
    y = np.zeros(50)
    x = y.copy()
    x[0] = 1e-13
    exact = 0.5 * (4 * 1e-26 + 1e-26) - 1e4 * 3e-13 + 1e-6 * 1e-13
    assert problem.objective_difference(x, y) == pytest.approx(exact, rel=1e-9)


def test_strong_convexity_and_smoothness_bounds_hold(small_lasso, rng):
    f = small_lasso.smooth
    for _ in range(100):
        x, y = rng.standard_normal((2, small_lasso.dimension))
        d = x - y
        lin = f.value(y) + f.gradient(y) @ d
        assert f.value(x) >= lin + 0.5 * f.mu * (d @ d) - 1e-10
        assert f.value(x) <= lin + 0.5 * f.lipschitz * (d @ d) + 1e-10


def test_random_lasso_spectrum_is_prescribed():
    problem = build_random_lasso(30, 12, 0.01, 5.0, seed=11, lam=0.1)
    eig = np.linalg.eigvalsh(problem.operator.to_dense().T @ problem.operator.to_dense())
    assert eig[0] == pytest.approx(0.01, rel=1e-9)
    assert eig[-1] == pytest.approx(5.0, rel=1e-12)
    assert operator_spectrum(problem.operator) == pytest.approx((0.01, 5.0), rel=1e-9)


def test_random_lasso_is_seeded():
    a = build_random_lasso(10, 6, 0.1, 1.0, seed=5, lam=0.1)
    b = build_random_lasso(10, 6, 0.1, 1.0, seed=5, lam=0.1)
    c = build_random_lasso(10, 6, 0.1, 1.0, seed=6, lam=0.1)
    np.testing.assert_array_equal(a.operator.to_dense(), b.operator.to_dense())
    np.testing.assert_array_equal(a.b, b.b)
    assert not np.array_equal(a.b, c.b)


def test_random_lasso_rejects_bad_shapes():
    with pytest.raises(ValueError):
        build_random_lasso(3, 5, 0.1, 1.0, seed=0, lam=0.1)
    with pytest.raises(ValueError):
        build_random_lasso(3, 1, 0.1, 1.0, seed=0, lam=0.1)
    with pytest.raises(ValueError):
        build_random_lasso(5, 3, 2.0, 1.0, seed=0, lam=0.1)
    build_random_lasso(3, 1, 1.0, 1.0, seed=0, lam=0.1)


def test_make_lasso_validation():
    with pytest.raises(ValueError):
        make_lasso(LinearOperator.identity(3), [1.0, 2.0], 0.1, 1.0, 1.0)
    with pytest.raises(ValueError):
        make_lasso(LinearOperator.identity(2), [1.0, 2.0], -0.1, 1.0, 1.0)
    with pytest.raises(ValueError):
        make_lasso(LinearOperator.identity(2), [1.0, 2.0], 0.1, 2.0, 1.0)
    with pytest.raises(ValueError):
        SmoothOracle(lambda x: 0.0, lambda x: x, 0.0, 0.0)


def test_check_point_rejects_wrong_shape():
    problem = make_quadratic()
    with pytest.raises(ValueError):
        problem.objective(np.zeros(2))
    assert problem.objective([2.0]) == pytest.approx(2.0)


def test_identity_lasso_objective():
    problem = make_lasso(LinearOperator.identity(2), [0.0, 0.0], 0.0, 1.0, 1.0)
    assert problem.objective([1.0, 1.0]) == 1.0


def test_small_spectra_by_hand():
    assert tridiagonal_spectrum(1, 2.0, 1.0) == (4.0, 4.0)
    mu, L = tridiagonal_spectrum(3, 2.0, 1.0)
    assert mu == pytest.approx((2 - math.sqrt(2)) ** 2, rel=1e-12)
    assert L == pytest.approx((2 + math.sqrt(2)) ** 2, rel=1e-12)
    assert condition_number(1.0, 1.0) == 1.0 and condition_number(2.0, 4.0) == 2.0


def test_lipschitz_of_identity():
    assert estimate_lipschitz(LinearOperator.identity(5)) == pytest.approx(1.0, abs=1e-8)


def test_gradient_at_origin_on_truncated_tridiagonal():
    problem = build_tridiagonal_lasso(20, 2.0, 1.0, 1.0, 1e-6)
    A = dense_tridiagonal(20, 2.0, 1.0)
    np.testing.assert_allclose(problem.smooth.gradient(np.zeros(20)), -A.T @ np.ones(20), rtol=1e-15)


def test_benchmark_instance(benchmark):
    problem = benchmark.problem
    assert problem.b.shape == (500,) and np.all(problem.b == 1.0)
    assert problem.lam == 1e-6
    assert f"{problem.mu:.4e}" == "1.5461e-09" and f"{problem.lipschitz:.4f}" == "15.9997"
    assert benchmark.step == 0.05 < 1.0 / problem.lipschitz


def test_scalar_random_lasso():
    problem = build_random_lasso(1, 1, 4.0, 4.0, seed=0, lam=0.0)
    assert abs(problem.operator.to_dense()[0, 0]) == pytest.approx(2.0, rel=1e-15)


def test_random_lasso_singular_values_by_svd():
    problem = build_random_lasso(60, 50, 1e-3, 2.0, seed=4, lam=0.1)
    sv = np.linalg.svd(problem.operator.to_dense(), compute_uv=False)
    np.testing.assert_allclose(sv, np.linspace(math.sqrt(2.0), math.sqrt(1e-3), 50), rtol=1e-10)


def test_nonsmooth_part_is_convex_on_segments(small_lasso, rng):
    g = small_lasso.nonsmooth.value
    for _ in range(100):
        x, y = rng.standard_normal((2, small_lasso.dimension))
        a = rng.uniform()
        assert g(a * x + (1 - a) * y) <= a * g(x) + (1 - a) * g(y) + 1e-12


def test_gradient_is_lipschitz(small_lasso, rng):
    f = small_lasso.smooth
    for _ in range(100):
        x, y = rng.standard_normal((2, small_lasso.dimension))
        assert np.linalg.norm(f.gradient(x) - f.gradient(y)) <= f.lipschitz * np.linalg.norm(x - y) * (1 + 1e-12)
