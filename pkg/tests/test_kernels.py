import numpy as np
import pytest

from drmean import kernels as K
from drmean.errors import (
    DimensionMismatch,
    NotConverged,
    OneClassOnly,
    RankDeficient,
    Separated,
)


class TestLeastSquares:
    def test_exact_linear_fit(self):
        r = K.least_squares([[1, 0], [1, 1], [1, 2]], [1, 2, 3])
        assert np.allclose(r.coefficients, [1.0, 1.0], atol=1e-12)
        assert r.converged

    def test_intercept_only_is_mean(self):
        r = K.least_squares([[1], [1], [1], [1]], [2, 4, 6, 8], [1, 1, 1, 1])
        assert np.allclose(r.coefficients, [5.0], atol=1e-12)

    def test_weighted_normal_equations(self):
        # 2x2 weighted system solved by hand: beta = (-1/11, 21/22)
        r = K.least_squares(
            [[1, 0], [1, 1], [1, 2], [1, 3]], [0, 1, 1, 3], [1, 2, 1, 2]
        )
        assert np.allclose(r.coefficients, [-1 / 11, 21 / 22], atol=1e-12)

    @pytest.mark.parametrize("seed", range(8))
    def test_weighted_residual_orthogonality(self, seed):
        rng = np.random.default_rng(seed)
        n, p = 80 + seed * 37, 2 + seed % 4
        X = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
        y = rng.standard_normal(n) * 10
        w = rng.random(n) * 3
        w[:: p + 2] = 0.0  # zero weights must be tolerated
        r = K.least_squares(X, y, w)
        resid = y - X @ r.coefficients
        worst = np.max(np.abs(X.T @ (w * resid)))
        assert worst / (1.0 + np.max(np.abs(y))) <= 1e-8

    def test_rank_deficient_duplicate_column(self):
        X = [[1, 2, 2], [1, 3, 3], [1, 4, 4], [1, 5, 5]]
        with pytest.raises(RankDeficient):
            K.least_squares(X, [1, 2, 3, 4])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            K.least_squares([[1, 0], [1, 1]], [1, 2, 3])
        with pytest.raises(DimensionMismatch):
            K.least_squares([[1], [1]], [1, 2], [1, 2, 3])

    def test_design_matrix_wrapper(self):
        dm = K.DesignMatrix(np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]]),
                            ("const", "x"))
        r = K.least_squares(dm, [1, 2, 3])
        assert np.allclose(r.coefficients, [1.0, 1.0])
        with pytest.raises(DimensionMismatch):
            K.DesignMatrix(np.ones((2, 3)), ("a", "b", "c"))  # n < p


class TestLogisticNewton:
    def test_intercept_only_mle_is_sample_proportion(self):
        r = K.logistic_newton(np.ones((4, 1)), [1, 1, 1, 0])
        assert abs(r.coefficients[0] - np.log(3.0)) <= 1e-10
        assert abs(K.expit(r.coefficients[0]) - 0.75) <= 1e-12
        assert r.gradient_norm <= K.NEWTON_TOL

    def test_balanced_two_points(self):
        r = K.logistic_newton(np.ones((2, 1)), [1, 0])
        assert abs(r.coefficients[0]) <= 1e-12

    def test_perfect_separation_raises(self):
        with pytest.raises(Separated):
            K.logistic_newton([[1, -1], [1, 0], [1, 1], [1, 2]], [0, 0, 1, 1])

    def test_one_class_only(self):
        with pytest.raises(OneClassOnly):
            K.logistic_newton(np.ones((3, 1)), [1, 1, 1])

    def test_not_converged_with_tiny_iteration_budget(self):
        rng = np.random.default_rng(3)
        X = np.column_stack([np.ones(200), rng.standard_normal(200)])
        t = (rng.random(200) < K.expit(X @ np.array([0.4, 1.0]))).astype(float)
        with pytest.raises(NotConverged):
            K.logistic_newton(X, t, maxit=1)

    @pytest.mark.parametrize("seed", range(6))
    def test_random_fit_invariants(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = 150 + 60 * seed
        X = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
        truth = rng.normal(scale=0.8, size=3)
        t = (rng.random(n) < K.expit(X @ truth)).astype(float)
        r = K.logistic_newton(X, t)
        # score at convergence
        assert r.gradient_norm <= K.NEWTON_TOL
        # deviance non-increasing across accepted steps (float slack)
        path = r.deviance_path
        assert np.all(np.diff(path) <= 1e-8 * (1.0 + path[:-1]))
        # warm restart converges without taking a step
        r2 = K.logistic_newton(X, t, start=r.coefficients)
        assert r2.iterations <= 1
        assert np.allclose(r2.coefficients, r.coefficients, atol=1e-10)


class TestExpit:
    def test_midpoint(self):
        assert K.expit(0.0) == 0.5

    def test_saturation_no_overflow(self):
        with np.errstate(over="raise"):
            v = K.expit(700.0)
            lo = K.expit(-700.0)
        assert v <= 1.0 and 1.0 - v <= 1e-300
        assert 0.0 < lo <= 1e-300

    def test_inverse_of_log_three(self):
        assert abs(K.expit(np.log(3.0)) - 0.75) <= 1e-15

    def test_antisymmetry_and_monotonicity_on_grid(self):
        u = np.linspace(-40.0, 40.0, 10_000)
        v = K.expit(u)
        assert np.max(np.abs(v + K.expit(-u) - 1.0)) <= 1e-15
        assert np.all(np.diff(v) >= 0.0)

    def test_vector_shape_round_trip(self):
        u = np.array([[0.0, 1.0], [-1.0, 2.0]])
        assert K.expit(u).shape == (2, 2)
