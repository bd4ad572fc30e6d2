"""Tests for the finite-sum objectives and relative-smoothness constants."""

import numpy as np
import pytest
import scipy.sparse as sp

from bregopt import (
    DiagonalQuadratic,
    DomainViolation,
    InvalidData,
    LogisticL2,
    PoissonKL,
    poisson_rel_L,
)
from bregopt.rng import make_rng


def finite_difference_grad(f, x, eps=1e-6):
    g = np.zeros_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = eps
        g[j] = (f(x + e) - f(x - e)) / (2 * eps)
    return g


class TestPoissonKL:
    def test_scalar_value_and_grad(self):
        obj = PoissonKL(np.array([[2.0]]), np.array([1.0]))
        x = np.array([1.0])
        assert obj.value(x) == pytest.approx(1.0 - np.log(2.0), rel=1e-12)
        np.testing.assert_allclose(obj.full_grad(x), [1.0], rtol=1e-12)

    def test_zero_count_convention(self):
        # a row with b_i = 0 contributes (Ax)_i to the value
        obj = PoissonKL(np.array([[1.0], [3.0]]), np.array([0.0, 0.0]))
        x = np.array([2.0])
        assert obj.value(x) == pytest.approx((2.0 + 6.0) / 2.0)

    def test_full_grad_is_mean_of_partials(self):
        rng = make_rng(1)
        A = rng.uniform(0.1, 1.0, size=(6, 3))
        b = rng.uniform(0.5, 3.0, size=6)
        obj = PoissonKL(A, b)
        x = rng.uniform(0.5, 2.0, size=3)
        mean_partial = np.mean([obj.partial_grad(i, x) for i in range(6)], axis=0)
        np.testing.assert_allclose(obj.full_grad(x), mean_partial, rtol=1e-12)

    def test_grad_matches_finite_difference(self):
        rng = make_rng(2)
        A = rng.uniform(0.1, 1.0, size=(5, 3))
        b = rng.uniform(0.5, 3.0, size=5)
        obj = PoissonKL(A, b, barrier_weight=0.3)
        x = rng.uniform(0.5, 2.0, size=3)
        fd = finite_difference_grad(obj.value, x)
        np.testing.assert_allclose(obj.full_grad(x), fd, rtol=1e-5, atol=1e-5)

    def test_hess_vec_matches_finite_difference(self):
        rng = make_rng(3)
        A = rng.uniform(0.1, 1.0, size=(5, 3))
        b = rng.uniform(0.5, 3.0, size=5)
        obj = PoissonKL(A, b)
        x = rng.uniform(0.5, 2.0, size=3)
        u = rng.normal(size=3)
        eps = 1e-6
        fd = (obj.full_grad(x + eps * u) - obj.full_grad(x - eps * u)) / (2 * eps)
        np.testing.assert_allclose(obj.hess_vec(x, u), fd, rtol=1e-5, atol=1e-5)

    def test_grouped_components(self):
        rng = make_rng(4)
        A = rng.uniform(0.1, 1.0, size=(6, 3))
        b = rng.uniform(0.5, 3.0, size=6)
        groups = [np.array([0, 1, 2]), np.array([3, 4, 5])]
        obj = PoissonKL(A, b, groups=groups)
        assert obj.n_components == 2
        x = rng.uniform(0.5, 2.0, size=3)
        mean_partial = np.mean([obj.partial_grad(i, x) for i in range(2)], axis=0)
        np.testing.assert_allclose(obj.full_grad(x), mean_partial, rtol=1e-12)

    def test_domain_violation(self):
        obj = PoissonKL(np.array([[1.0]]), np.array([2.0]))
        with pytest.raises(DomainViolation):
            obj.value(np.array([0.0]))

    def test_negative_data_rejected(self):
        with pytest.raises(InvalidData):
            PoissonKL(np.array([[-1.0]]), np.array([1.0]))
        with pytest.raises(InvalidData):
            PoissonKL(np.array([[1.0]]), np.array([-1.0]))

    def test_no_euclidean_smoothness_bound(self):
        obj = PoissonKL(np.array([[1.0]]), np.array([1.0]))
        with pytest.raises(InvalidData):
            obj.smoothness_bound()


class TestPoissonRelL:
    def test_identity_matrix(self):
        assert poisson_rel_L(np.eye(2), np.array([2.0, 4.0])) == pytest.approx(2.0)

    def test_dense_matrix_is_mean_of_counts(self):
        A = np.full((3, 2), 0.7)
        b = np.array([1.0, 2.0, 3.0])
        assert poisson_rel_L(A, b) == pytest.approx(np.sum(b) / 3.0)

    def test_zero_counts(self):
        assert poisson_rel_L(np.eye(3), np.zeros(3)) == 0.0

    def test_sparse_at_most_dense(self):
        rng = make_rng(5)
        for _ in range(20):
            mask = rng.random(size=(8, 4)) < 0.3
            A = rng.uniform(0.1, 1.0, size=(8, 4)) * mask
            b = rng.uniform(0.0, 5.0, size=8)
            assert poisson_rel_L(A, b) <= np.sum(b) / 8.0 + 1e-12

    def test_sparse_matrix_input(self):
        rng = make_rng(6)
        A = rng.uniform(0.1, 1.0, size=(8, 4)) * (rng.random(size=(8, 4)) < 0.4)
        b = rng.uniform(0.0, 5.0, size=8)
        dense = poisson_rel_L(A, b)
        sparse = poisson_rel_L(sp.csr_matrix(A), b)
        assert sparse == pytest.approx(dense, rel=1e-12)

    def test_grouped_component_count(self):
        A = np.eye(4)
        b = np.array([1.0, 2.0, 3.0, 4.0])
        assert poisson_rel_L(A, b, n_components=2) == pytest.approx(2.0)


class TestLogisticL2:
    def build(self, lam=0.1):
        rng = make_rng(7)
        A = rng.normal(size=(20, 4))
        labels = np.sign(rng.normal(size=20))
        labels[labels == 0] = 1.0
        return LogisticL2(A, labels, lam=lam), rng

    def test_grad_matches_finite_difference(self):
        obj, rng = self.build()
        x = rng.normal(size=4) * 0.5
        fd = finite_difference_grad(obj.value, x)
        np.testing.assert_allclose(obj.full_grad(x), fd, rtol=1e-5, atol=1e-5)

    def test_full_grad_is_mean_of_partials(self):
        obj, rng = self.build()
        x = rng.normal(size=4) * 0.5
        mean_partial = np.mean(
            [obj.partial_grad(i, x) for i in range(obj.n_components)], axis=0
        )
        np.testing.assert_allclose(obj.full_grad(x), mean_partial, rtol=1e-10, atol=1e-12)

    def test_hess_vec_matches_finite_difference(self):
        obj, rng = self.build()
        x = rng.normal(size=4) * 0.5
        u = rng.normal(size=4)
        eps = 1e-6
        fd = (obj.full_grad(x + eps * u) - obj.full_grad(x - eps * u)) / (2 * eps)
        np.testing.assert_allclose(obj.hess_vec(x, u), fd, rtol=1e-4, atol=1e-5)

    def test_smoothness_bound_dominates_hessian(self):
        obj, rng = self.build()
        L = obj.smoothness_bound()
        x = rng.normal(size=4) * 0.5
        u = rng.normal(size=4)
        u = u / np.linalg.norm(u)
        assert float(u @ obj.hess_vec(x, u)) <= L + 1e-8

    def test_value_at_zero(self):
        obj, _ = self.build(lam=0.0)
        assert obj.value(np.zeros(4)) == pytest.approx(np.log(2.0), rel=1e-10)


class TestDiagonalQuadratic:
    def test_minimizer(self):
        rng = make_rng(8)
        Q = rng.uniform(0.5, 2.0, size=(6, 3))
        C = rng.normal(size=(6, 3))
        obj = DiagonalQuadratic(Q, C)
        xs = obj.minimizer()
        np.testing.assert_allclose(obj.full_grad(xs), np.zeros(3), atol=1e-12)
        x = xs + rng.normal(size=3)
        assert obj.value(x) >= obj.value(xs)

    def test_grad_matches_finite_difference(self):
        rng = make_rng(9)
        Q = rng.uniform(0.5, 2.0, size=(4, 3))
        C = rng.normal(size=(4, 3))
        obj = DiagonalQuadratic(Q, C)
        x = rng.normal(size=3)
        fd = finite_difference_grad(obj.value, x)
        np.testing.assert_allclose(obj.full_grad(x), fd, rtol=1e-5, atol=1e-5)
