"""Tests for reference functions and the mirror step."""

import numpy as np
import pytest

from bregopt import (
    Euclidean,
    LogBarrier,
    LogisticL2,
    NegEntropy,
    Preconditioner,
    StepOutOfDomain,
    make_reference,
    mirror_step,
)
from bregopt.rng import make_rng

KINDS = ("euclidean", "log_barrier", "neg_entropy")


def interior_point(kind, rng, d):
    if kind == "euclidean":
        return rng.normal(size=d)
    return rng.uniform(0.2, 2.0, size=d)


class TestLogBarrier:
    def test_grad(self):
        ref = LogBarrier()
        np.testing.assert_allclose(ref.grad(np.array([1.0, 2.0])), [-1.0, -0.5])

    def test_divergence_closed_form(self):
        ref = LogBarrier()
        x = np.array([np.e])
        y = np.array([1.0])
        assert ref.divergence(x, y) == pytest.approx(np.e - 2.0, rel=1e-12)

    def test_mirror_step_scalar(self):
        ref = LogBarrier()
        out = mirror_step(ref, np.array([1.0]), np.array([1.0]), 0.5)
        np.testing.assert_allclose(out, [2.0 / 3.0], rtol=1e-12)

    def test_step_out_of_domain(self):
        ref = LogBarrier()
        with pytest.raises(StepOutOfDomain) as info:
            mirror_step(ref, np.array([1.0]), np.array([-3.0]), 0.5)
        assert info.value.index == 0

    def test_divergence_nonnegative(self):
        ref = LogBarrier()
        rng = make_rng(0)
        for _ in range(50):
            x = rng.uniform(0.1, 3.0, size=4)
            y = rng.uniform(0.1, 3.0, size=4)
            assert ref.divergence(x, y) >= -1e-12


class TestEuclidean:
    def test_mirror_step_is_gradient_step(self):
        ref = Euclidean()
        out = mirror_step(ref, np.array([1.0, 2.0]), np.array([1.0, 0.0]), 0.5)
        np.testing.assert_allclose(out, [0.5, 2.0])

    def test_divergence_is_half_squared_distance(self):
        ref = Euclidean()
        x = np.array([1.0, -2.0])
        y = np.array([0.0, 1.0])
        assert ref.divergence(x, y) == pytest.approx(0.5 * np.sum((x - y) ** 2))


class TestNegEntropy:
    def test_grad_and_dual_grad(self):
        ref = NegEntropy()
        x = np.array([0.5, 2.0])
        np.testing.assert_allclose(ref.grad(x), np.log(x) + 1.0)
        np.testing.assert_allclose(ref.grad_conjugate(ref.grad(x)), x, rtol=1e-12)


class TestConjugatePairs:
    @pytest.mark.parametrize("kind", KINDS)
    def test_grad_roundtrip(self, kind):
        ref = make_reference(kind)
        rng = make_rng(3)
        for _ in range(20):
            x = interior_point(kind, rng, 5)
            back = ref.grad_conjugate(ref.grad(x))
            np.testing.assert_allclose(back, x, rtol=1e-9, atol=1e-12)

    @pytest.mark.parametrize("kind", KINDS)
    def test_fenchel_equality(self, kind):
        ref = make_reference(kind)
        rng = make_rng(4)
        for _ in range(20):
            x = interior_point(kind, rng, 5)
            y = ref.grad(x)
            total = ref.value(x) + ref.conjugate_value(y)
            assert total == pytest.approx(float(x @ y), rel=1e-9, abs=1e-9)

    @pytest.mark.parametrize("kind", KINDS)
    def test_grad_matches_finite_difference(self, kind):
        ref = make_reference(kind)
        rng = make_rng(5)
        x = interior_point(kind, rng, 4)
        g = ref.grad(x)
        eps = 1e-6
        for j in range(4):
            e = np.zeros(4)
            e[j] = eps
            fd = (ref.value(x + e) - ref.value(x - e)) / (2 * eps)
            assert g[j] == pytest.approx(fd, rel=1e-5, abs=1e-5)


class TestMakeReference:
    def test_known_kinds(self):
        assert isinstance(make_reference("euclidean"), Euclidean)
        assert isinstance(make_reference("log_barrier"), LogBarrier)
        assert isinstance(make_reference("neg_entropy"), NegEntropy)

    def test_unknown_kind(self):
        with pytest.raises(Exception):
            make_reference("not_a_reference")


class TestPreconditioner:
    def build(self):
        rng = make_rng(8)
        A = rng.normal(size=(30, 5))
        labels = np.sign(rng.normal(size=30))
        labels[labels == 0] = 1.0
        inner = LogisticL2(A, labels, lam=0.01)
        return Preconditioner(inner, c_prec=0.1, inner_tol=1e-10, inner_passes=200)

    def test_grad_conjugate_inverts_grad(self):
        ref = self.build()
        rng = make_rng(9)
        x = rng.normal(size=5) * 0.5
        back = ref.grad_conjugate(ref.grad(x))
        np.testing.assert_allclose(back, x, rtol=1e-6, atol=1e-6)

    def test_divergence_nonnegative_and_zero_at_equal(self):
        ref = self.build()
        rng = make_rng(10)
        x = rng.normal(size=5) * 0.5
        y = rng.normal(size=5) * 0.5
        assert ref.divergence(x, y) >= -1e-12
        assert ref.divergence(x, x) == pytest.approx(0.0, abs=1e-12)

    def test_dual_divergence_matches_envelope_form(self):
        # independent route: h*(y) = <x_y, y> - h(x_y) at x_y = grad h*(y),
        # then D_{h*}(a, b) = h*(a) - h*(b) - <grad h*(b), a - b>
        ref = self.build()
        rng = make_rng(11)
        x = rng.normal(size=5) * 0.5
        y = rng.normal(size=5) * 0.5
        a, b = ref.grad(x), ref.grad(y)
        xa, xb = ref.grad_conjugate(a), ref.grad_conjugate(b)
        conj = lambda point, arg: float(point @ arg) - ref.value(point)
        direct = conj(xa, a) - conj(xb, b) - float(xb @ (a - b))
        assert ref.dual_divergence(a, b) == pytest.approx(direct, rel=1e-5, abs=1e-7)
