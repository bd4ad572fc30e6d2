"""Finite-sum objectives f = (1/n) sum_i f_i.

Three families are provided:

* :class:`PoissonKL`: Kullback-Leibler data fit D_KL(b, Ax) for nonnegative
  A and observations b, optionally grouped into row blocks (one component
  per projection angle in tomography) and optionally regularized by a
  log-barrier term that makes f relatively strongly convex w.r.t. the
  log-barrier reference function.
* :class:`LogisticL2`: l2-regularized logistic regression, optionally grouped
  into row blocks (one component per worker node in the distributed setting).
* :class:`DiagonalQuadratic`: per-component diagonal quadratics, used for the
  Euclidean-geometry test instances where everything has a closed form.

Objectives are immutable after construction and safe for concurrent reads.
All component gradients are plain gradients of f_i (not divided by n), so a
uniformly sampled component gradient is an unbiased estimate of grad f.
"""

import numpy as np
import scipy.sparse as sp

from .errors import DomainViolation, InvalidData
from .rng import make_rng


def _is_sparse(A):
    return sp.issparse(A)


def _sigmoid(t):
    """Numerically stable logistic sigmoid."""
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(t, dtype=float)))


def _log1pexp(t):
    """log(1 + exp(t)) without overflow."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t > 0
    out[pos] = t[pos] + np.log1p(np.exp(-t[pos]))
    out[~pos] = np.log1p(np.exp(t[~pos]))
    return out


class FiniteSumObjective:
    """Interface shared by all finite-sum objectives."""

    kind = None

    @property
    def n_components(self):
        raise NotImplementedError

    @property
    def dim(self):
        raise NotImplementedError

    def check_domain(self, x):
        """Raise DomainViolation if f cannot be evaluated at ``x``."""

    def value(self, x):
        """f(x) = (1/n) sum_i f_i(x)."""
        vals = [self.value_component(i, x) for i in range(self.n_components)]
        return float(np.mean(vals))

    def value_component(self, i, x):
        raise NotImplementedError

    def partial_grad(self, i, x):
        """grad f_i(x)."""
        raise NotImplementedError

    def full_grad(self, x):
        g = np.zeros(self.dim)
        for i in range(self.n_components):
            g += self.partial_grad(i, x)
        return g / self.n_components

    def hess_vec(self, x, u):
        """grad^2 f(x) @ u."""
        raise NotImplementedError

    def f_divergence(self, x, y):
        """D_f(x, y) = f(x) - f(y) - <grad f(y), x - y>."""
        return float(self.value(x) - self.value(y) - self.full_grad(y) @ (x - y))

    def component_divergence(self, i, x, y):
        """D_{f_i}(x, y), used by the SAGA/SVRG potentials."""
        return float(
            self.value_component(i, x)
            - self.value_component(i, y)
            - self.partial_grad(i, y) @ (x - y)
        )

    # Euclidean regularity bounds of f, used by inner solvers. Subclasses
    # override with data-dependent estimates.
    def smoothness_bound(self):
        raise NotImplementedError

    def strong_convexity_bound(self):
        return 0.0


def _power_iteration_norm(matvec, d, iters=100):
    """Largest eigenvalue of a symmetric PSD operator, deterministic start."""
    v = np.ones(d) / np.sqrt(d)
    lam = 0.0
    for _ in range(iters):
        w = matvec(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        lam = float(v @ w)
        v = w / nw
    return lam


class PoissonKL(FiniteSumObjective):
    """f(x) = (1/n) sum_i [ D_KL(b_i, A_i x) + barrier_weight * h_bar(x) ].

    Rows may be grouped into blocks; component i is the KL fit of block i.
    Terms with b_r = 0 contribute (A x)_r to the value and the row a_r to the
    gradient (the 0 log 0 = 0 limit). ``barrier_weight`` adds
    barrier_weight * (-sum log x_j) to every component, which makes f
    relatively barrier_weight-strongly convex w.r.t. the log-barrier.
    """

    kind = "poisson_kl"

    def __init__(self, A, b, groups=None, barrier_weight=0.0):
        b = np.asarray(b, dtype=float)
        if (_is_sparse(A) and (A < 0).nnz > 0) or (not _is_sparse(A) and np.any(A < 0)):
            raise InvalidData("poisson_kl: A must be nonnegative")
        if np.any(b < 0):
            raise InvalidData("poisson_kl: b must be nonnegative")
        self.A = A.tocsr() if _is_sparse(A) else np.asarray(A, dtype=float)
        self.b = b
        self.barrier_weight = float(barrier_weight)
        if groups is None:
            groups = [np.array([i]) for i in range(A.shape[0])]
        self.groups = [np.asarray(g, dtype=np.int64) for g in groups]
        self._blocks = [(self.A[g], self.b[g]) for g in self.groups]

    @property
    def n_components(self):
        return len(self.groups)

    @property
    def dim(self):
        return self.A.shape[1]

    def _residual(self, A, x):
        r = A @ x
        return np.asarray(r).ravel()

    def _check_rates(self, rates, b):
        bad = np.flatnonzero((b > 0) & (rates <= 0))
        if bad.size:
            raise DomainViolation(
                f"poisson_kl: (Ax)_i <= 0 at an observed row", index=int(bad[0])
            )

    def check_domain(self, x):
        if self.barrier_weight > 0 and np.any(x <= 0):
            raise DomainViolation("poisson_kl: barrier requires x > 0")
        self._check_rates(self._residual(self.A, x), self.b)

    def _kl_terms(self, rates, b):
        self._check_rates(rates, b)
        pos = b > 0
        val = float(np.sum(rates[~pos]))
        if np.any(pos):
            bp, rp = b[pos], rates[pos]
            val += float(np.sum(bp * np.log(bp / rp) - bp + rp))
        return val

    def _barrier_value(self, x):
        if self.barrier_weight == 0.0:
            return 0.0
        if np.any(x <= 0):
            raise DomainViolation("poisson_kl: barrier requires x > 0")
        return -self.barrier_weight * float(np.sum(np.log(x)))

    def value(self, x):
        rates = self._residual(self.A, x)
        return self._kl_terms(rates, self.b) / self.n_components + self._barrier_value(x)

    def value_component(self, i, x):
        Ai, bi = self._blocks[i]
        return self._kl_terms(self._residual(Ai, x), bi) + self._barrier_value(x)

    def _kl_grad(self, A, b, x):
        rates = self._residual(A, x)
        self._check_rates(rates, b)
        coeff = np.ones_like(rates)
        pos = b > 0
        coeff[pos] = 1.0 - b[pos] / rates[pos]
        g = A.T @ coeff
        return np.asarray(g).ravel()

    def partial_grad(self, i, x):
        Ai, bi = self._blocks[i]
        g = self._kl_grad(Ai, bi, x)
        if self.barrier_weight:
            g = g - self.barrier_weight / x
        return g

    def full_grad(self, x):
        g = self._kl_grad(self.A, self.b, x) / self.n_components
        if self.barrier_weight:
            g = g - self.barrier_weight / x
        return g

    def hess_vec(self, x, u):
        rates = self._residual(self.A, x)
        self._check_rates(rates, self.b)
        w = np.zeros_like(rates)
        pos = self.b > 0
        w[pos] = self.b[pos] / rates[pos] ** 2
        Au = np.asarray(self.A @ u).ravel()
        Hu = np.asarray(self.A.T @ (w * Au)).ravel() / self.n_components
        if self.barrier_weight:
            Hu = Hu + self.barrier_weight * u / x**2
        return Hu

    def smoothness_bound(self):
        # No global Euclidean bound exists near the boundary; callers needing
        # one must use the relative constant instead.
        raise InvalidData("poisson_kl has no global Euclidean smoothness bound")


def poisson_rel_L(A, b, n_components=None):
    """Relative smoothness constant of the Poisson objective w.r.t. the
    log-barrier: (1/n) max_j sum_{i in supp(col j)} b_i.

    Exploits the column sparsity of A; always at most the dense bound
    sum_i b_i / n, with equality when A has no zero entries.
    """
    b = np.asarray(b, dtype=float)
    if np.any(b < 0):
        raise InvalidData("poisson_rel_L: b must be nonnegative")
    if n_components is None:
        n_components = len(b)
    if _is_sparse(A):
        if (A < 0).nnz > 0:
            raise InvalidData("poisson_rel_L: A must be nonnegative")
        support = A.copy().tocsr()
        support.data = np.ones_like(support.data)
        col_sums = np.asarray(support.T @ b).ravel()
    else:
        A = np.asarray(A, dtype=float)
        if np.any(A < 0):
            raise InvalidData("poisson_rel_L: A must be nonnegative")
        col_sums = (A > 0).T @ b
    if col_sums.size == 0:
        return 0.0
    return float(np.max(col_sums)) / n_components


class LogisticL2(FiniteSumObjective):
    """f_i(x) = (1/N_i) sum_{r in block i} log(1 + exp(-y_r <a_r, x>))
    + (lam/2) ||x||^2, with labels y in {-1, +1}.

    Ungrouped, every row is its own component (N_i = 1).
    """

    kind = "logistic_l2"

    def __init__(self, A, labels, lam=0.0, groups=None):
        labels = np.asarray(labels, dtype=float)
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise InvalidData("logistic_l2: labels must be in {-1, +1}")
        if lam < 0:
            raise InvalidData("logistic_l2: lam must be nonnegative")
        self.A = A.tocsr() if _is_sparse(A) else np.asarray(A, dtype=float)
        self.labels = labels
        self.lam = float(lam)
        if groups is None:
            groups = [np.array([i]) for i in range(A.shape[0])]
        self.groups = [np.asarray(g, dtype=np.int64) for g in groups]
        self._blocks = [(self.A[g], self.labels[g]) for g in self.groups]
        # per-row weight of the Hessian/value of the full objective
        w = np.zeros(A.shape[0])
        for g in self.groups:
            w[g] = 1.0 / (len(g) * self.n_components)
        self._row_weight = w

    @property
    def n_components(self):
        return len(self.groups)

    @property
    def dim(self):
        return self.A.shape[1]

    def _margins(self, A, y, x):
        z = np.asarray(A @ x).ravel()
        return y * z

    def value_component(self, i, x):
        Ai, yi = self._blocks[i]
        m = self._margins(Ai, yi, x)
        return float(np.mean(_log1pexp(-m))) + 0.5 * self.lam * float(x @ x)

    def value(self, x):
        m = self._margins(self.A, self.labels, x)
        return float(self._row_weight @ _log1pexp(-m)) + 0.5 * self.lam * float(x @ x)

    def partial_grad(self, i, x):
        Ai, yi = self._blocks[i]
        m = self._margins(Ai, yi, x)
        s = _sigmoid(-m)
        g = Ai.T @ (-yi * s / len(yi))
        return np.asarray(g).ravel() + self.lam * x

    def full_grad(self, x):
        m = self._margins(self.A, self.labels, x)
        s = _sigmoid(-m)
        g = self.A.T @ (-self.labels * s * self._row_weight)
        return np.asarray(g).ravel() + self.lam * x

    def hess_vec(self, x, u):
        m = self._margins(self.A, self.labels, x)
        s = _sigmoid(m)
        w = s * (1.0 - s) * self._row_weight
        Au = np.asarray(self.A @ u).ravel()
        Hu = self.A.T @ (w * Au)
        return np.asarray(Hu).ravel() + self.lam * u

    def smoothness_bound(self):
        def mv(v):
            Av = np.asarray(self.A @ v).ravel()
            return np.asarray(self.A.T @ (self._row_weight * Av)).ravel()

        return 0.25 * _power_iteration_norm(mv, self.dim) + self.lam

    def strong_convexity_bound(self):
        return self.lam


class DiagonalQuadratic(FiniteSumObjective):
    """f_i(x) = (1/2) sum_j Q_ij (x_j - C_ij)^2 with positive weights Q.

    The minimizer of f is closed form, which makes these instances exact
    oracles for the Euclidean-geometry solvers.
    """

    kind = "quadratic"

    def __init__(self, weights, centers):
        Q = np.asarray(weights, dtype=float)
        C = np.asarray(centers, dtype=float)
        if Q.shape != C.shape:
            raise InvalidData("quadratic: weights and centers must share a shape")
        if np.any(Q <= 0):
            raise InvalidData("quadratic: weights must be positive")
        self.Q = Q
        self.C = C

    @property
    def n_components(self):
        return self.Q.shape[0]

    @property
    def dim(self):
        return self.Q.shape[1]

    def value_component(self, i, x):
        d = x - self.C[i]
        return 0.5 * float(self.Q[i] @ (d * d))

    def value(self, x):
        d = x[None, :] - self.C
        return 0.5 * float(np.sum(self.Q * d * d)) / self.n_components

    def partial_grad(self, i, x):
        return self.Q[i] * (x - self.C[i])

    def full_grad(self, x):
        return np.mean(self.Q * (x[None, :] - self.C), axis=0)

    def hess_vec(self, x, u):
        return np.mean(self.Q, axis=0) * u

    def minimizer(self):
        return np.sum(self.Q * self.C, axis=0) / np.sum(self.Q, axis=0)

    def smoothness_bound(self):
        return float(np.max(self.Q))

    def strong_convexity_bound(self):
        return float(np.min(np.mean(self.Q, axis=0)))


def rel_constants_logistic(obj, ref, samples=100, seed=0, radius=1.0):
    """Sampled bounds on the relative regularity of ``obj`` w.r.t. ``ref``.

    Draws random points x and directions u and evaluates the Rayleigh-type
    ratio <u, H_f(x) u> / <u, H_h(x) u>. Returns (L_est, mu_est, samples).
    Advisory only: the bounds hold on the sampled set, not globally.
    """
    rng = make_rng(seed)
    ratios = []
    for _ in range(samples):
        x = radius * rng.standard_normal(obj.dim)
        u = rng.standard_normal(obj.dim)
        num = float(u @ obj.hess_vec(x, u))
        if hasattr(ref, "hess_vec"):
            den = float(u @ ref.hess_vec(x, u))
        else:
            den = float(u @ u)  # Euclidean reference
        ratios.append(num / den)
    return float(np.max(ratios)), float(np.min(ratios)), samples
