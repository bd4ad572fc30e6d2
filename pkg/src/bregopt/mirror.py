"""Reference functions (mirror maps) and the Bregman mirror step.

A reference function h is strictly convex and twice differentiable on the
interior of its domain. It induces the Bregman divergence

    D_h(x, y) = h(x) - h(y) - <grad h(y), x - y>,

and the mirror step x+ = argmin_z { eta <g, z> + D_h(z, x) }, computed in
dual form as grad h*(grad h(x) - eta g).

Four reference functions are provided:

* :class:`Euclidean`      h(x) = ||x||^2 / 2 (self-dual; plain gradient steps)
* :class:`LogBarrier`     h(x) = -sum log x_i on the positive orthant
* :class:`NegEntropy`     h(x) = sum x_i log x_i on the positive orthant
* :class:`Preconditioner` h(x) = f0(x) + c/2 ||x||^2 for an inner objective f0
  (statistical preconditioning; the conjugate map is solved iteratively)

Instances are immutable after construction and safe to share across threads.
"""

import numpy as np

from .errors import DomainViolation, InnerSolveFailure, StepOutOfDomain


class ReferenceFunction:
    """Common interface for mirror maps.

    Subclasses implement ``value``, ``grad``, ``grad_conjugate`` and domain
    predicates. Divergences are derived from those unless a closed form is
    cheaper.
    """

    kind = None

    # -- domain -------------------------------------------------------------

    def check_domain(self, x):
        """Raise DomainViolation unless ``x`` is interior to dom h."""

    def dual_violation_index(self, y):
        """Index of the first coordinate of ``y`` outside int dom h*, or None."""
        return None

    def check_dual_domain(self, y):
        idx = self.dual_violation_index(y)
        if idx is not None:
            raise DomainViolation(
                f"{self.kind}: dual point outside conjugate domain at component {idx}",
                index=idx,
            )

    # -- primal map ---------------------------------------------------------

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    # -- conjugate map ------------------------------------------------------

    def conjugate_value(self, y):
        """h*(y); default uses grad_conjugate via h*(y) = <x, y> - h(x)."""
        x = self.grad_conjugate(y)
        return float(x @ y - self.value(x))

    def grad_conjugate(self, y, warm_start=None):
        raise NotImplementedError

    # -- divergences ----------------------------------------------------------

    def divergence(self, x, y):
        """D_h(x, y) for x in dom h and y interior."""
        self.check_domain(x)
        self.check_domain(y)
        return float(self.value(x) - self.value(y) - self.grad(y) @ (x - y))

    def dual_divergence(self, a, b):
        """D_{h*}(a, b) for a, b in the conjugate domain.

        Default route evaluates h* directly; reference functions without a
        closed-form conjugate override this with the duality identity
        D_{h*}(a, b) = D_h(grad h*(b), grad h*(a)).
        """
        self.check_dual_domain(a)
        self.check_dual_domain(b)
        return float(
            self.conjugate_value(a)
            - self.conjugate_value(b)
            - self.grad_conjugate(b) @ (a - b)
        )


class Euclidean(ReferenceFunction):
    """h(x) = ||x||^2 / 2, defined on all of R^d. Self-dual."""

    kind = "euclidean"

    def value(self, x):
        return 0.5 * float(x @ x)

    def grad(self, x):
        return np.asarray(x, dtype=float).copy()

    def conjugate_value(self, y):
        return 0.5 * float(y @ y)

    def grad_conjugate(self, y, warm_start=None):
        return np.asarray(y, dtype=float).copy()

    def divergence(self, x, y):
        d = x - y
        return 0.5 * float(d @ d)

    def dual_divergence(self, a, b):
        d = a - b
        return 0.5 * float(d @ d)


class LogBarrier(ReferenceFunction):
    """h(x) = -sum log x_i on the strictly positive orthant.

    grad h(x) = -1/x, so the conjugate domain is the strictly negative
    orthant and grad h*(y) = -1/y.
    """

    kind = "log_barrier"

    def check_domain(self, x):
        bad = np.flatnonzero(x <= 0.0)
        if bad.size:
            raise DomainViolation(
                f"log_barrier: component {bad[0]} is not strictly positive",
                index=int(bad[0]),
            )

    def dual_violation_index(self, y):
        bad = np.flatnonzero(y >= 0.0)
        return int(bad[0]) if bad.size else None

    def value(self, x):
        return -float(np.sum(np.log(x)))

    def grad(self, x):
        self.check_domain(x)
        return -1.0 / x

    def conjugate_value(self, y):
        # h*(y) = -d - sum log(-y_i)
        self.check_dual_domain(y)
        return -float(len(y)) - float(np.sum(np.log(-y)))

    def grad_conjugate(self, y, warm_start=None):
        self.check_dual_domain(y)
        return -1.0 / y


class NegEntropy(ReferenceFunction):
    """h(x) = sum x_i log x_i on the positive orthant (0 log 0 = 0).

    grad h(x) = log x + 1, grad h*(y) = exp(y - 1); the conjugate domain is
    all of R^d.
    """

    kind = "neg_entropy"

    def check_domain(self, x):
        bad = np.flatnonzero(x <= 0.0)
        if bad.size:
            raise DomainViolation(
                f"neg_entropy: component {bad[0]} is not strictly positive",
                index=int(bad[0]),
            )

    def value(self, x):
        return float(np.sum(x * np.log(x)))

    def grad(self, x):
        self.check_domain(x)
        return np.log(x) + 1.0

    def conjugate_value(self, y):
        return float(np.sum(np.exp(y - 1.0)))

    def grad_conjugate(self, y, warm_start=None):
        return np.exp(y - 1.0)


class Preconditioner(ReferenceFunction):
    """h(x) = f0(x) + (c_prec/2) ||x||^2 built from an inner objective f0.

    The conjugate map has no closed form; ``grad_conjugate`` minimizes the
    strongly convex subproblem h(x) - <x, y> with a deterministic accelerated
    gradient method, warm-started by the caller. One inner iteration costs one
    full pass over the preconditioning dataset. Dual divergences are computed
    through the duality identity (two conjugate solves) since h* itself is
    never evaluated.
    """

    kind = "preconditioner"

    def __init__(self, inner_objective, c_prec=0.0, inner_tol=1e-6, inner_passes=10):
        if c_prec < 0:
            raise ValueError("c_prec must be nonnegative")
        self.inner = inner_objective
        self.c_prec = float(c_prec)
        self.inner_tol = float(inner_tol)
        self.inner_passes = int(inner_passes)
        # Smoothness/strong-convexity bounds of the subproblem, fixed at
        # construction so inner solves are deterministic.
        self._L = self.inner.smoothness_bound() + self.c_prec
        self._mu = self.inner.strong_convexity_bound() + self.c_prec

    def value(self, x):
        return float(self.inner.value(x)) + 0.5 * self.c_prec * float(x @ x)

    def grad(self, x):
        return self.inner.full_grad(x) + self.c_prec * x

    def hess_vec(self, x, u):
        return self.inner.hess_vec(x, u) + self.c_prec * u

    def grad_conjugate(self, y, warm_start=None):
        x = np.zeros_like(y) if warm_start is None else np.asarray(warm_start, dtype=float).copy()
        L, mu = self._L, self._mu
        if mu > 0:
            kappa = L / mu
            beta = (np.sqrt(kappa) - 1.0) / (np.sqrt(kappa) + 1.0)
        else:
            beta = 0.0
        z = x.copy()
        x_prev = x.copy()
        for _ in range(max(self.inner_passes, 1)):
            g = self.grad(z) - y
            if not np.all(np.isfinite(g)):
                raise InnerSolveFailure("preconditioner: non-finite inner gradient")
            x_new = z - g / L
            z = x_new + beta * (x_new - x_prev)
            x_prev = x_new
            if np.linalg.norm(self.grad(x_new) - y) <= self.inner_tol:
                break
        if not np.all(np.isfinite(x_prev)):
            raise InnerSolveFailure("preconditioner: inner solve diverged")
        return x_prev

    def dual_divergence(self, a, b):
        # Duality identity: D_{h*}(a, b) = D_h(grad h*(b), grad h*(a)).
        xb = self.grad_conjugate(b)
        xa = self.grad_conjugate(a)
        return self.divergence(xb, xa)


_KINDS = {
    "euclidean": Euclidean,
    "log_barrier": LogBarrier,
    "neg_entropy": NegEntropy,
}


def make_reference(kind):
    """Instantiate a closed-form reference function by name."""
    try:
        return _KINDS[kind]()
    except KeyError:
        raise ValueError(f"unknown reference kind: {kind!r}") from None


def mirror_step(ref, x, g, eta):
    """One Bregman gradient step from ``x`` against gradient estimate ``g``.

    Returns the unique minimizer of eta <g, z> + D_h(z, x), computed as
    grad h*(grad h(x) - eta g). Raises :class:`StepOutOfDomain` with the
    offending component index when the dual point leaves the conjugate
    domain; callers may retry with a halved step size.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    y = ref.grad(x) - eta * g
    idx = ref.dual_violation_index(y)
    if idx is not None:
        raise StepOutOfDomain(
            f"{ref.kind}: mirror step left the conjugate domain at component {idx}",
            index=idx,
        )
    return ref.grad_conjugate(y, warm_start=x)
