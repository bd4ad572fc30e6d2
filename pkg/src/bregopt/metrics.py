"""Convergence diagnostics, potentials and numerical lemma certification.

This module owns the trace format (per-iteration metric records streamed to
CSV), the variance and Lyapunov quantities used by the convergence theory,
and :func:`certify_lemmas`, which checks the structural identities and
inequalities behind the solvers on seeded random inputs.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import AnchorsUnavailable, DomainViolation, InsufficientData
from .mirror import Euclidean, LogBarrier, NegEntropy, make_reference, mirror_step
from .objective import DiagonalQuadratic, PoissonKL, poisson_rel_L
from .rng import make_rng

TRACE_COLUMNS = (
    "iter",
    "epoch",
    "grad_evals",
    "comms",
    "f_gap",
    "dh_gap",
    "min_df_gap",
    "eta",
    "gain",
    "halvings",
    "wall_s",
)


@dataclass
class TraceRecord:
    """One row of solver diagnostics."""

    iter: int
    epoch: float
    grad_evals: int
    comms: float
    f_gap: float
    dh_gap: float
    min_df_gap: float
    eta: float
    gain: float
    halvings: int
    wall_s: float

    def as_row(self):
        return [getattr(self, c) for c in TRACE_COLUMNS]


class Trace:
    """Ordered collection of :class:`TraceRecord` with CSV serialization.

    Floats are written with ``repr``, i.e. the shortest decimal string that
    round-trips, so identical runs produce identical files (modulo the
    wall-clock column).
    """

    def __init__(self, metadata=None):
        self.records = []
        self.metadata = dict(metadata or {})

    def append(self, record):
        if self.records:
            prev = self.records[-1]
            assert record.grad_evals >= prev.grad_evals
            assert record.comms >= prev.comms
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def final(self):
        return self.records[-1]

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @staticmethod
    def _fmt(v):
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        return repr(float(v))

    def to_csv(self, path_or_file):
        if hasattr(path_or_file, "write"):
            self._write(path_or_file)
        else:
            with open(path_or_file, "w") as fh:
                self._write(fh)

    def _write(self, fh):
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for r in self.records:
            fh.write(",".join(self._fmt(v) for v in r.as_row()) + "\n")

    def to_csv_string(self):
        buf = io.StringIO()
        self._write(buf)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path_or_file):
        if hasattr(path_or_file, "read"):
            lines = path_or_file.read().splitlines()
        else:
            with open(path_or_file) as fh:
                lines = fh.read().splitlines()
        header = lines[0].split(",")
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError("unexpected trace CSV header")
        trace = cls()
        for line in lines[1:]:
            vals = line.split(",")
            trace.records.append(
                TraceRecord(
                    iter=int(vals[0]),
                    epoch=float(vals[1]),
                    grad_evals=int(vals[2]),
                    comms=float(vals[3]),
                    f_gap=float(vals[4]),
                    dh_gap=float(vals[5]),
                    min_df_gap=float(vals[6]),
                    eta=float(vals[7]),
                    gain=float(vals[8]),
                    halvings=int(vals[9]),
                    wall_s=float(vals[10]),
                )
            )
        return trace


# ---------------------------------------------------------------------------
# variance and potentials
# ---------------------------------------------------------------------------


def sigma2_estimate(obj, ref, x, x_star, eta, max_exact=10**4, samples=2000, seed=0):
    """Variance proxy at the optimum, probed at ``x``.

    Computes (1 / 2 eta^2) * mean_i D_{h*}(grad h(x) - 2 eta grad f_i(x_star),
    grad h(x)). Exact enumeration for small component counts, otherwise a
    seeded subsample; returns (estimate, standard_error) where the standard
    error is 0.0 for exact enumeration.
    """
    n = obj.n_components
    hx = ref.grad(x)
    if n <= max_exact:
        idx = np.arange(n)
    else:
        idx = make_rng(seed).integers(0, n, size=samples)
    vals = []
    for i in idx:
        shifted = hx - 2.0 * eta * obj.partial_grad(int(i), x_star)
        try:
            vals.append(ref.dual_divergence(shifted, hx))
        except DomainViolation as exc:
            raise DomainViolation(
                "variance assumption unverifiable at this probe point"
            ) from exc
    vals = np.array(vals) / (2.0 * eta**2)
    stderr = 0.0 if n <= max_exact else float(np.std(vals) / np.sqrt(len(vals)))
    return float(np.mean(vals)), stderr


def saga_table_error(state, obj, x_star):
    """H_t = (1/n) sum_j D_{f_j}(phi_j, x_star); needs stored anchors."""
    if state.anchors is None:
        raise AnchorsUnavailable("SAGA state was created without anchor storage")
    n = obj.n_components
    return sum(
        obj.component_divergence(j, state.anchors[j], x_star) for j in range(n)
    ) / n


def saga_potential(state, obj, ref, x_star, eta):
    """psi_t = D_h(x_star, x_t) / eta + (n/2) H_t."""
    h_term = ref.divergence(x_star, state.x) / eta
    return h_term + 0.5 * obj.n_components * saga_table_error(state, obj, x_star)


def svrg_potential(state, obj, ref, x_star, eta, p):
    """psi_t = D_h(x_star, x_t) + (eta / 2p) D_f(phi_t, x_star)."""
    return ref.divergence(x_star, state.x) + (eta / (2.0 * p)) * obj.f_divergence(
        state.anchor, x_star
    )


# ---------------------------------------------------------------------------
# rate fitting and plateau detection
# ---------------------------------------------------------------------------


def rate_fit(trace_or_values, window, iters=None):
    """Per-iteration geometric contraction fitted on the trailing ``window``.

    Accepts a :class:`Trace` (uses the dh_gap column against the iteration
    column) or a raw positive sequence with optional iteration counts.
    Returns exp(slope) of a least-squares line through log(values).
    """
    if isinstance(trace_or_values, Trace):
        values = trace_or_values.column("dh_gap")
        iters = trace_or_values.column("iter")
    else:
        values = np.asarray(trace_or_values, dtype=float)
        iters = np.arange(len(values)) if iters is None else np.asarray(iters, float)
    keep = values > 0
    values, iters = values[keep], iters[keep]
    if len(values) < max(window, 2):
        raise InsufficientData(
            f"rate_fit needs >= {window} positive records, got {len(values)}"
        )
    v = np.log(values[-window:])
    t = iters[-window:]
    slope = np.polyfit(t, v, 1)[0]
    return float(np.exp(slope))


def plateau_level(trace, tail_fraction=0.25, band=1e-3):
    """Median dh_gap over the trailing window if the trace has flattened.

    The tail is declared a plateau when its fitted contraction lies within
    ``band`` of 1. Returns (level, is_plateau).
    """
    n_tail = max(int(len(trace) * tail_fraction), 3)
    rate = rate_fit(trace, n_tail)
    tail = trace.column("dh_gap")[-n_tail:]
    return float(np.median(tail)), bool(abs(rate - 1.0) <= band)


# ---------------------------------------------------------------------------
# lemma certification
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    samples: int
    max_violation: float
    tolerance: float

    @property
    def passed(self):
        return self.max_violation <= self.tolerance

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{self.name} samples={self.samples} "
            f"max_violation={self.max_violation:.3e} tol={self.tolerance:.1e} {status}"
        )


@dataclass
class CertReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def lines(self):
        return [c.line() for c in self.checks]

    def text(self):
        verdict = "ALL CHECKS PASSED" if self.passed else "CHECK FAILURES PRESENT"
        return "\n".join(self.lines() + [verdict])


def _interior_point(kind, rng, d):
    if kind == "euclidean":
        return rng.standard_normal(d)
    return rng.uniform(0.2, 2.0, size=d)


def _smooth_test_objective(kind, d, rng):
    """A convex objective with a known relative smoothness constant w.r.t.
    the reference of the given kind, evaluated on sampled interior points."""
    if kind == "euclidean":
        Q = rng.uniform(0.5, 2.0, size=(4, d))
        C = rng.standard_normal((4, d))
        obj = DiagonalQuadratic(Q, C)
        return obj.value, obj.full_grad, obj.smoothness_bound()
    if kind == "log_barrier":
        A = rng.uniform(0.0, 1.0, size=(3 * d, d))
        b = rng.uniform(0.5, 2.0, size=3 * d)
        obj = PoissonKL(A, b)
        return obj.value, obj.full_grad, poisson_rel_L(A, b)
    if kind == "neg_entropy":
        # weighted entropy: Hessian diag(w / x) <= max(w) * Hessian of h
        w = rng.uniform(0.5, 1.0, size=d)

        def value(x):
            return float(w @ (x * np.log(x)))

        def grad(x):
            return w * (np.log(x) + 1.0)

        return value, grad, float(np.max(w))
    raise ValueError(kind)


def certify_lemmas(kinds=("euclidean", "log_barrier", "neg_entropy"), seed=7,
                   samples=1000, d=6, l_scale=1.0):
    """Numerically certify the structural lemmas on seeded random inputs.

    Per reference kind: the primal/dual duality identity, the midpoint
    (Young-type) inequality for mirror steps, cocoercivity of relatively
    smooth gradients at eta = 1/L, the exact one-step descent identity, and
    the exact variance (bias/variance) decomposition of dual divergences by
    enumeration. ``l_scale`` rescales the smoothness constant fed to the
    cocoercivity check; values below 1 serve as a negative control.

    Returns a :class:`CertReport`; failures are report entries, not errors.
    """
    report = CertReport()
    for kind in kinds:
        ref = make_reference(kind)
        rng = make_rng(seed)
        value_f, grad_f, L = _smooth_test_objective(kind, d, rng)

        # Lemma: duality identity D_h(x, y) = D_{h*}(grad h(y), grad h(x))
        worst = 0.0
        for _ in range(samples):
            x = _interior_point(kind, rng, d)
            y = _interior_point(kind, rng, d)
            lhs = ref.divergence(x, y)
            rhs = ref.dual_divergence(ref.grad(y), ref.grad(x))
            worst = max(worst, abs(lhs - rhs) / (1.0 + abs(lhs)))
        report.checks.append(CheckResult(f"{kind}/duality", samples, worst, 1e-9))

        # Lemma: midpoint inequality for mirror steps
        worst = 0.0
        for _ in range(samples):
            x = _interior_point(kind, rng, d)
            y = ref.grad(x)
            u1, u2 = rng.uniform(-0.5, 0.5, size=(2, d))
            y1, y2 = y * (1.0 + u1), y * (1.0 + u2)
            g1, g2 = y - y1, y - y2
            d_mid = ref.dual_divergence(y - 0.5 * (g1 + g2), y)
            d1 = ref.dual_divergence(y1, y)
            d2 = ref.dual_divergence(y2, y)
            worst = max(worst, d_mid - 0.5 * (d1 + d2))
        report.checks.append(CheckResult(f"{kind}/midpoint", samples, worst, 1e-10))

        # Lemma: cocoercivity at eta = 1/L
        eta = 1.0 / (L * l_scale)
        worst = 0.0
        used = 0
        for _ in range(samples):
            x = _interior_point(kind, rng, d)
            y = _interior_point(kind, rng, d)
            shifted = ref.grad(x) - eta * (grad_f(x) - grad_f(y))
            if ref.dual_violation_index(shifted) is not None:
                continue
            used += 1
            df = value_f(x) - value_f(y) - float(grad_f(y) @ (x - y))
            rhs = ref.dual_divergence(shifted, ref.grad(x)) / eta
            worst = max(worst, rhs - df)
        report.checks.append(CheckResult(f"{kind}/cocoercivity", used, worst, 1e-10))

        # Lemma: one-step descent identity (holds for any comparison point z)
        worst = 0.0
        for _ in range(samples):
            x = _interior_point(kind, rng, d)
            z = _interior_point(kind, rng, d)
            g = grad_f(x)
            eta_t = eta
            try:
                x_next = mirror_step(ref, x, g, eta_t)
            except Exception:
                continue
            lhs = (
                eta_t * float(g @ (z - x_next))
                + ref.divergence(z, x)
                - ref.divergence(x_next, x)
            )
            rhs = ref.divergence(z, x_next)
            worst = max(worst, abs(lhs - rhs) / (1.0 + abs(rhs)))
        report.checks.append(CheckResult(f"{kind}/descent_identity", samples, worst, 1e-9))

        # Lemma: variance decomposition of D_{h*} by exact enumeration
        worst = 0.0
        for _ in range(samples):
            k = 5
            if kind == "log_barrier":
                outcomes = -rng.uniform(0.2, 2.0, size=(k, d))
                u = -rng.uniform(0.2, 2.0, size=d)
            else:
                outcomes = rng.standard_normal((k, d))
                u = rng.standard_normal(d)
            probs = rng.uniform(0.1, 1.0, size=k)
            probs /= probs.sum()
            mean = probs @ outcomes
            lhs = sum(p * ref.dual_divergence(o, u) for p, o in zip(probs, outcomes))
            rhs = ref.dual_divergence(mean, u) + sum(
                p * ref.dual_divergence(o, mean) for p, o in zip(probs, outcomes)
            )
            worst = max(worst, abs(lhs - rhs))
        report.checks.append(CheckResult(f"{kind}/variance_decomposition", samples, worst, 1e-10))
    return report
