"""Acceptance battery: the certification and benchmark checks behind both
the test suite and the ``verify`` command.

Each criterion function returns a list of :class:`bregopt.metrics.CheckResult`
entries. A check passes when its measured violation does not exceed its
tolerance; range or comparison criteria are expressed so that zero or
negative violation means success. The battery is deterministic given its
seeds, and every solver run it performs is registered so the determinism
criterion can repeat it and compare traces byte for byte.
"""

import copy
import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .metrics import (
    CertReport,
    CheckResult,
    certify_lemmas,
    plateau_level,
    rate_fit,
    saga_potential,
    svrg_potential,
)
from .mirror import Euclidean, LogBarrier, mirror_step
from .objective import DiagonalQuadratic, PoissonKL, poisson_rel_L
from .problems import (
    ProblemInstance,
    gen_gaussian_logistic_data,
    gen_interpolation,
    gen_preconditioned,
    gen_tomography,
    poisson_sample,
    solve_reference,
)
from .rng import make_rng
from .solver import (
    SagaState,
    SolverConfig,
    SvrgState,
    bsaga_step,
    bsvrg_step,
    mu_step,
    run,
    svrg_gradient,
)

# Reference objective value for the seeded 64x60 tomography instance,
# computed once by 24000 multiplicative-update iterations (the value is
# still decreasing in the 6th decimal at that point; the benchmark gaps
# compared against it are several orders of magnitude larger).
TOMO_F_STAR = 18.2121321

CRITERIA = tuple(range(1, 11))


def _csv_without_wall(trace):
    lines = trace.to_csv_string().splitlines()
    return "\n".join(line.rsplit(",", 1)[0] for line in lines)


class Battery:
    """Runs acceptance criteria and accumulates results.

    ``samples`` scales the lemma-certification sample count. With
    ``quick`` set, only the fast structural criteria (1, 5, 8, 9) run.
    ``negative_control`` injects a deliberately halved smoothness constant
    into the cocoercivity check, which must produce a failure.
    """

    def __init__(self, samples=1000, quick=False, negative_control=False):
        self.samples = samples
        self.quick = quick
        self.negative_control = negative_control
        self._registry = []  # (name, config, problem, csv) for criterion 10

    # -- registry ----------------------------------------------------------

    def _register(self, name, config, problem, trace):
        self._registry.append((name, config, problem, _csv_without_wall(trace)))

    # -- shared fixtures ---------------------------------------------------

    def _noisy_poisson_problem(self):
        """Relatively strongly convex noisy Poisson desk instance."""
        rng = make_rng(11)
        n, d = 200, 20
        A = rng.uniform(0.0, 1.0, size=(n, d))
        xs = rng.uniform(0.2, 1.0, size=d)
        b = poisson_sample(A @ xs, 12).astype(float)
        lam = 0.5
        obj = PoissonKL(A, b, barrier_weight=lam)
        l_rel = poisson_rel_L(A, b) + lam
        prob = ProblemInstance(
            objective=obj, reference=LogBarrier(), x0=np.ones(d),
            meta={"L_rel": l_rel},
        )
        solve_reference(prob, tol=1e-12, max_iter=30000)
        return prob

    def _quadratic_problem(self):
        """Noisy diagonal-quadratic finite sum with closed-form optimum."""
        rng = make_rng(21)
        n, d = 32, 8
        Q = rng.uniform(0.5, 2.0, size=(n, d))
        C = rng.standard_normal((n, d))
        obj = DiagonalQuadratic(Q, C)
        xs = obj.minimizer()
        prob = ProblemInstance(
            objective=obj, reference=Euclidean(), x0=np.zeros(d),
            x_star=xs, f_star=obj.value(xs),
            meta={"L_rel": float(np.max(Q)), "mu_rel": float(np.min(Q.mean(axis=0)))},
        )
        return prob

    def _tomography_problem(self):
        prob = gen_tomography(64, 60, seed=1)
        prob.f_star = TOMO_F_STAR
        return prob

    def _preconditioned_problem(self):
        data = gen_gaussian_logistic_data(2000, 20, seed=41, separation=1.0)
        prob = gen_preconditioned(
            data, n_nodes=10, N=200, n_prec=200, lam=1e-5, c_prec=1e-5, seed=42
        )
        solve_reference(prob)
        return prob

    # -- criteria ----------------------------------------------------------

    def criterion_1(self):
        """Structural lemma certification across the reference kinds."""
        start = time.perf_counter()
        samples = max(self.samples, 1)
        report = certify_lemmas(samples=samples, seed=7)
        checks = list(report.checks)
        if self.negative_control:
            bad = certify_lemmas(
                kinds=("euclidean",), samples=samples, seed=7, l_scale=0.5
            )
            # surface the faulty check itself; it must FAIL, which makes the
            # whole battery fail and proves the harness notices a halved
            # smoothness constant
            for c in bad.checks:
                if "cocoercivity" in c.name:
                    checks.append(
                        CheckResult("negative_control/" + c.name, c.samples,
                                    c.max_violation, c.tolerance)
                    )
        checks.append(
            CheckResult("c1/runtime_s", 1, time.perf_counter() - start, 30.0)
        )
        return checks

    def criterion_2(self):
        """Interpolation instance, BSGD at the theoretical constant step."""
        start = time.perf_counter()
        prob = gen_interpolation(2000, 100, seed=1)
        eta = 1.0 / (2.0 * prob.meta["L_rel"])
        config = SolverConfig(method="bsgd", eta=eta, epochs=60.0, seed=1)
        trace = run(config, prob)
        self._register("c2_bsgd", config, prob, trace)
        ratio = trace.final.dh_gap / trace[0].dh_gap
        rate = rate_fit(trace, max(len(trace) // 3, 2))
        return [
            CheckResult("c2/dh_ratio", trace.final.iter, ratio, 1e-6),
            CheckResult("c2/tail_rate", len(trace) // 3, rate, 0.999),
            CheckResult("c2/runtime_s", 1, time.perf_counter() - start, 60.0),
        ]

    def criterion_3(self):
        """Noise-region scaling: plateau level roughly proportional to eta."""
        start = time.perf_counter()
        prob = self._noisy_poisson_problem()
        eta = 1.0 / (2.0 * prob.meta["L_rel"])
        levels = {}
        flat = True
        for tag, mult in (("full", 1.0), ("half", 0.5)):
            config = SolverConfig(method="bsgd", eta=mult * eta, epochs=400.0, seed=3)
            trace = run(config, prob)
            self._register(f"c3_bsgd_{tag}", config, prob, trace)
            level, is_plateau = plateau_level(trace)
            levels[tag] = level
            flat = flat and is_plateau
        ratio = levels["full"] / levels["half"]
        return [
            CheckResult("c3/plateaus_detected", 2, 0.0 if flat else 1.0, 0.0),
            CheckResult("c3/level_ratio", 2, max(1.5 - ratio, ratio - 3.0), 0.0),
            CheckResult("c3/runtime_s", 1, time.perf_counter() - start, 60.0),
        ]

    def criterion_4(self):
        """Variance reduction: linear convergence to the exact optimum."""
        start = time.perf_counter()
        prob = self._quadratic_problem()
        n = prob.objective.n_components
        L, mu = prob.meta["L_rel"], prob.meta["mu_rel"]
        kappa = L / mu
        eta = 1.0 / (8.0 * L)
        bound = 1.0 - 0.5 * min(1.0 / (2 * n), 1.0 / (8 * kappa))
        saga_cfg = SolverConfig(method="bsaga", eta=eta, epochs=50.0, seed=4)
        saga = run(saga_cfg, prob)
        self._register("c4_bsaga", saga_cfg, prob, saga)
        sgd_cfg = SolverConfig(method="bsgd", eta=eta, epochs=150.0, seed=4)
        sgd = run(sgd_cfg, prob)
        self._register("c4_bsgd", sgd_cfg, prob, sgd)
        rate = rate_fit(saga, max(len(saga) // 3, 2))
        level, is_plateau = plateau_level(sgd)
        separation = level / max(saga.final.dh_gap, 1e-300)
        return [
            CheckResult("c4/saga_rate", len(saga) // 3, rate, bound),
            CheckResult("c4/saga_final_dh", 1, saga.final.dh_gap, 1e-10),
            CheckResult("c4/bsgd_plateau", 1, 0.0 if is_plateau else 1.0, 0.0),
            CheckResult("c4/separation", 1, 1e4 - separation, 0.0),
            CheckResult("c4/runtime_s", 1, time.perf_counter() - start, 60.0),
        ]

    def criterion_5(self):
        """One-step expected potential contraction by exhaustive enumeration."""
        start = time.perf_counter()
        prob = self._quadratic_problem()
        obj, ref, xs = prob.objective, prob.reference, prob.x_star
        n = obj.n_components
        L, mu = prob.meta["L_rel"], prob.meta["mu_rel"]
        eta = 1.0 / (8.0 * L)
        n_states = 100

        worst_saga = -np.inf
        rng = make_rng(31)
        state = SagaState.init(prob.x0, obj, store_anchors=True)
        factor = 1.0 - min(eta * mu, 1.0 / (2 * n))
        for _ in range(n_states):
            for _ in range(int(rng.integers(1, 20))):
                bsaga_step(state, obj, ref, eta, rng)
            psi = saga_potential(state, obj, ref, xs, eta)
            acc = 0.0
            for i in range(n):
                probe = copy.deepcopy(state)
                bsaga_step(probe, obj, ref, eta, rng, index=i)
                acc += saga_potential(probe, obj, ref, xs, eta)
            worst_saga = max(worst_saga, acc / n - factor * psi)

        p = 0.1
        worst_svrg = -np.inf
        rng = make_rng(32)
        state = SvrgState.init(prob.x0, obj)
        factor_v = 1.0 - min(eta * mu, p / 2.0)
        for _ in range(n_states):
            for _ in range(int(rng.integers(1, 20))):
                bsvrg_step(state, obj, ref, eta, p, rng)
            psi = svrg_potential(state, obj, ref, xs, eta, p)
            acc = 0.0
            for i in range(n):
                g = svrg_gradient(state, obj, i)
                x_next = mirror_step(ref, state.x, g, eta)
                memory = (eta / (2.0 * p)) * (
                    (1.0 - p) * obj.f_divergence(state.anchor, xs)
                    + p * obj.f_divergence(state.x, xs)
                )
                acc += ref.divergence(xs, x_next) + memory
            worst_svrg = max(worst_svrg, acc / n - factor_v * psi)

        return [
            CheckResult("c5/saga_contraction", n_states, worst_saga, 1e-9),
            CheckResult("c5/svrg_contraction", n_states, worst_svrg, 1e-9),
            CheckResult("c5/runtime_s", 1, time.perf_counter() - start, 60.0),
        ]

    def criterion_6(self):
        """Tomography benchmark: stochastic speedup and parity with MU."""
        start = time.perf_counter()
        prob = self._tomography_problem()
        bgd_cfg = SolverConfig(method="bgd", step_multiplier=10.0, epochs=50.0, seed=6)
        bgd = run(bgd_cfg, prob)
        self._register("c6_bgd", bgd_cfg, prob, bgd)
        saga_cfg = SolverConfig(
            method="bsaga", step_multiplier=40.0, epochs=50.0, seed=6, record_every=12
        )
        saga = run(saga_cfg, prob)
        self._register("c6_bsaga", saga_cfg, prob, saga)
        mu_cfg = SolverConfig(method="mu", epochs=50.0, seed=6)
        mu = run(mu_cfg, prob)
        self._register("c6_mu", mu_cfg, prob, mu)

        bg, be = bgd.column("f_gap"), bgd.column("epoch")
        sg, se = saga.column("f_gap"), saga.column("epoch")
        worst = 0.0
        unreached = 0
        for gap, epoch in zip(bg[1:], be[1:]):
            hit = np.nonzero(sg <= gap)[0]
            if hit.size == 0:
                unreached += 1
                continue
            worst = max(worst, se[hit[0]] / epoch)
        f_saga = saga.final.f_gap + prob.f_star
        f_mu = mu.final.f_gap + prob.f_star
        parity = abs(f_saga - f_mu) / abs(f_mu)
        return [
            CheckResult("c6/thresholds_reached", len(bg) - 1, float(unreached), 0.0),
            CheckResult("c6/epoch_ratio", len(bg) - 1, worst, 0.2),
            CheckResult("c6/mu_parity", 1, parity, 0.1),
            CheckResult("c6/runtime_s", 1, time.perf_counter() - start, 180.0),
        ]

    def criterion_7(self):
        """Distributed benchmark: communication efficiency of BSAGA."""
        start = time.perf_counter()
        prob = self._preconditioned_problem()

        def first_comms(trace, threshold):
            gaps = trace.column("f_gap")
            comms = trace.column("comms")
            hit = comms[gaps <= threshold]
            return float(hit[0]) if hit.size else np.inf

        bgd_cfg = SolverConfig(method="bgd", eta=0.5, epochs=40.0, seed=5)
        bgd = run(bgd_cfg, prob)
        self._register("c7_bgd", bgd_cfg, prob, bgd)
        saga_cfg = SolverConfig(method="bsaga", eta=0.1, epochs=40.0, seed=5,
                                record_every=1)
        saga = run(saga_cfg, prob)
        self._register("c7_bsaga", saga_cfg, prob, saga)
        sgd_cfg = SolverConfig(method="bsgd", eta=0.1, epochs=100.0, seed=5,
                               record_every=1)
        sgd = run(sgd_cfg, prob)
        self._register("c7_bsgd", sgd_cfg, prob, sgd)

        saga_comms = first_comms(saga, 1e-5)
        bgd_comms = first_comms(bgd, 1e-5)
        early = first_comms(sgd, 1e-2) / first_comms(saga, 1e-2)
        tail = sgd.column("f_gap")[-max(len(sgd) // 4, 3):]
        sgd_level = float(np.median(tail))
        return [
            CheckResult("c7/comms_advantage", 1, saga_comms - bgd_comms + 1.0, 0.0),
            CheckResult("c7/bsgd_early_match", 1, early, 2.0),
            CheckResult("c7/bsgd_plateau_above", 1,
                        saga.final.f_gap - sgd_level, 0.0),
            CheckResult("c7/runtime_s", 1, time.perf_counter() - start, 180.0),
        ]

    def criterion_8(self):
        """Sparse relative-smoothness constant: ordering and improvement."""
        start = time.perf_counter()
        n_inst = 100
        rng = make_rng(81)
        worst_order = -np.inf
        improved = 0
        dense_violations = 0
        for _ in range(n_inst):
            n, d = 30, 10
            mask = rng.random((n, d)) < 0.2
            A = np.where(mask, rng.uniform(0.1, 1.0, size=(n, d)), 0.0)
            keep = np.asarray(A.sum(axis=1) > 0)
            A, n = A[keep], int(np.sum(keep))
            b = rng.uniform(0.5, 2.0, size=n)
            l_sparse = poisson_rel_L(A, b)
            l_dense = float(np.sum(b)) / n
            if l_sparse > l_dense + 1e-12:
                dense_violations += 1
            if l_sparse < l_dense - 1e-12:
                improved += 1
            obj = PoissonKL(A, b)
            for _ in range(5):
                x = rng.uniform(0.5, 2.0, size=d)
                if np.any(np.asarray(A @ x).ravel() <= 0):
                    continue
                u = rng.standard_normal(d)
                quad_f = float(u @ obj.hess_vec(x, u)) * obj.n_components
                quad_h = float(np.sum(u**2 / x**2))
                worst_order = max(worst_order, quad_f / obj.n_components
                                  - l_sparse * quad_h)
        return [
            CheckResult("c8/hessian_ordering", 5 * n_inst, worst_order, 1e-8),
            CheckResult("c8/dense_bound", n_inst, float(dense_violations), 0.0),
            CheckResult("c8/strict_improvement", n_inst,
                        0.9 * n_inst - improved, 0.0),
            CheckResult("c8/runtime_s", 1, time.perf_counter() - start, 30.0),
        ]

    def criterion_9(self):
        """Multiplicative updates: monotone descent and exact fixed point."""
        start = time.perf_counter()
        rng = make_rng(91)
        A = rng.uniform(0.0, 1.0, size=(50, 10))
        xs = rng.uniform(0.2, 1.0, size=10)
        b = poisson_sample(A @ xs, 92).astype(float)
        obj = PoissonKL(A, b)
        x = np.ones(10)
        worst_increase = -np.inf
        prev = obj.value(x)
        for _ in range(1000):
            x = mu_step(x, A, b)
            val = obj.value(x)
            worst_increase = max(worst_increase, val - prev)
            prev = val
        exact_b = A @ xs
        fixed = mu_step(xs.copy(), A, exact_b)
        preserved = np.array_equal(fixed, xs)
        return [
            CheckResult("c9/monotone", 1000, worst_increase, 1e-12),
            CheckResult("c9/fixed_point", 1, 0.0 if preserved else 1.0, 0.0),
            CheckResult("c9/runtime_s", 1, time.perf_counter() - start, 10.0),
        ]

    def criterion_10(self):
        """Determinism: every registered run repeats byte-identically."""
        mismatches = 0
        for name, config, problem, csv in self._registry:
            repeat = run(copy.deepcopy(config), problem)
            if _csv_without_wall(repeat) != csv:
                mismatches += 1
        return [
            CheckResult("c10/byte_identical", len(self._registry),
                        float(mismatches), 0.0),
        ]

    # -- driver ------------------------------------------------------------

    def run_all(self):
        """Execute the battery and return a CertReport.

        Criteria other than the determinism check are independent and may
        run on a worker pool sized by the BREGOPT_THREADS environment
        variable; results are aggregated in criterion order regardless of
        completion order.
        """
        if self.quick:
            order = [self.criterion_1, self.criterion_5, self.criterion_8,
                     self.criterion_9]
        else:
            order = [getattr(self, f"criterion_{k}") for k in range(1, 10)]
        workers = int(os.environ.get("BREGOPT_THREADS", "1"))
        report = CertReport()
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(fn) for fn in order]
                for fut in futures:
                    report.checks.extend(fut.result())
        else:
            for fn in order:
                report.checks.extend(fn())
        if not self.quick:
            report.checks.extend(self.criterion_10())
        return report


def run_battery(samples=1000, quick=False, negative_control=False):
    """Convenience wrapper used by the command-line verify entry point."""
    return Battery(samples=samples, quick=quick,
                   negative_control=negative_control).run_all()
