"""Iterative methods: BGD, BSGD, Bregman-SAGA, Bregman-SVRG and MU.

All stochastic methods draw indices from a counter-based generator (see
:mod:`bregopt.rng`), so a (config, problem, seed) triple determines the
trajectory bit-for-bit. Steps that would leave the reference function's
domain raise :class:`StepOutOfDomain`; the run harness wraps every step in a
halve-and-retry safeguard whose interventions are visible in the trace.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import (
    DomainViolation,
    InvalidConstants,
    StepFailure,
    StepOutOfDomain,
)
from .metrics import Trace, TraceRecord
from .mirror import mirror_step
from .rng import make_rng

METHODS = ("bgd", "bsgd", "bsaga", "bsvrg", "mu")
POLICIES = ("constant", "gain_adaptive", "halving_safeguard")


@dataclass
class SolverConfig:
    """Method, step-size policy and budget for one run.

    ``eta`` is the base step size for the constant policy; when left unset it
    defaults to step_multiplier / (2 L_rel) using the problem's relative
    smoothness constant. The gain_adaptive policy (Bregman-SAGA only) sets
    eta_t = step_multiplier / (8 L_rel G_t) and needs the regularity metadata
    mu_h, L_h, M in ``gain_constants``. The halving safeguard wraps every
    policy: a step leaving the domain is retried with a halved step size, up
    to ``max_halvings`` times, and the base step size is restored afterwards.
    """

    method: str = "bsgd"
    eta: float = None
    policy: str = "constant"
    step_multiplier: float = 1.0
    seed: int = 0
    epochs: float = 10.0
    p: float = 0.1  # bsvrg anchor refresh probability
    gain_constants: dict = None
    record_every: int = None  # iterations between trace records; default 1 epoch
    max_halvings: int = 30
    store_anchors: bool = False

    def validate(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.eta is not None and self.eta <= 0:
            raise ValueError("eta must be positive")
        if not (0.0 < self.p <= 1.0):
            raise ValueError("p must be in (0, 1]")
        if not np.isfinite(self.epochs) or self.epochs < 0:
            raise ValueError("epoch budget must be finite and nonnegative")
        if self.policy == "gain_adaptive" and self.method != "bsaga":
            raise ValueError("gain_adaptive policy applies to bsaga only")


# ---------------------------------------------------------------------------
# solver states
# ---------------------------------------------------------------------------


@dataclass
class SgdState:
    x: np.ndarray
    t: int = 0


@dataclass
class SagaState:
    """Iterate plus the per-component gradient table of Bregman-SAGA.

    ``table_mean`` is maintained incrementally in O(d) per step and must
    always equal the row mean of ``table``. Anchor points are stored only
    when requested (needed by the gain rule and the SAGA potential);
    ``sum_dist`` then tracks sum_j ||x_t - phi_j||, refreshed exactly every n
    steps and overestimated incrementally in between.
    """

    x: np.ndarray
    table: np.ndarray
    table_mean: np.ndarray
    anchors: np.ndarray = None
    t: int = 0
    sum_dist: float = 0.0
    steps_since_refresh: int = 0
    gain_floor: float = np.inf  # running minimum enforcing a decreasing G_t

    @classmethod
    def init(cls, x0, obj, store_anchors=False):
        n = obj.n_components
        table = np.stack([obj.partial_grad(i, x0) for i in range(n)])
        anchors = np.tile(x0, (n, 1)) if store_anchors else None
        return cls(
            x=np.asarray(x0, dtype=float).copy(),
            table=table,
            table_mean=table.mean(axis=0),
            anchors=anchors,
        )

    def refresh_sum_dist(self):
        if self.anchors is not None:
            self.sum_dist = float(np.sum(np.linalg.norm(self.x - self.anchors, axis=1)))
            self.steps_since_refresh = 0


@dataclass
class SvrgState:
    """Iterate, anchor point and stored anchor full gradient of Bregman-SVRG."""

    x: np.ndarray
    anchor: np.ndarray
    anchor_grad: np.ndarray
    t: int = 0

    @classmethod
    def init(cls, x0, obj):
        x0 = np.asarray(x0, dtype=float).copy()
        return cls(x=x0, anchor=x0.copy(), anchor_grad=obj.full_grad(x0))


# ---------------------------------------------------------------------------
# single steps
# ---------------------------------------------------------------------------


def bsgd_step(state, obj, ref, eta, rng, index=None):
    """One Bregman SGD step; consumes one index draw unless ``index`` given."""
    i = int(rng.integers(obj.n_components)) if index is None else index
    g = obj.partial_grad(i, state.x)
    state.x = mirror_step(ref, state.x, g, eta)
    state.t += 1
    return state


def saga_gradient(state, obj, index):
    """The SAGA estimate g_t for component ``index`` at the current iterate."""
    g_new = obj.partial_grad(index, state.x)
    return g_new, g_new - state.table[index] + state.table_mean


def bsaga_step(state, obj, ref, eta, rng, index=None):
    """One Bregman-SAGA step: mirror step, then table slot update."""
    n = obj.n_components
    i = int(rng.integers(n)) if index is None else index
    g_new, g = saga_gradient(state, obj, i)
    x_prev = state.x
    state.x = mirror_step(ref, state.x, g, eta)
    # slot update: anchor phi_i <- pre-step iterate, stored gradient refreshed
    state.table_mean = state.table_mean + (g_new - state.table[i]) / n
    state.table[i] = g_new
    if state.anchors is not None:
        old_term = float(np.linalg.norm(state.x - state.anchors[i]))
        state.anchors[i] = x_prev
        state.steps_since_refresh += 1
        if state.steps_since_refresh >= n:
            state.refresh_sum_dist()
        else:
            # incremental overestimate: the x move shifts every term by at
            # most ||dx||; the updated slot is corrected exactly
            dx = float(np.linalg.norm(state.x - x_prev))
            new_term = float(np.linalg.norm(state.x - state.anchors[i]))
            state.sum_dist += n * dx + new_term - old_term
    state.t += 1
    return state


def svrg_gradient(state, obj, index):
    """The SVRG estimate g_t for component ``index`` at the current iterate."""
    return (
        obj.partial_grad(index, state.x)
        - obj.partial_grad(index, state.anchor)
        + state.anchor_grad
    )


def bsvrg_step(state, obj, ref, eta, p, rng, index=None):
    """One Bregman-SVRG step; refreshes the anchor with probability ``p``.

    Consumes two draws (index, refresh coin); returns (state, refreshed).
    """
    i = int(rng.integers(obj.n_components)) if index is None else index
    g = svrg_gradient(state, obj, i)
    x_prev = state.x
    state.x = mirror_step(ref, state.x, g, eta)
    refreshed = bool(rng.random() < p)
    if refreshed:
        state.anchor = x_prev.copy()
        state.anchor_grad = obj.full_grad(state.anchor)
    state.t += 1
    return state, refreshed


def bgd_step(state, obj, ref, eta):
    """One deterministic full-gradient mirror step."""
    state.x = mirror_step(ref, state.x, obj.full_grad(state.x), eta)
    state.t += 1
    return state


def mu_step(x, A, b):
    """One multiplicative (Lucy-Richardson / EM) update for min D_KL(b, Ax).

    x+ = x * (A^T (b / Ax)) / (A^T 1) componentwise. Coordinates whose column
    of A is entirely zero do not appear in the objective and are left
    unchanged. Zero coordinates are fixed points of the update and stay zero,
    which happens naturally on long runs whose limit lies on the boundary.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainViolation("mu_step: x must be nonnegative")
    rates = np.asarray(A @ x).ravel()
    bad = np.flatnonzero((np.asarray(b) > 0) & (rates == 0))
    if bad.size:
        raise DomainViolation("mu_step: (Ax)_i = 0 at an observed row", index=int(bad[0]))
    ratio = np.zeros_like(rates)
    obs = np.asarray(b) > 0
    ratio[obs] = np.asarray(b)[obs] / rates[obs]
    num = np.asarray(A.T @ ratio).ravel()
    ones = np.ones(A.shape[0])
    den = np.asarray(A.T @ ones).ravel()
    out = x.copy()
    live = den > 0
    # multiply by the ratio so that b = Ax is an exact fixed point
    out[live] = x[live] * (num[live] / den[live])
    return out


# ---------------------------------------------------------------------------
# step-size policies
# ---------------------------------------------------------------------------


def gain_bound(state, constants, n):
    """Computable bound G_t on the gain function for Bregman-SAGA.

    G_t = min(L_rel * L_h / mu_h, 1 + C * (sum_j ||x_t - phi_j|| +
    ||sum_j grad f_j(phi_j)||)) with the explicit constant

    C = 2 M L_h max(4 L_h (1 + sqrt(k_h k_rel / n)),
                    (1/L_rel)(1/(4n) + 2 sqrt(k_h k_rel / n)))

    where k_h = L_h/mu_h and k_rel = L_rel/mu_rel. A running minimum keeps
    the sequence non-increasing, as the step-size rule requires.
    """
    required = ("mu_h", "L_h", "M", "L_rel", "mu_rel")
    c = {k: float(constants[k]) for k in required}
    if c["M"] < 0 or any(c[k] <= 0 for k in ("mu_h", "L_h", "L_rel", "mu_rel")):
        raise InvalidConstants(f"gain constants must be positive (M nonnegative): {c}")
    kappa_h = c["L_h"] / c["mu_h"]
    kappa_rel = c["L_rel"] / c["mu_rel"]
    root = np.sqrt(kappa_h * kappa_rel / n)
    C = 2.0 * c["M"] * c["L_h"] * max(
        4.0 * c["L_h"] * (1.0 + root),
        (1.0 / c["L_rel"]) * (1.0 / (4.0 * n) + 2.0 * root),
    )
    grad_sum_norm = n * float(np.linalg.norm(state.table_mean))
    raw = min(
        c["L_rel"] * c["L_h"] / c["mu_h"],
        1.0 + C * (state.sum_dist + grad_sum_norm),
    )
    state.gain_floor = min(state.gain_floor, raw)
    return state.gain_floor


def step_policy(config, l_rel=None, gain=None):
    """Base step size for the current iteration under the configured policy."""
    if config.policy == "gain_adaptive":
        if gain is None or l_rel is None:
            raise InvalidConstants("gain_adaptive needs L_rel and a gain value")
        return config.step_multiplier / (8.0 * l_rel * gain)
    if config.eta is not None:
        return config.eta
    if l_rel is None:
        raise InvalidConstants("no eta configured and no L_rel available")
    return config.step_multiplier / (2.0 * l_rel)


def adaptive_check(state, obj, ref, eta, f_star, rng=None, samples=None):
    """Step-size adequacy test from the adaptive criterion.

    True iff E_i D_h(x_t, x_{t+1}) <= (eta/4) [f(x_t) - f_star + f(phi_t) -
    f_star], with the expectation over the component choice taken by exact
    enumeration (``samples`` is None) or by a seeded Monte-Carlo sample.
    ``state`` must carry an SVRG-style anchor. Advisory only: candidate
    steps that leave the domain make the check fail.
    """
    n = obj.n_components
    if samples is None:
        idx = range(n)
        weight = 1.0 / n
    else:
        idx = [int(i) for i in rng.integers(0, n, size=samples)]
        weight = 1.0 / samples
    lhs = 0.0
    for i in idx:
        g = svrg_gradient(state, obj, i)
        try:
            x_next = mirror_step(ref, state.x, g, eta)
        except StepOutOfDomain:
            return False
        lhs += weight * ref.divergence(state.x, x_next)
    rhs = (eta / 4.0) * (
        obj.value(state.x) - f_star + obj.value(state.anchor) - f_star
    )
    return bool(lhs <= rhs)


# ---------------------------------------------------------------------------
# run harness
# ---------------------------------------------------------------------------


class RunFailure(StepFailure):
    """StepFailure that carries the partial trace accumulated so far."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


def _with_safeguard(attempt, eta, max_halvings):
    """Run ``attempt(eta)`` halving eta on StepOutOfDomain; returns
    (result, halvings_used)."""
    for k in range(max_halvings + 1):
        try:
            return attempt(eta), k
        except StepOutOfDomain:
            eta *= 0.5
    raise StepFailure(f"step failed after {max_halvings} halvings")


def run(config, problem):
    """Execute the configured method on ``problem`` and return a Trace.

    Deterministic given the seed. On StepFailure the partial trace is
    attached to the raised :class:`RunFailure`.
    """
    config.validate()
    obj, ref = problem.objective, problem.reference
    n = obj.n_components
    x_star, f_star = problem.x_star, problem.f_star
    comm = problem.comm_model
    l_rel = problem.meta.get("L_rel") if problem.meta else None

    rng = make_rng(config.seed)
    method = config.method
    deterministic = method in ("bgd", "mu")
    steps_total = int(round(config.epochs)) if deterministic else int(round(config.epochs * n))
    record_every = config.record_every or (1 if deterministic else n)

    store_anchors = config.store_anchors or config.policy == "gain_adaptive"
    comms = 0.0
    if method == "bsaga":
        state = SagaState.init(problem.x0, obj, store_anchors=store_anchors)
        grad_evals = n  # table initialization
        if comm is not None:
            comms += n * comm.component
    elif method == "bsvrg":
        state = SvrgState.init(problem.x0, obj)
        grad_evals = n
        if comm is not None:
            comms += comm.full_round
    else:
        state = SgdState(x=np.asarray(problem.x0, dtype=float).copy())
        grad_evals = 0

    trace = Trace(metadata={"method": method, "seed": config.seed})
    halvings_total = 0
    min_df = np.inf
    start = time.perf_counter()

    def record(eta_now, gain_now):
        nonlocal min_df
        x = state.x
        f_gap = float(obj.value(x) - f_star) if f_star is not None else float("nan")
        if x_star is not None:
            dh_gap = float(ref.divergence(x_star, x))
            min_df = min(min_df, obj.f_divergence(x_star, x))
            min_df_gap = float(min_df)
        else:
            dh_gap = float("nan")
            min_df_gap = float("nan")
        trace.append(
            TraceRecord(
                iter=state.t,
                epoch=state.t * (1.0 if deterministic else 1.0 / n),
                grad_evals=grad_evals,
                comms=comms,
                f_gap=f_gap,
                dh_gap=dh_gap,
                min_df_gap=min_df_gap,
                eta=eta_now,
                gain=gain_now,
                halvings=halvings_total,
                wall_s=time.perf_counter() - start,
            )
        )

    gain_now = 1.0
    if method == "mu":
        eta_now = float("nan")
    elif config.policy == "gain_adaptive":
        eta_now = step_policy(config, l_rel=config.gain_constants["L_rel"], gain=1.0)
    else:
        eta_now = step_policy(config, l_rel=l_rel)
    record(eta_now, gain_now)

    try:
        for _ in range(steps_total):
            if method == "mu":
                state.x = mu_step(state.x, obj.A, obj.b)
                state.t += 1
                grad_evals += n
                if comm is not None:
                    comms += comm.full_round
                eta_now, gain_now = float("nan"), 1.0
            elif method == "bgd":
                eta_now = step_policy(config, l_rel=l_rel)

                def attempt_bgd(eta):
                    return mirror_step(ref, state.x, obj.full_grad(state.x), eta)

                x_new, used = _with_safeguard(attempt_bgd, eta_now, config.max_halvings)
                halvings_total += used
                state.x = x_new
                state.t += 1
                grad_evals += n
                if comm is not None:
                    comms += comm.full_round
            elif method == "bsgd":
                eta_now = step_policy(config, l_rel=l_rel)
                i = int(rng.integers(n))
                g = obj.partial_grad(i, state.x)

                def attempt_sgd(eta):
                    return mirror_step(ref, state.x, g, eta)

                x_new, used = _with_safeguard(attempt_sgd, eta_now, config.max_halvings)
                halvings_total += used
                state.x = x_new
                state.t += 1
                grad_evals += 1
                if comm is not None:
                    comms += comm.component
            elif method == "bsaga":
                if config.policy == "gain_adaptive":
                    gain_now = gain_bound(state, config.gain_constants, n)
                    eta_now = step_policy(config, l_rel=config.gain_constants["L_rel"], gain=gain_now)
                else:
                    eta_now = step_policy(config, l_rel=l_rel)
                i = int(rng.integers(n))

                def attempt_saga(eta):
                    return bsaga_step(state, obj, ref, eta, rng, index=i)

                _, used = _with_safeguard(attempt_saga, eta_now, config.max_halvings)
                halvings_total += used
                grad_evals += 1
                if comm is not None:
                    comms += comm.component
            elif method == "bsvrg":
                eta_now = step_policy(config, l_rel=l_rel)
                i = int(rng.integers(n))
                g = svrg_gradient(state, obj, i)

                def attempt_svrg(eta):
                    return mirror_step(ref, state.x, g, eta)

                x_new, used = _with_safeguard(attempt_svrg, eta_now, config.max_halvings)
                halvings_total += used
                x_prev = state.x
                state.x = x_new
                state.t += 1
                grad_evals += 1
                if comm is not None:
                    comms += comm.component
                if rng.random() < config.p:
                    state.anchor = x_prev.copy()
                    state.anchor_grad = obj.full_grad(state.anchor)
                    grad_evals += n
                    if comm is not None:
                        comms += comm.full_round

            if state.t % record_every == 0:
                record(eta_now, gain_now)
    except StepFailure as exc:
        raise RunFailure(str(exc), trace) from exc

    if trace.final.iter != state.t:
        record(eta_now, gain_now)
    return trace


def bgd_run(obj, ref, eta, steps, x0, x_star=None, f_star=None):
    """Convenience wrapper: deterministic full-gradient mirror descent."""
    from .problems import ProblemInstance  # local import to avoid a cycle

    problem = ProblemInstance(
        objective=obj, reference=ref, x0=np.asarray(x0, dtype=float),
        x_star=x_star, f_star=f_star,
    )
    config = SolverConfig(method="bgd", eta=eta, epochs=float(steps), record_every=1)
    return run(config, problem)
