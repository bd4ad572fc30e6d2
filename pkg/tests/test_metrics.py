"""Tests for the trace container, rate fitting, and lemma certification."""

import io

import numpy as np
import pytest

from bregopt import (
    CheckResult,
    DiagonalQuadratic,
    Euclidean,
    InsufficientData,
    SagaState,
    Trace,
    TraceRecord,
    bsaga_step,
    certify_lemmas,
    plateau_level,
    rate_fit,
    saga_potential,
    saga_table_error,
    svrg_potential,
    SvrgState,
)
from bregopt.rng import make_rng


def make_record(i, dh, grad_evals=None, comms=None):
    return TraceRecord(
        iter=i, epoch=float(i), grad_evals=grad_evals if grad_evals is not None else i,
        comms=comms if comms is not None else float(i), f_gap=dh, dh_gap=dh,
        min_df_gap=dh, eta=0.1, gain=1.0, halvings=0, wall_s=0.0,
    )


class TestTrace:
    def test_append_requires_monotone_counters(self):
        trace = Trace()
        trace.append(make_record(0, 1.0, grad_evals=5))
        with pytest.raises(AssertionError):
            trace.append(make_record(1, 0.5, grad_evals=3))

    def test_csv_roundtrip(self):
        trace = Trace()
        for i in range(5):
            trace.append(make_record(i, 2.0 ** -i))
        back = Trace.from_csv(io.StringIO(trace.to_csv_string()))
        assert len(back) == 5
        for a, b in zip(trace.records, back.records):
            assert a.as_row() == b.as_row()

    def test_csv_floats_use_shortest_roundtrip(self):
        trace = Trace()
        trace.append(make_record(0, 0.1))
        assert ",0.1," in trace.to_csv_string()

    def test_bad_header_rejected(self):
        with pytest.raises(ValueError):
            Trace.from_csv(io.StringIO("a,b,c\n"))


class TestRateFit:
    def test_exact_geometric(self):
        r = 0.9
        values = r ** np.arange(40)
        assert rate_fit(values, 20) == pytest.approx(r, rel=1e-9)

    def test_constant_sequence(self):
        assert rate_fit(np.ones(30), 10) == pytest.approx(1.0, rel=1e-12)

    def test_respects_iteration_column(self):
        r = 0.8
        iters = np.arange(0, 40, 2)
        values = r ** iters
        assert rate_fit(values, 10, iters=iters) == pytest.approx(r, rel=1e-9)

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            rate_fit(np.array([1.0]), 5)

    def test_ignores_exact_zeros(self):
        values = np.concatenate([0.5 ** np.arange(20), np.zeros(5)])
        assert rate_fit(values, 10) == pytest.approx(0.5, rel=1e-9)


class TestPlateau:
    def trace_from_values(self, values):
        trace = Trace()
        for i, v in enumerate(values):
            trace.append(make_record(i, v))
        return trace

    def test_flat_tail_detected(self):
        values = np.concatenate([0.5 ** np.arange(20), np.full(20, 1e-6)])
        level, is_plateau = plateau_level(self.trace_from_values(values))
        assert is_plateau
        assert level == pytest.approx(1e-6)

    def test_decaying_tail_not_a_plateau(self):
        values = 0.5 ** np.arange(40)
        _, is_plateau = plateau_level(self.trace_from_values(values))
        assert not is_plateau


class TestPotentials:
    def build(self):
        rng = make_rng(1)
        Q = rng.uniform(0.5, 2.0, size=(8, 3))
        C = rng.normal(size=(8, 3))
        obj = DiagonalQuadratic(Q, C)
        return obj, obj.minimizer(), rng

    def test_saga_potential_positive_and_shrinks(self):
        obj, xs, rng = self.build()
        ref = Euclidean()
        state = SagaState.init(xs + rng.normal(size=3), obj, store_anchors=True)
        eta = 0.05
        start = saga_potential(state, obj, ref, xs, eta)
        assert start > 0
        for _ in range(200):
            bsaga_step(state, obj, ref, eta, rng)
        assert saga_potential(state, obj, ref, xs, eta) < start

    def test_table_error_zero_at_optimum(self):
        obj, xs, _ = self.build()
        state = SagaState.init(xs, obj, store_anchors=True)
        assert saga_table_error(state, obj, xs) == pytest.approx(0.0, abs=1e-14)

    def test_svrg_potential_zero_at_optimum(self):
        obj, xs, _ = self.build()
        state = SvrgState.init(xs, obj)
        assert svrg_potential(state, obj, Euclidean(), xs, 0.05, 0.1) == pytest.approx(
            0.0, abs=1e-14
        )


class TestCheckResult:
    def test_pass_fail_logic(self):
        assert CheckResult("a", 1, 0.5, 1.0).passed
        assert not CheckResult("a", 1, 2.0, 1.0).passed

    def test_line_mentions_name(self):
        line = CheckResult("duality", 10, 0.0, 1e-9).line()
        assert "duality" in line
        assert "PASS" in line


class TestCertification:
    def test_all_kinds_pass_quickly(self):
        report = certify_lemmas(samples=60)
        assert report.passed
        names = [c.name for c in report.checks]
        for kind in ("euclidean", "log_barrier", "neg_entropy"):
            assert any(kind in name for name in names)

    def test_scaled_constant_breaks_cocoercivity(self):
        # cocoercivity at eta = 1/L is tight; understating L must be caught
        report = certify_lemmas(samples=60, l_scale=0.5)
        failing = [c for c in report.checks if not c.passed]
        assert failing
        assert any("cocoercivity" in c.name for c in failing)

    def test_seeded_determinism(self):
        a = certify_lemmas(samples=40, seed=3)
        b = certify_lemmas(samples=40, seed=3)
        for ca, cb in zip(a.checks, b.checks):
            assert ca.max_violation == cb.max_violation
