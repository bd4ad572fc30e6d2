"""Acceptance battery, one test per criterion.

The criteria share a Battery instance so that the determinism criterion can
replay every solver run registered by the earlier criteria. Each test prints
the individual check lines before asserting, so a failing criterion shows
exactly which quantity missed its tolerance and by how much.
"""

import pytest

from bregopt.verify import Battery


@pytest.fixture(scope="module")
def battery():
    return Battery()


def assert_all_pass(checks):
    for check in checks:
        print(check.line())
    failing = [c.name for c in checks if not c.passed]
    assert not failing, f"failed checks: {failing}"


class TestAcceptance:
    def test_criterion_1_lemma_certification(self, battery):
        assert_all_pass(battery.criterion_1())

    def test_criterion_2_interpolation_linear_rate(self, battery):
        assert_all_pass(battery.criterion_2())

    def test_criterion_3_plateau_scales_with_step(self, battery):
        assert_all_pass(battery.criterion_3())

    def test_criterion_4_saga_beats_sgd_plateau(self, battery):
        assert_all_pass(battery.criterion_4())

    def test_criterion_5_potential_contraction(self, battery):
        assert_all_pass(battery.criterion_5())

    def test_criterion_6_tomography_epoch_budget(self, battery):
        assert_all_pass(battery.criterion_6())

    def test_criterion_7_distributed_comm_budget(self, battery):
        assert_all_pass(battery.criterion_7())

    def test_criterion_8_sparse_smoothness_constant(self, battery):
        assert_all_pass(battery.criterion_8())

    def test_criterion_9_multiplicative_updates(self, battery):
        assert_all_pass(battery.criterion_9())

    def test_criterion_10_trace_determinism(self, battery):
        assert_all_pass(battery.criterion_10())
