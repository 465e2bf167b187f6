"""Confidence gate and evaluation reports."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partmap import (
    LabeledSet,
    ParameterError,
    ValidationError,
    evaluate,
    fuse,
)
from partmap.fusion import COMPOSITIONAL, EXTERNAL


class TestFuse:
    def test_confident_external_wins(self):
        decision = fuse([0.7, 0.3], comp_label=1, tau=0.6)
        assert decision.label == 0
        assert decision.branch == EXTERNAL
        assert decision.dcnn_confidence == 0.7

    def test_uncertain_falls_to_compositional(self):
        decision = fuse([0.5, 0.5], comp_label=1, tau=0.6)
        assert decision.label == 1
        assert decision.branch == COMPOSITIONAL

    def test_gate_extremes(self):
        # tau = 0: any strictly positive max fires the gate
        assert fuse([0.6, 0.4], 1, tau=0.0).branch == EXTERNAL
        # tau = 1: probabilities cannot exceed 1, so the gate never fires
        assert fuse([1.0, 0.0], 0, tau=1.0).branch == COMPOSITIONAL

    def test_exact_threshold_is_not_enough(self):
        decision = fuse([0.6, 0.4], comp_label=1, tau=0.6)
        assert decision.branch == COMPOSITIONAL

    def test_argmax_tie_goes_to_lowest_index(self):
        decision = fuse([0.4, 0.4, 0.2], comp_label=2, tau=0.3)
        assert decision.branch == EXTERNAL
        assert decision.label == 0

    def test_rejects_bad_probabilities(self):
        with pytest.raises(ParameterError):
            fuse([0.9, 0.2], 0, tau=0.5)  # sums to 1.1
        with pytest.raises(ParameterError):
            fuse([1.2, -0.2], 0, tau=0.5)  # negative entry
        with pytest.raises(ParameterError):
            fuse([0.5, 0.5], 0, tau=1.5)  # tau out of range

    def test_sum_tolerance_is_not_renormalization(self):
        decision = fuse([0.70004, 0.29999], comp_label=1, tau=0.7)
        assert decision.branch == EXTERNAL
        assert decision.dcnn_confidence == 0.70004

    @settings(max_examples=200, deadline=None)
    @given(
        seed=st.integers(0, 10_000),
        tau_lo=st.floats(0.0, 1.0),
        tau_hi=st.floats(0.0, 1.0),
    )
    def test_monotone_in_tau(self, seed, tau_lo, tau_hi):
        # raising tau can only move a decision from external to compositional
        if tau_lo > tau_hi:
            tau_lo, tau_hi = tau_hi, tau_lo
        rng = np.random.default_rng(seed)
        probs = rng.dirichlet(np.ones(4))
        low = fuse(probs, comp_label=3, tau=tau_lo)
        high = fuse(probs, comp_label=3, tau=tau_hi)
        assert not (low.branch == COMPOSITIONAL and high.branch == EXTERNAL)


def truth_set():
    return LabeledSet(
        ids=("a", "b", "c", "d", "e", "f"),
        labels=(0, 0, 1, 1, 2, 2),
        class_names=("x", "y", "z"),
    )


class TestEvaluate:
    def test_all_correct(self):
        report = evaluate([("a", 0), ("c", 1), ("e", 2)], truth_set())
        assert report.per_condition == {"all": (1.0, 3)}
        assert report.mean_accuracy == 1.0

    def test_three_of_four(self):
        report = evaluate([("a", 0), ("b", 0), ("c", 1), ("d", 0)], truth_set())
        assert report.per_condition["all"] == (0.75, 4)

    def test_hand_built_fixture_matches_by_hand_table(self):
        # by hand: clean = {a right, b wrong} -> 1/2; noisy = {c right, d right,
        # e wrong, f right} -> 3/4; mean over cells = (0.5 + 0.75) / 2 = 0.625
        predictions = [("a", 0), ("b", 1), ("c", 1), ("d", 1), ("e", 0), ("f", 2)]
        tags = {"a": "clean", "b": "clean", "c": "noisy", "d": "noisy", "e": "noisy", "f": "noisy"}
        report = evaluate(predictions, truth_set(), condition_tags=tags)
        assert report.per_condition == {"clean": (0.5, 2), "noisy": (0.75, 4)}
        assert report.mean_accuracy == pytest.approx(0.625)
        # confusion: row = truth, col = prediction
        expected = np.zeros((3, 3), dtype=np.int64)
        expected[0, 0] += 1  # a
        expected[0, 1] += 1  # b
        expected[1, 1] += 2  # c, d
        expected[2, 0] += 1  # e
        expected[2, 2] += 1  # f
        assert np.array_equal(report.confusion, expected)

    def test_unknown_source_id_names_offender(self):
        with pytest.raises(ValidationError, match="ghost"):
            evaluate([("ghost", 0)], truth_set())

    def test_permutation_invariance(self):
        predictions = [("a", 0), ("b", 1), ("c", 1), ("d", 1), ("e", 0), ("f", 2)]
        report_a = evaluate(predictions, truth_set())
        report_b = evaluate(list(reversed(predictions)), truth_set())
        assert report_a.per_condition == report_b.per_condition
        assert np.array_equal(report_a.confusion, report_b.confusion)

    def test_branch_usage_sums_to_one(self):
        predictions = [("a", 0), ("b", 0), ("c", 1)]
        branches = [EXTERNAL, COMPOSITIONAL, COMPOSITIONAL]
        report = evaluate(predictions, truth_set(), branches=branches)
        assert report.branch_usage == {EXTERNAL: pytest.approx(1 / 3), COMPOSITIONAL: pytest.approx(2 / 3)}
        assert sum(report.branch_usage.values()) == pytest.approx(1.0)

    def test_empty_predictions(self):
        with pytest.raises(ParameterError):
            evaluate([], truth_set())
