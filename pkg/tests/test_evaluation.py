"""Accuracy metrics, the efficiency-weighted variant, and influence counts."""

import math

import pytest

from k2sql.evaluation import (
    DifficultyBucket,
    EvaluationReport,
    InstanceScore,
    build_report,
    classify_influence,
    difficulty_breakdown,
    execution_accuracy,
    valid_efficiency_score,
)
from k2sql.model import Difficulty


def score(i, matched, tg=None, tp=None, difficulty=Difficulty.UNKNOWN):
    return InstanceScore(
        instance_id=str(i), matched=matched, time_gold=tg, time_pred=tp, difficulty=difficulty
    )


class TestExecutionAccuracy:
    def test_fraction_of_matches(self):
        scores = [score(1, True), score(2, False), score(3, True), score(4, True)]
        assert execution_accuracy(scores) == 75.0

    def test_all_and_none(self):
        assert execution_accuracy([score(1, True)]) == 100.0
        assert execution_accuracy([score(1, False)]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            execution_accuracy([])


class TestValidEfficiencyScore:
    def test_equal_times_reduce_to_accuracy(self):
        scores = [score(1, True, 2.0, 2.0), score(2, False), score(3, True, 0.5, 0.5)]
        assert valid_efficiency_score(scores) == pytest.approx(execution_accuracy(scores))

    def test_speedup_weights_sqrt(self):
        scores = [score(1, True, 4.0, 1.0)]
        assert valid_efficiency_score(scores) == pytest.approx(100.0 * 2.0)

    def test_slowdown_weights_below_one(self):
        scores = [score(1, True, 1.0, 4.0), score(2, True, 1.0, 1.0)]
        assert valid_efficiency_score(scores) == pytest.approx(100.0 * (0.5 + 1.0) / 2)

    def test_unmatched_instances_stay_in_denominator(self):
        scores = [score(1, True, 1.0, 1.0), score(2, False)]
        assert valid_efficiency_score(scores) == pytest.approx(50.0)

    def test_invalid_times_excluded_from_both_sides(self, caplog):
        scores = [
            score(1, True, 1.0, 1.0),
            score(2, True, None, 1.0),
            score(3, True, 0.0, 1.0),
        ]
        with caplog.at_level("WARNING"):
            got = valid_efficiency_score(scores)
        assert got == pytest.approx(100.0)
        assert sum("excluding" in r.message for r in caplog.records) == 2

    def test_all_excluded_raises(self):
        with pytest.raises(ValueError):
            valid_efficiency_score([score(1, True, None, None)])


class TestDifficultyBreakdown:
    def test_buckets_and_omission(self):
        scores = [
            score(1, True, difficulty=Difficulty.SIMPLE),
            score(2, False, difficulty=Difficulty.SIMPLE),
            score(3, True, difficulty=Difficulty.CHALLENGING),
        ]
        got = difficulty_breakdown(scores)
        assert got[Difficulty.SIMPLE] == DifficultyBucket(ex=50.0, n=2)
        assert got[Difficulty.CHALLENGING] == DifficultyBucket(ex=100.0, n=1)
        assert Difficulty.MODERATE not in got

    def test_buckets_recombine_to_overall(self):
        scores = [
            score(i, i % 3 == 0, difficulty=d)
            for i, d in enumerate(
                [Difficulty.SIMPLE, Difficulty.MODERATE, Difficulty.CHALLENGING] * 7
            )
        ]
        got = difficulty_breakdown(scores)
        weighted = sum(b.ex * b.n for b in got.values()) / sum(b.n for b in got.values())
        assert weighted == pytest.approx(execution_accuracy(scores), abs=1e-9)


class TestClassifyInfluence:
    def test_four_way_partition(self):
        baseline = {"a": False, "b": True, "c": False, "d": True, "e": True}
        assisted = {"a": True, "b": False, "c": False, "d": True, "e": True}
        got = classify_influence(baseline, assisted)
        assert got == {
            "assistance": 1,
            "misleading": 1,
            "inoperative": 1,
            "sustainable": 2,
        }

    def test_counts_sum_to_population(self):
        baseline = {str(i): i % 2 == 0 for i in range(17)}
        assisted = {str(i): i % 3 == 0 for i in range(17)}
        got = classify_influence(baseline, assisted)
        assert sum(got.values()) == 17

    def test_key_mismatch_rejected(self):
        with pytest.raises(ValueError):
            classify_influence({"a": True}, {"b": True})


class TestReport:
    def test_build_report_round_numbers(self):
        scores = [
            score(1, True, 1.0, 1.0, Difficulty.SIMPLE),
            score(2, False, difficulty=Difficulty.SIMPLE),
        ]
        report = build_report(scores, with_timing=True)
        assert report.ex == 50.0
        assert report.ves == pytest.approx(50.0)
        assert report.n == 2
        assert report.per_difficulty[Difficulty.SIMPLE].n == 2

    def test_timing_off_leaves_ves_unset(self):
        report = build_report([score(1, True)])
        assert report.ves is None

    def test_influence_must_sum_to_n(self):
        with pytest.raises(ValueError):
            EvaluationReport(
                ex=50.0,
                n=2,
                influence={
                    "assistance": 5,
                    "misleading": 0,
                    "inoperative": 0,
                    "sustainable": 0,
                },
            )

    def test_influence_keys_validated(self):
        with pytest.raises(ValueError):
            EvaluationReport(ex=0.0, n=1, influence={"assistance": 1})

    def test_json_shape(self):
        report = build_report(
            [score(1, True, difficulty=Difficulty.SIMPLE)],
            influence={"assistance": 1, "misleading": 0, "inoperative": 0, "sustainable": 0},
        )
        payload = report.to_json_dict()
        assert payload["ex"] == 100.0
        assert payload["ves"] is None
        assert payload["per_difficulty"] == {"simple": {"ex": 100.0, "n": 1}}
        assert payload["influence"]["assistance"] == 1

    def test_text_table_lists_metrics(self):
        report = build_report([score(1, True)])
        table = report.to_text_table()
        assert "EX" in table and "100.00" in table
        assert "VES" in table and "-" in table

    def test_small_sample_warning(self, caplog):
        with caplog.at_level("WARNING"):
            build_report([score(1, True)])
        assert any("noisy" in r.message for r in caplog.records)
