"""Accuracy metrics: per-stage recall, global accuracy, seed aggregation."""

import json

import numpy as np
import pytest

from stagecrf import metrics


def test_all_correct():
    report = metrics.evaluate({"a": [1, 1, 2]}, {"a": [1, 1, 2]})
    assert report.global_accuracy == 1.0
    assert report.per_stage == {1: 1.0, 2: 1.0}
    assert report.mean_per_stage == 1.0
    assert report.counts == {1: 2, 2: 1}


def test_hand_worked_example():
    report = metrics.evaluate({"a": [1, 1, 2, 2]}, {"a": [1, 1, 1, 2]})
    assert report.global_accuracy == pytest.approx(0.75, abs=1e-12)
    assert report.per_stage[1] == pytest.approx(2 / 3, abs=1e-12)
    assert report.per_stage[2] == pytest.approx(1.0, abs=1e-12)
    assert report.mean_per_stage == pytest.approx(5 / 6, abs=1e-12)
    assert report.counts == {1: 3, 2: 1}


def test_fixed_row_mean_recovery():
    # a fixed eight-stage accuracy row whose rounded mean is 76.8
    row = [99.9, 99.9, 94.9, 99.9, 35.1, 84.6, 71.4, 29.0]
    assert abs(float(np.mean(row)) - 76.8) < 0.05


def test_global_is_count_weighted_mean_of_stages():
    rng = np.random.default_rng(31)
    golds, preds = {}, {}
    for i in range(8):
        T = int(rng.integers(5, 40))
        gold = np.sort(rng.integers(1, 6, size=T))
        pred = gold.copy()
        wrong = rng.random(T) < 0.3
        pred[wrong] = rng.integers(1, 6, size=int(wrong.sum()))
        golds[f"v{i}"] = gold
        preds[f"v{i}"] = pred
    report = metrics.evaluate(preds, golds)
    weighted = sum(report.per_stage[s] * report.counts[s] for s in report.per_stage)
    assert report.global_accuracy == pytest.approx(weighted / sum(report.counts.values()), abs=1e-12)


def test_absent_stages_are_omitted():
    report = metrics.evaluate({"a": [1, 3, 3]}, {"a": [1, 3, 3]})
    assert sorted(report.per_stage) == [1, 3]


def test_evaluate_pools_counts_across_videos():
    report = metrics.evaluate(
        {"a": [1, 2], "b": [1, 1]},
        {"a": [1, 1], "b": [1, 1]},
    )
    # stage 1: 3 of 4 frames correct across both videos
    assert report.per_stage[1] == pytest.approx(0.75, abs=1e-12)
    assert report.counts == {1: 4}


def test_evaluate_errors_name_the_video():
    with pytest.raises(ValueError, match="video b"):
        metrics.evaluate({"a": [1, 2]}, {"a": [1, 2], "b": [1, 2]})
    with pytest.raises(ValueError, match="video c"):
        metrics.evaluate({"a": [1, 2], "c": [1]}, {"a": [1, 2]})
    with pytest.raises(ValueError, match="video a"):
        metrics.evaluate({"a": [1, 2, 2]}, {"a": [1, 2]})
    with pytest.raises(ValueError, match="nothing"):
        metrics.evaluate({}, {})


def test_report_round_trips_through_json():
    report = metrics.evaluate({"a": [1, 1, 2, 2]}, {"a": [1, 1, 1, 2]})
    doc = json.loads(report.to_json())
    assert doc["global"] == report.global_accuracy
    back = metrics.EvalReport.from_dict(doc)
    assert back == report


def test_aggregate_two_seeds():
    reports = [
        metrics.EvalReport(0.8, {1: 0.8}, 0.8, {1: 10}),
        metrics.EvalReport(0.9, {1: 0.9}, 0.9, {1: 10}),
    ]
    agg = metrics.aggregate_seeds(reports)
    mean, std = agg["global"]
    assert mean == pytest.approx(0.85, abs=1e-12)
    assert std == pytest.approx(0.07071067811865474, abs=1e-12)


def test_aggregate_single_seed_and_stage_union():
    only = metrics.EvalReport(0.8, {1: 0.7, 2: 0.9}, 0.8, {1: 5, 2: 5})
    agg = metrics.aggregate_seeds([only])
    assert agg["global"] == (0.8, 0.0)
    mixed = metrics.aggregate_seeds(
        [only, metrics.EvalReport(1.0, {2: 1.0, 3: 0.5}, 0.75, {2: 4, 3: 4})]
    )
    assert sorted(mixed["per_stage"]) == [1, 2, 3]
    assert mixed["per_stage"][1] == (0.7, 0.0)
    assert mixed["per_stage"][2][0] == pytest.approx(0.95, abs=1e-12)


def test_aggregate_order_invariant():
    reports = [
        metrics.EvalReport(0.5, {1: 0.5}, 0.5, {1: 2}),
        metrics.EvalReport(0.7, {1: 0.7}, 0.7, {1: 2}),
        metrics.EvalReport(0.9, {1: 0.9}, 0.9, {1: 2}),
    ]
    a = metrics.aggregate_seeds(reports)
    b = metrics.aggregate_seeds(list(reversed(reports)))
    assert a == b
    with pytest.raises(ValueError):
        metrics.aggregate_seeds([])


def test_format_report_lists_stages():
    report = metrics.evaluate({"a": [1, 1, 2, 2]}, {"a": [1, 1, 1, 2]})
    text = metrics.format_report(report, title="demo")
    assert "demo" in text
    assert "Global" in text and "75.0" in text


def test_format_table_shows_mean_and_std():
    reports = [
        metrics.EvalReport(0.8, {1: 0.8}, 0.8, {1: 10}),
        metrics.EvalReport(0.9, {1: 0.9}, 0.9, {1: 10}),
    ]
    text = metrics.format_table(metrics.aggregate_seeds(reports), title="seeds")
    assert "seeds" in text
    assert "85.0" in text and "7.1" in text
