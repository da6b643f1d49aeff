import math
import random

import pytest

from factkit.errors import EmptyInput, LengthMismatch, SchemaMismatch
from factkit.metrics import (
    MeanStd,
    aggregate_seeds,
    evaluate_labelsets,
    f1_per_label,
    format_mean_std,
    harmonize_reports,
    macro_f1,
    pooled_overall_f1,
    render_aggregate,
)
from factkit.taxonomy import DIMENSIONS, Dimension, LabelSet


def oracle_f1(gold, pred):
    """Independent confusion-matrix computation, written dumbly."""
    labels = sorted(set(gold) | set(pred), key=repr)
    out = {}
    for label in labels:
        tp = sum(1 for g, p in zip(gold, pred) if g == label and p == label)
        fp = sum(1 for g, p in zip(gold, pred) if g != label and p == label)
        fn = sum(1 for g, p in zip(gold, pred) if g == label and p != label)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        out[label] = f1
    return out


def test_perfect_predictions():
    gold = ["A", "B", "A", "C"]
    scores = f1_per_label(gold, gold)
    assert all(s.f1 == 1.0 for s in scores.values())
    assert macro_f1(gold, gold) == 1.0


def test_hand_computed_example():
    gold = ["A", "A", "B", "B"]
    pred = ["A", "B", "B", "B"]
    scores = f1_per_label(gold, pred)
    assert scores["A"].f1 == pytest.approx(2 / 3, abs=1e-12)
    assert scores["B"].f1 == pytest.approx(0.8, abs=1e-12)
    assert scores["A"].support == 2
    assert macro_f1(gold, pred) == pytest.approx((2 / 3 + 0.8) / 2, abs=1e-9)


def test_absent_label_not_reported():
    scores = f1_per_label(["A", "A"], ["A", "A"])
    assert set(scores) == {"A"}


def test_zero_division_gives_zero_f1():
    # B predicted never and gold never overlapping predictions
    scores = f1_per_label(["B"], ["A"])
    assert scores["B"].f1 == 0.0
    assert scores["A"].f1 == 0.0


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        macro_f1(["A"], ["A", "B"])
    with pytest.raises(EmptyInput):
        macro_f1([], [])


def test_macro_relabeling_invariance():
    rng = random.Random(0)
    gold = [rng.choice("ABC") for _ in range(40)]
    pred = [rng.choice("ABC") for _ in range(40)]
    mapping = {"A": "X", "B": "Y", "C": "Z"}
    assert macro_f1(gold, pred) == pytest.approx(
        macro_f1([mapping[g] for g in gold], [mapping[p] for p in pred]), abs=1e-12
    )


def test_macro_matches_oracle_random():
    rng = random.Random(1)
    for _ in range(200):
        n = rng.randint(1, 50)
        labels = "ABCDEF"[: rng.randint(1, 6)]
        gold = [rng.choice(labels) for _ in range(n)]
        pred = [rng.choice(labels) for _ in range(n)]
        oracle = oracle_f1(gold, pred)
        assert macro_f1(gold, pred) == pytest.approx(
            sum(oracle.values()) / len(oracle), abs=1e-9
        )


# --- pooled overall ---


def valid_labels(main="Preferences", time="Present", followup="None"):
    return LabelSet(
        main_category=main,
        time=time,
        referent="Self",
        duration="Long-term",
        followup=followup,
    )


def test_pooled_identical_sets():
    sets = [valid_labels(), LabelSet.invalid("Opinion")]
    assert pooled_overall_f1(sets, sets) == 1.0


def test_pooled_one_wrong_dimension_below_category_mean():
    gold = [valid_labels(main="Preferences")]
    pred = [valid_labels(main="Experience")]
    pooled = pooled_overall_f1(gold, pred)

    # oracle: pooled confusion matrix over (dimension, label) types
    pairs_gold, pairs_pred = [], []
    for dim in DIMENSIONS:
        pairs_gold.append((dim.value, gold[0].get(dim)))
        pairs_pred.append((dim.value, pred[0].get(dim)))
    oracle = oracle_f1(pairs_gold, pairs_pred)
    assert pooled == pytest.approx(sum(oracle.values()) / len(oracle), abs=1e-12)
    assert pooled == pytest.approx(6 / 8, abs=1e-12)

    mean_of_macros = sum(
        macro_f1([g.get(d) for g in gold], [p.get(d) for p in pred]) for d in DIMENSIONS
    ) / len(DIMENSIONS)
    assert pooled < mean_of_macros


def test_pooled_locality_of_errors():
    gold = [valid_labels(time="Future", followup="Yes"), valid_labels(time="Future", followup="Yes")]
    pred_good = [valid_labels(time="Future", followup="Yes"), valid_labels(time="Future", followup="Yes")]
    pred_bad = [valid_labels(time="Future", followup="Yes"), valid_labels(time="Future", followup="Maybe")]
    # only followup-related pooled types may change
    full = f1_per_label(*_pooled_pairs(gold, pred_good))
    damaged = f1_per_label(*_pooled_pairs(gold, pred_bad))
    changed = {k for k in set(full) | set(damaged) if full.get(k) != damaged.get(k)}
    assert all(key[0] == "followup" for key in changed)
    assert changed


def _pooled_pairs(gold_sets, pred_sets):
    pairs_gold, pairs_pred = [], []
    for g, p in zip(gold_sets, pred_sets):
        for dim in DIMENSIONS:
            pairs_gold.append((dim.value, g.get(dim)))
            pairs_pred.append((dim.value, p.get(dim)))
    return pairs_gold, pairs_pred


def test_pooled_single_dimension_reduces_to_macro():
    rng = random.Random(2)
    mains = ["Preferences", "Experience", "Demographics"]
    gold = [valid_labels(main=rng.choice(mains)) for _ in range(30)]
    pred = [valid_labels(main=rng.choice(mains)) for _ in range(30)]
    pooled = pooled_overall_f1(gold, pred, dimensions=[Dimension.MAIN_CATEGORY])
    plain = macro_f1([g.main_category for g in gold], [p.main_category for p in pred])
    assert pooled == pytest.approx(plain, abs=1e-12)


def test_pooled_matches_oracle_random():
    rng = random.Random(3)
    mains = ["Preferences", "Experience", "Demographics", "None"]
    times = ["Past", "Present", "Future", "None"]
    for _ in range(200):
        n = rng.randint(1, 25)
        gold = [
            LabelSet(main_category=rng.choice(mains), time=rng.choice(times))
            for _ in range(n)
        ]
        pred = [
            LabelSet(main_category=rng.choice(mains), time=rng.choice(times))
            for _ in range(n)
        ]
        oracle = oracle_f1(*_pooled_pairs(gold, pred))
        assert pooled_overall_f1(gold, pred) == pytest.approx(
            sum(oracle.values()) / len(oracle), abs=1e-9
        )


def test_evaluate_labelsets_report_consistency():
    rng = random.Random(4)
    mains = ["Preferences", "Experience"]
    gold = [valid_labels(main=rng.choice(mains)) for _ in range(20)]
    pred = [valid_labels(main=rng.choice(mains)) for _ in range(20)]
    report = evaluate_labelsets(gold, pred)
    # per-category macro equals the mean of that category's per-label scores
    for dim in DIMENSIONS:
        labels = [l for (d, l) in report.per_label_f1 if d == dim]
        mean = sum(report.per_label_f1[(dim, l)] for l in labels) / len(labels)
        assert report.per_category_macro_f1[dim] == pytest.approx(mean, abs=1e-12)
    assert 0.0 <= report.overall_macro_f1 <= 1.0


# --- seed aggregation ---


def report_of(value: float, main="Preferences"):
    gold = [valid_labels(main=main)] * 3
    report = evaluate_labelsets(gold, gold)
    # patch the overall for aggregation arithmetic tests
    return type(report)(
        per_label_f1=dict(report.per_label_f1),
        per_category_macro_f1=dict(report.per_category_macro_f1),
        overall_macro_f1=value,
        support=dict(report.support),
    )


def test_aggregate_identical_reports():
    agg = aggregate_seeds([report_of(0.8)] * 5)
    assert agg.overall == MeanStd(0.8, 0.0)
    assert agg.n_seeds == 5
    assert not agg.degenerate
    assert all(stat.std == 0.0 for stat in agg.per_label.values())


def test_aggregate_two_point_hand_computation():
    agg = aggregate_seeds([report_of(0.80), report_of(0.82)])
    assert agg.overall.mean == pytest.approx(0.81, abs=1e-12)
    assert agg.overall.std == pytest.approx(math.sqrt(2) / 100, abs=1e-12)


def test_aggregate_order_invariance():
    a = aggregate_seeds([report_of(0.7), report_of(0.8), report_of(0.9)])
    b = aggregate_seeds([report_of(0.9), report_of(0.7), report_of(0.8)])
    assert a == b


def test_aggregate_single_report_degenerate():
    agg = aggregate_seeds([report_of(0.5)])
    assert agg.degenerate
    assert agg.overall.std == 0.0


def test_aggregate_schema_mismatch():
    with pytest.raises(SchemaMismatch):
        aggregate_seeds([report_of(0.5, main="Preferences"), report_of(0.5, main="Experience")])


def test_harmonize_reports_drops_disjoint_labels():
    reports = [report_of(0.5, main="Preferences"), report_of(0.5, main="Experience")]
    trimmed, dropped = harmonize_reports(reports)
    agg = aggregate_seeds(trimmed)
    assert agg.n_seeds == 2
    dropped_keys = {(d.value, l) for d, l in dropped}
    assert ("main_category", "Preferences") in dropped_keys
    assert ("main_category", "Experience") in dropped_keys


def test_format_mean_std():
    assert format_mean_std(MeanStd(0.794, 0.025)) == "79.4±2.5"


def test_render_aggregate_contains_machine_lines():
    text = render_aggregate(aggregate_seeds([report_of(0.75)] * 2))
    assert "overall_macro_f1.mean=0.750000" in text
    assert "per_category.main_category.mean=" in text
