import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mousevision.evaluate import (
    ConfusionMatrix,
    classification_metrics,
    confusion_matrix,
    crossval_report,
    metrics_csv,
    roc_auc,
)
from mousevision.exceptions import UsageError
from mousevision.validation import LABELS


def mann_whitney_exact(scores, positives):
    """Pairwise-count oracle: P(pos outranks neg), ties credited 0.5."""
    scores = np.asarray(scores, dtype=float)
    positives = np.asarray(positives, dtype=bool)
    pos = scores[positives][:, None]
    neg = scores[~positives][None, :]
    wins2 = 2 * int((pos > neg).sum()) + int((pos == neg).sum())
    return wins2 / (2 * pos.shape[0] * neg.shape[1])


# ------------------------------------------------------------ confusion matrix


def test_perfect_predictions_are_diagonal():
    labels = list(LABELS) * 3
    cm = confusion_matrix(labels, labels)
    assert np.array_equal(cm.counts, np.diag([3] * 5))
    assert cm.total == 15


def test_hand_counted_matrix():
    cm = confusion_matrix(["eating", "eating", "grooming"], ["eating", "grooming", "grooming"])
    assert cm.counts[0, 0] == 1
    assert cm.counts[0, 1] == 1
    assert cm.counts[1, 1] == 1
    assert cm.total == 3


def test_confusion_matrix_input_validation():
    with pytest.raises(UsageError):
        confusion_matrix([], [])
    with pytest.raises(UsageError):
        confusion_matrix(["eating"], ["eating", "grooming"])


# ------------------------------------------------------------ derived metrics


def test_fixed_precision_recall_trio():
    # tp=8463 with 837 false positives and 637 false negatives gives
    # precision 0.91 and recall 0.93 exactly; F1 = 2*0.91*0.93/1.84
    counts = np.zeros((5, 5), dtype=np.int64)
    abn = LABELS.index("abnormal")
    eat = LABELS.index("eating")
    counts[abn, abn] = 8463
    counts[eat, abn] = 837
    counts[abn, eat] = 637
    counts[eat, eat] = 10000
    report = classification_metrics(ConfusionMatrix(counts))
    m = report.per_class["abnormal"]
    assert m.precision == pytest.approx(0.91, abs=1e-12)
    assert m.recall == pytest.approx(0.93, abs=1e-12)
    assert round(m.f1, 4) == 0.9199
    assert m.f1 == pytest.approx(2 * 0.91 * 0.93 / (0.91 + 0.93), abs=1e-12)


def test_diagonal_matrix_gives_perfect_metrics():
    cm = ConfusionMatrix(np.diag([4, 3, 2, 1, 5]))
    report = classification_metrics(cm)
    assert report.accuracy == 1.0
    for m in report.per_class.values():
        assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)
    assert report.precision_macro == report.recall_macro == report.f1_macro == 1.0


def test_zero_denominators_are_flagged_not_nan():
    counts = np.zeros((5, 5), dtype=np.int64)
    counts[0, 0] = 10  # only 'eating' present, never predicted otherwise
    report = classification_metrics(ConfusionMatrix(counts))
    m = report.per_class["abnormal"]
    assert m.precision == 0.0 and not m.precision_defined
    assert m.recall == 0.0 and not m.recall_defined
    assert m.f1 == 0.0 and not m.f1_defined
    # macro averages only cover defined classes
    assert report.precision_macro == 1.0
    assert report.recall_macro == 1.0


def test_empty_matrix_rejected():
    with pytest.raises(UsageError):
        classification_metrics(ConfusionMatrix(np.zeros((5, 5), np.int64)))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 9), min_size=25, max_size=25))
def test_accuracy_identities(flat):
    counts = np.array(flat, dtype=np.int64).reshape(5, 5)
    if counts.sum() == 0:
        counts[0, 0] = 1
    cm = ConfusionMatrix(counts)
    report = classification_metrics(cm)
    assert report.accuracy == np.trace(counts) / counts.sum()
    # micro-averaged recall over all samples equals accuracy
    micro = sum(counts[i, i] for i in range(5)) / counts.sum()
    assert report.accuracy == micro


# ------------------------------------------------------------ roc / auc


def test_auc_perfect_separation():
    curve, auc = roc_auc([0.9, 0.8, 0.3, 0.2], [True, True, False, False])
    assert auc == 1.0
    assert curve.points[0] == (0.0, 0.0)
    assert curve.points[-1] == (1.0, 1.0)


def test_auc_perfect_inversion():
    _, auc = roc_auc([0.2, 0.9], [True, False])
    assert auc == 0.0


def test_auc_all_tied_is_half():
    _, auc = roc_auc([0.5, 0.5, 0.5, 0.5], [True, False, True, False])
    assert auc == 0.5


def test_auc_equals_mann_whitney_on_random_instances_with_ties():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(4, 60))
        scores = rng.integers(0, 8, size=n) / 7.0  # coarse grid forces ties
        positives = rng.random(n) < 0.4
        if positives.all() or not positives.any():
            continue
        _, auc = roc_auc(scores, positives)
        assert abs(auc - mann_whitney_exact(scores, positives)) < 1e-9


def test_curve_is_monotone():
    rng = np.random.default_rng(1)
    scores = rng.integers(0, 5, size=50) / 4.0
    positives = rng.random(50) < 0.5
    curve, _ = roc_auc(scores, positives)
    xs = [p[0] for p in curve.points]
    ys = [p[1] for p in curve.points]
    assert xs == sorted(xs)
    assert ys == sorted(ys)
    assert curve.points[0] == (0.0, 0.0) and curve.points[-1] == (1.0, 1.0)


def test_negating_scores_flips_auc_exactly():
    rng = np.random.default_rng(2)
    scores = rng.integers(0, 6, size=40) / 5.0
    positives = rng.random(40) < 0.5
    if positives.all() or not positives.any():
        positives[0] = True
        positives[1] = False
    _, auc = roc_auc(scores, positives)
    _, auc_neg = roc_auc(-np.asarray(scores), positives)
    assert auc_neg == pytest.approx(1.0 - auc, abs=1e-12)


def test_auc_input_validation():
    with pytest.raises(UsageError):
        roc_auc([0.5], [True])
    with pytest.raises(UsageError):
        roc_auc([0.5, 0.6], [False, False])
    with pytest.raises(UsageError):
        roc_auc([0.5, 0.6], [True])
    with pytest.raises(UsageError):
        roc_auc([np.nan, 0.6], [True, False])


# ------------------------------------------------------------ cross-validation


def fake_report(accuracy, f1=0.5, auc=0.9):
    counts = np.zeros((5, 5), dtype=np.int64)
    counts[0, 0] = 1
    report = classification_metrics(ConfusionMatrix(counts))
    report.accuracy = accuracy
    report.precision_macro = f1
    report.recall_macro = f1
    report.f1_macro = f1
    report.auc_abnormal = auc
    return report


def test_identical_folds_have_zero_std():
    summary = crossval_report([fake_report(0.9), fake_report(0.9), fake_report(0.9)])
    assert summary.mean["accuracy"] == pytest.approx(0.9)
    assert summary.std["accuracy"] == 0.0


def test_two_fold_mean_and_population_std():
    summary = crossval_report([fake_report(0.9), fake_report(1.0)])
    assert summary.mean["accuracy"] == pytest.approx(0.95)
    assert summary.std["accuracy"] == pytest.approx(0.05)


def test_aggregate_matches_direct_recomputation():
    rng = np.random.default_rng(3)
    accs = rng.random(5)
    aucs = rng.random(5)
    reports = [fake_report(a, auc=u) for a, u in zip(accs, aucs)]
    summary = crossval_report(reports)
    assert abs(summary.mean["accuracy"] - accs.mean()) < 1e-12
    assert abs(summary.std["accuracy"] - accs.std()) < 1e-12
    assert abs(summary.mean["auc_abnormal"] - aucs.mean()) < 1e-12
    assert abs(summary.std["auc_abnormal"] - aucs.std()) < 1e-12


def test_crossval_needs_two_folds():
    with pytest.raises(UsageError):
        crossval_report([fake_report(0.9)])


def test_metrics_csv_format():
    reports = [fake_report(0.9), fake_report(1.0)]
    reports[0].fold_id = 0
    reports[1].fold_id = 1
    text = metrics_csv(reports, crossval_report(reports))
    lines = text.strip().split("\n")
    assert lines[0] == "fold,accuracy,precision_macro,recall_macro,f1_macro,auc_abnormal"
    assert lines[1].startswith("0,0.900000,")
    assert lines[3].startswith("mean,0.950000,")
    assert lines[4].startswith("std,0.050000,")
    # every float printed with 6 decimals
    for token in lines[1].split(",")[1:]:
        assert len(token.split(".")[1]) == 6
