import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecg_gaf.evalx import (
    DivergenceError,
    TrainConfig,
    confusion_matrix,
    evaluate,
    export_report,
    read_metrics,
    report_from_predictions,
    roc_curve,
    train,
)
from ecg_gaf.gaf import encode_batch
from ecg_gaf.model import ModelConfig, build


def auc_pairwise_oracle(pos_scores, neg_scores):
    """P(score_pos > score_neg) + 0.5 P(equal), by enumeration of all pairs."""
    wins = 0.0
    for p in pos_scores:
        for n in neg_scores:
            wins += 1.0 if p > n else 0.5 if p == n else 0.0
    return wins / (len(pos_scores) * len(neg_scores))


def test_hand_computed_example():
    r = report_from_predictions([0, 0, 1, 1], [0, 1, 1, 1], 2)
    assert r.confusion.tolist() == [[1, 1], [0, 2]]
    assert r.accuracy == 0.75
    assert r.f1[0] == 2 / 3
    assert r.f1[1] == pytest.approx(0.8, abs=1e-15)
    assert r.f1_macro == pytest.approx((2 / 3 + 0.8) / 2, abs=1e-15)
    assert r.f1_weighted == pytest.approx((2 / 3 * 2 + 0.8 * 2) / 4, abs=1e-15)


def test_perfect_predictions():
    y = [0, 1, 2, 2, 1]
    r = report_from_predictions(y, y, 3)
    assert r.accuracy == 1.0 and r.f1_macro == 1.0 and r.f1_weighted == 1.0
    assert np.array_equal(r.confusion, np.diag([1, 2, 2]))


def test_zero_division_gives_zero_f1():
    r = report_from_predictions([0, 0, 1], [0, 0, 0], 2)
    assert r.precision[1] == 0 and r.recall[1] == 0 and r.f1[1] == 0


def test_absent_class_excluded_from_macro():
    with pytest.warns(RuntimeWarning, match="absent"):
        r = report_from_predictions([0, 1], [0, 1], 3)
    assert r.f1_macro == 1.0


def test_confusion_rejects_out_of_range():
    with pytest.raises(ValueError):
        confusion_matrix([0, 3], [0, 1], 3)


def test_roc_perfect_and_inverted():
    truth = np.array([1, 1, 0, 0, 0])
    scores = np.array([0.9, 0.8, 0.3, 0.2, 0.1])
    perfect = roc_curve(truth == 1, scores)
    inverted = roc_curve(truth == 1, -scores)
    assert perfect.auc == 1.0
    assert inverted.auc == 0.0
    for c in (perfect, inverted):
        assert (c.fpr[0], c.tpr[0]) == (0.0, 0.0)
        assert (c.fpr[-1], c.tpr[-1]) == (1.0, 1.0)
        assert c.thresholds[0] == np.inf and c.thresholds[-1] == -np.inf


def test_roc_ties_are_one_step():
    c = roc_curve(np.array([True, False]), np.array([0.5, 0.5]))
    assert c.fpr.tolist() == [0, 1, 1] and c.tpr.tolist() == [0, 1, 1]
    assert c.auc == 0.5


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.integers(0, 6)), min_size=2, max_size=40))
def test_roc_properties(pairs):
    labels = np.array([p for p, _ in pairs])
    scores = np.array([s / 6 for _, s in pairs])
    if labels.all() or not labels.any():
        return
    c = roc_curve(labels, scores)
    assert np.all(np.diff(c.fpr) >= 0) and np.all(np.diff(c.tpr) >= 0)
    assert (c.fpr[0], c.tpr[0], c.fpr[-1], c.tpr[-1]) == (0, 0, 1, 1)
    assert c.auc == pytest.approx(auc_pairwise_oracle(scores[labels], scores[~labels]), abs=1e-12)
    assert c.auc == pytest.approx(np.trapezoid(c.tpr, c.fpr), abs=1e-12)


def test_random_scores_auc_near_half():
    rng = np.random.default_rng(7)
    labels = rng.integers(0, 2, size=2000).astype(bool)
    c = roc_curve(labels, rng.uniform(size=2000))
    assert abs(c.auc - 0.5) <= 0.05


def test_single_class_roc_warns():
    with pytest.warns(RuntimeWarning):
        c = roc_curve(np.array([True, True]), np.array([0.1, 0.2]))
    assert np.isnan(c.auc)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=60), st.randoms())
def test_metrics_order_invariant_and_consistent(pairs, random):
    truth = [t for t, _ in pairs]
    pred = [p for _, p in pairs]
    scores = np.eye(4)[pred] * 0.7 + 0.075
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = report_from_predictions(truth, pred, 4, scores)
        order = list(range(len(pairs)))
        random.shuffle(order)
        b = report_from_predictions([truth[i] for i in order], [pred[i] for i in order], 4, scores[order])
    assert np.array_equal(a.confusion, b.confusion)
    assert a.accuracy == b.accuracy == np.trace(a.confusion) / len(pairs)
    assert a.f1_macro == b.f1_macro and a.f1_weighted == b.f1_weighted
    assert [c.auc for c in a.roc] == pytest.approx([c.auc for c in b.roc], nan_ok=True)
    assert a.f1.min() - 1e-12 <= a.f1_weighted <= a.f1.max() + 1e-12


def _small_problem(synthetic5, n=40):
    images = encode_batch(synthetic5.samples[:n])
    return images, synthetic5.labels[:n]


def test_train_zero_lr_keeps_parameters(synthetic5):
    images, labels = _small_problem(synthetic5)
    m = build(ModelConfig(num_classes=5), seed=0)
    before = m.to_bytes()
    trace = train(m, images, labels, TrainConfig(epochs=2, batch_size=16, learning_rate=0.0, optimizer="sgd"))
    assert m.to_bytes() == before
    assert len(trace) == 2
    # batch composition changes float32 GEMM rounding only
    assert trace[0].loss == pytest.approx(trace[1].loss, rel=1e-6)


def test_train_deterministic(synthetic5):
    images, labels = _small_problem(synthetic5)
    cfg = TrainConfig(epochs=2, batch_size=16, seed=5)
    traces, blobs = [], []
    for _ in range(2):
        m = build(ModelConfig(num_classes=5), seed=5)
        traces.append(train(m, images, labels, cfg))
        blobs.append(m.to_bytes())
    assert traces[0] == traces[1]
    assert blobs[0] == blobs[1]


def test_train_reduces_loss(synthetic5):
    images, labels = _small_problem(synthetic5, 80)
    m = build(ModelConfig(num_classes=5), seed=0)
    trace = train(m, images, labels, TrainConfig(epochs=6, batch_size=16, learning_rate=1e-3))
    assert trace[-1].loss < trace[0].loss
    assert [s.epoch for s in trace] == list(range(1, 7))


def test_train_divergence_reports_step(synthetic5):
    images, labels = _small_problem(synthetic5)
    m = build(ModelConfig(num_classes=5), seed=0)
    with pytest.raises(DivergenceError) as err, np.errstate(all="ignore"):
        train(m, images, labels, TrainConfig(epochs=3, batch_size=8, learning_rate=1e30, optimizer="sgd"))
    assert err.value.step >= 1


def test_train_validation(synthetic5):
    images, labels = _small_problem(synthetic5)
    m = build(ModelConfig(num_classes=2), seed=0)
    with pytest.raises(ValueError):
        train(m, images, labels, TrainConfig(epochs=1))
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1.0)


def test_evaluate_and_export(tmp_path, synthetic5):
    images, labels = _small_problem(synthetic5)
    m = build(ModelConfig(num_classes=5), seed=0)
    report = evaluate(m, images, labels)
    assert report.total == len(labels)
    assert len(report.roc) == 5
    export_report(report, tmp_path / "a")
    export_report(report, tmp_path / "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == ["confusion.csv", "metrics.txt"] + [f"roc_class_{c}.csv" for c in range(5)]
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header = (tmp_path / "a" / "roc_class_0.csv").read_text().splitlines()[0]
    assert header == "fpr,tpr,threshold"


def test_export_perfect_two_class(tmp_path):
    r = report_from_predictions([0, 1, 1], [0, 1, 1], 2, np.array([[0.9, 0.1], [0.2, 0.8], [0.3, 0.7]]))
    export_report(r, tmp_path)
    metrics = read_metrics(tmp_path / "metrics.txt")
    assert metrics["accuracy"] == "1.000000"
    assert "accuracy=1.000000" in (tmp_path / "metrics.txt").read_text().splitlines()
    assert (tmp_path / "confusion.csv").read_text() == "true,pred_0,pred_1\n0,1,0\n1,0,2\n"
    assert metrics["auc_0"] == metrics["auc_1"] == "1.000000"
