"""Training loop and evaluation metrics (confusion, accuracy, F1, one-vs-rest ROC)."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .model import Model
from .nn.functional import softmax_cross_entropy_terms
from .nn.optim import make_optimizer
from .nn.tensor import NonFiniteError

log = logging.getLogger(__name__)


class DivergenceError(FloatingPointError):
    def __init__(self, step: int, loss: float):
        super().__init__(f"loss became {loss} at optimizer step {step}")
        self.step = step


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        # Zero is allowed: it gives a frozen-parameter baseline run.
        if not self.learning_rate >= 0:
            raise ValueError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    accuracy: float
    steps: int


def train(
    model: Model,
    images: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig,
    progress: Callable[[EpochStats], None] | None = None,
) -> list[EpochStats]:
    """Mini-batch training in place; returns one entry per epoch.

    Loss and accuracy in the trace are measured on each batch just before
    its update. The shuffle order comes from ``cfg.seed`` alone.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    if n == 0:
        raise ValueError("training set is empty")
    if images.shape[0] != n:
        raise ValueError(f"{images.shape[0]} images but {n} labels")
    if labels.min() < 0 or labels.max() >= model.config.num_classes:
        raise ValueError(f"labels must lie in [0, {model.config.num_classes})")

    rng = np.random.default_rng(cfg.seed)
    opt = make_optimizer(cfg.optimizer, model.parameters(), cfg.learning_rate)
    trace: list[EpochStats] = []
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        losses = np.empty(n)
        correct = 0
        for s in range(0, n, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            try:
                logits = model.forward(images[idx], train=True)
            except NonFiniteError:
                raise DivergenceError(step, math.nan) from None
            per_sample, grad = softmax_cross_entropy_terms(logits, labels[idx])
            loss = float(per_sample.mean())
            if not math.isfinite(loss):
                raise DivergenceError(step, loss)
            losses[s:s + idx.size] = per_sample
            correct += int((logits.argmax(axis=1) == labels[idx]).sum())
            model.backward(grad / idx.size)
            opt.step()
            step += 1
        stats = EpochStats(epoch + 1, math.fsum(losses) / n, correct / n, step)
        trace.append(stats)
        log.info("epoch %d loss %.5f acc %.4f", stats.epoch, stats.loss, stats.accuracy)
        if progress is not None:
            progress(stats)
    return trace


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


@dataclass(frozen=True)
class EvalReport:
    confusion: np.ndarray
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    f1_macro: float
    f1_weighted: float
    roc: list[RocCurve] = field(default_factory=list)

    @property
    def num_classes(self) -> int:
        return int(self.confusion.shape[0])

    @property
    def total(self) -> int:
        return int(self.confusion.sum())


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int], num_classes: int) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("truth and prediction lengths differ")
    for name, y in (("truth", y_true), ("prediction", y_pred)):
        if y.size and (y.min() < 0 or y.max() >= num_classes):
            raise ValueError(f"{name} labels outside [0, {num_classes})")
    flat = np.bincount(y_true * num_classes + y_pred, minlength=num_classes * num_classes)
    return flat.reshape(num_classes, num_classes)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros(num.shape, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def f1_scores(confusion: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-class precision, recall, F1; any 0/0 is taken as 0."""
    tp = np.diag(confusion).astype(np.float64)
    predicted = confusion.sum(axis=0)
    actual = confusion.sum(axis=1)
    precision = _ratio(tp, predicted)
    recall = _ratio(tp, actual)
    f1 = _ratio(2 * precision * recall, precision + recall)
    return precision, recall, f1


def roc_curve(is_positive: np.ndarray, scores: np.ndarray) -> RocCurve:
    """One-vs-rest ROC. A sample counts as positive when ``score >= threshold``.

    Thresholds run over +inf, every distinct score (descending) and -inf.
    AUC is the trapezoid rule on integer counts with one final division, so a
    perfect separator scores exactly 1.0 and an inverted one exactly 0.0.
    """
    is_positive = np.asarray(is_positive, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    pos = is_positive[order]
    # Last index of each run of equal scores.
    last = np.flatnonzero(np.r_[s[1:] != s[:-1], True]) if s.size else np.array([], dtype=np.int64)
    tp = np.r_[0, np.cumsum(pos)[last], pos.sum()]
    fp = np.r_[0, np.cumsum(~pos)[last], (~pos).sum()]
    thresholds = np.r_[np.inf, s[last], -np.inf]
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        warnings.warn("ROC undefined: only one class present among the samples", RuntimeWarning, stacklevel=2)
        tpr = tp / n_pos if n_pos else np.zeros(tp.shape)
        fpr = fp / n_neg if n_neg else np.zeros(fp.shape)
        return RocCurve(fpr, tpr, thresholds, float("nan"))
    twice_area = int(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])))
    auc = twice_area / (2 * n_pos * n_neg)
    return RocCurve(fp / n_neg, tp / n_pos, thresholds, auc)


def report_from_predictions(
    y_true: Sequence[int],
    y_pred: Sequence[int],
    num_classes: int,
    probabilities: np.ndarray | None = None,
) -> EvalReport:
    cm = confusion_matrix(y_true, y_pred, num_classes)
    total = int(cm.sum())
    if total == 0:
        raise ValueError("cannot evaluate an empty test set")
    precision, recall, f1 = f1_scores(cm)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    seen = (support > 0) | (predicted > 0)
    if not seen.all():
        warnings.warn(
            f"classes {np.flatnonzero(~seen).tolist()} absent from truth and prediction; excluded from macro F1",
            RuntimeWarning,
            stacklevel=2,
        )
    f1_macro = float(f1[seen].mean())
    f1_weighted = float(np.dot(f1, support) / total)
    roc = []
    if probabilities is not None:
        probabilities = np.asarray(probabilities, dtype=np.float64)
        truth = np.asarray(y_true)
        roc = [roc_curve(truth == c, probabilities[:, c]) for c in range(num_classes)]
    return EvalReport(
        confusion=cm,
        accuracy=int(np.trace(cm)) / total,
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        f1_macro=f1_macro,
        f1_weighted=f1_weighted,
        roc=roc,
    )


def evaluate(
    model: Model, images: np.ndarray, labels: np.ndarray, batch_size: int = 256, threads: int = 1
) -> EvalReport:
    if len(labels) == 0:
        raise ValueError("cannot evaluate an empty test set")
    pred, probs = model.predict(images, batch_size=batch_size, threads=threads)
    return report_from_predictions(labels, pred, model.config.num_classes, probs)


def majority_share(labels: Sequence[int], num_classes: int) -> float:
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=num_classes)
    return float(counts.max() / counts.sum())


def _fmt(v: float) -> str:
    return repr(float(v))


def export_report(
    report: EvalReport, out_dir: str | Path, loss_trace: Sequence[EpochStats] | None = None
) -> None:
    """Write metrics.txt, confusion.csv, roc_class_<k>.csv and optionally loss_trace.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    k = report.num_classes

    lines = [
        f"accuracy={report.accuracy:.6f}",
        f"f1_macro={report.f1_macro:.6f}",
        f"f1_weighted={report.f1_weighted:.6f}",
        f"num_classes={k}",
        f"total={report.total}",
    ]
    for c in range(k):
        lines += [
            f"precision_{c}={report.precision[c]:.6f}",
            f"recall_{c}={report.recall[c]:.6f}",
            f"f1_{c}={report.f1[c]:.6f}",
            f"support_{c}={int(report.support[c])}",
        ]
    for c, curve in enumerate(report.roc):
        lines.append(f"auc_{c}={curve.auc:.6f}")
    for r in range(k):
        lines.append(f"confusion_{r}=" + " ".join(str(int(v)) for v in report.confusion[r]))
    (out / "metrics.txt").write_text("\n".join(lines) + "\n")

    header = "true," + ",".join(f"pred_{c}" for c in range(k))
    rows = [f"{r}," + ",".join(str(int(v)) for v in report.confusion[r]) for r in range(k)]
    (out / "confusion.csv").write_text("\n".join([header, *rows]) + "\n")

    for c, curve in enumerate(report.roc):
        rows = ["fpr,tpr,threshold"]
        rows += [f"{_fmt(f)},{_fmt(t)},{_fmt(th)}" for f, t, th in zip(curve.fpr, curve.tpr, curve.thresholds)]
        (out / f"roc_class_{c}.csv").write_text("\n".join(rows) + "\n")

    if loss_trace is not None:
        write_loss_trace(loss_trace, out / "loss_trace.csv")


def write_loss_trace(trace: Sequence[EpochStats], path: str | Path) -> None:
    rows = ["epoch,loss,accuracy,steps"]
    rows += [f"{s.epoch},{_fmt(s.loss)},{_fmt(s.accuracy)},{s.steps}" for s in trace]
    Path(path).write_text("\n".join(rows) + "\n")


def read_metrics(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            out[key] = value
    return out
