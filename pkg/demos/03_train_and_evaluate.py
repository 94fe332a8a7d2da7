"""Train the eight-layer classifier on synthetic beats and score it.

Uses the same pieces as the ``ecg-gaf`` command: encode, train, evaluate,
export. Swap in ``load_csv`` on a real heartbeat CSV for the full workflow.
"""

# %%
from __future__ import annotations

from pathlib import Path

from ecg_gaf.evalx import TrainConfig, evaluate, export_report, majority_share, train, write_loss_trace
from ecg_gaf.gaf import encode_batch
from ecg_gaf.model import ModelConfig, build
from ecg_gaf.signal_io import class_histogram, stratified_split, synthetic_heartbeats

out = Path(__file__).parent / "out" / "run"
out.mkdir(parents=True, exist_ok=True)

# %% Data: five imbalanced classes, split 80/20 by class.
full = synthetic_heartbeats([200, 60, 60, 40, 40], seed=1)
train_ds, test_ds = stratified_split(full, test_fraction=0.2, seed=0)
print("train", class_histogram(train_ds), "test", class_histogram(test_ds))

# %% Encode once; images are (n, 32, 32, 3) float32 in [-1, 1].
x_train = encode_batch(train_ds.samples)
x_test = encode_batch(test_ds.samples)

# %% Model and training.
model = build(ModelConfig(num_classes=5), seed=0)
for before, after in zip(model.shape_chain(), model.shape_chain()[1:]):
    print(f"{str(before):>14} -> {after}")
print("parameters:", model.num_parameters)

trace = train(
    model, x_train, train_ds.labels, TrainConfig(epochs=4, batch_size=32),
    progress=lambda s: print(f"epoch {s.epoch} loss {s.loss:.4f} acc {s.accuracy:.3f}"),
)

# %% Evaluation against the constant-class floor.
report = evaluate(model, x_test, test_ds.labels)
print(f"test accuracy {report.accuracy:.3f} (majority share {majority_share(test_ds.labels, 5):.3f})")
print(f"macro F1 {report.f1_macro:.3f}  weighted F1 {report.f1_weighted:.3f}")
print("per-class AUC", [round(c.auc, 3) for c in report.roc])

# %% Artifacts: metrics, confusion matrix, ROC curves, loss trace, checkpoint.
export_report(report, out)
write_loss_trace(trace, out / "loss_trace.csv")
model.save(out / "model.cnn")
print("artifacts in", out)
