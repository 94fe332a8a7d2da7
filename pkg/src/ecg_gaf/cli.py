"""Command-line pipeline: ``encode``, ``train``, ``evaluate`` and ``report``.

Every command writes a ``manifest.json`` into its ``--out-dir`` holding the
resolved arguments, dataset checksums, artifact paths and timings.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .evalx import (
    DivergenceError,
    TrainConfig,
    evaluate,
    export_report,
    read_metrics,
    train,
    write_loss_trace,
)
from .gaf import EncoderConfig, encode_batch, export_image
from .model import ConfigError, ModelConfig, build, load_model
from .nn.tensor import ShapeError
from .signal_io import (
    DataError,
    Dataset,
    StratificationError,
    load_csv,
    load_ptb_split,
    stratified_subsample,
)
from .tensorio import FormatError, load_tensor, save_tensor

log = logging.getLogger("ecg_gaf")

CHECKPOINT_NAME = "model.cnn"


class Manifest:
    def __init__(self, command: str, args: argparse.Namespace):
        self.data: dict = {
            "command": command,
            "version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "platform": platform.platform(),
            "args": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
            "datasets": {},
            "artifacts": [],
            "timings": {},
        }
        self._clock = time.perf_counter()

    def dataset(self, role: str, ds: Dataset) -> None:
        self.data["datasets"][role] = {
            "name": ds.name,
            "records": len(ds),
            "num_classes": ds.num_classes,
            "sha256": ds.checksum(),
            "class_counts": np.bincount(ds.labels, minlength=ds.num_classes).tolist(),
        }

    def artifact(self, path: Path) -> None:
        self.data["artifacts"].append(str(path))

    def lap(self, name: str) -> None:
        now = time.perf_counter()
        self.data["timings"][name] = round(now - self._clock, 6)
        self._clock = now

    def write(self, out_dir: Path) -> None:
        (out_dir / "manifest.json").write_text(json.dumps(self.data, indent=2, default=str) + "\n")


def _encoder_config(args) -> EncoderConfig:
    return EncoderConfig(kind=args.gaf_kind, reduction=args.reduction, target_size=args.size, channels=args.channels)


def _load_dataset(args, split: str) -> Dataset:
    csv_path = args.train_csv if split == "train" else args.test_csv
    if args.ptb_normal_csv or args.ptb_abnormal_csv:
        if not (args.ptb_normal_csv and args.ptb_abnormal_csv):
            raise ConfigError("--ptb-normal-csv and --ptb-abnormal-csv must be given together")
        train_ds, test_ds = load_ptb_split(args.ptb_normal_csv, args.ptb_abnormal_csv, seed=args.split_seed)
        ds = train_ds if split == "train" else test_ds
    elif csv_path:
        if args.num_classes is None:
            raise ConfigError("--num-classes is required with a CSV input")
        ds = load_csv(csv_path, args.num_classes)
    else:
        flag = "--train-csv" if split == "train" else "--test-csv"
        raise ConfigError(f"no input data: pass {flag} or the PTB file pair")
    if args.subsample_fraction < 1.0:
        ds = stratified_subsample(ds, args.subsample_fraction, args.seed)
    return ds


def encode_dataset(ds: Dataset, cfg: EncoderConfig, threads: int, cache_dir: Path | None) -> np.ndarray:
    """Encode all records, reusing a cached tensor keyed by data checksum and encoder config."""
    cache_file = None
    if cache_dir is not None:
        key = hashlib.sha256(f"{ds.checksum()}:{cfg.key()}".encode()).hexdigest()[:32]
        cache_file = cache_dir / f"{key}.gaf"
        if cache_file.exists():
            try:
                images = load_tensor(cache_file)
                if images.shape == (len(ds), cfg.target_size, cfg.target_size, cfg.channels):
                    log.info("using cached encoding %s", cache_file)
                    return images
            except FormatError:
                log.warning("ignoring unreadable cache file %s", cache_file)
    images = encode_batch(ds.samples, cfg, threads=threads)
    if cache_file is not None:
        cache_dir.mkdir(parents=True, exist_ok=True)
        save_tensor(cache_file, images)
    return images


def _cache_dir(args) -> Path | None:
    if args.no_cache:
        return None
    return Path(args.cache_dir) if args.cache_dir else Path(args.out_dir) / "cache"


def cmd_encode(args) -> None:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest("encode", args)
    ds = _load_dataset(args, "train")
    manifest.dataset("input", ds)
    manifest.lap("load")
    cfg = _encoder_config(args)
    images = encode_batch(ds.samples, cfg, threads=args.threads)
    manifest.lap("encode")
    if args.packed:
        path = out / "encoded.gaf"
        save_tensor(path, images)
        manifest.artifact(path)
    else:
        tdir = out / "tensors"
        tdir.mkdir(exist_ok=True)
        for i, img in enumerate(images):
            path = tdir / f"record_{i:06d}.gaf"
            save_tensor(path, img)
            manifest.artifact(path)
    if args.export_png:
        pdir = out / "png"
        pdir.mkdir(exist_ok=True)
        for i in range(min(args.export_png, len(ds))):
            path = pdir / f"record_{i:06d}_label{ds.labels[i]}.png"
            export_image(images[i], path)
            manifest.artifact(path)
    manifest.lap("write")
    manifest.write(out)
    print(f"encoded {len(ds)} records to {out} as {images.shape[1:]} images")


def cmd_train(args) -> None:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest("train", args)
    ds = _load_dataset(args, "train")
    manifest.dataset("train", ds)
    manifest.lap("load")
    enc = _encoder_config(args)
    images = encode_dataset(ds, enc, args.threads, _cache_dir(args))
    manifest.lap("encode")

    mcfg = ModelConfig(
        num_classes=ds.num_classes,
        input_size=enc.target_size,
        input_channels=enc.channels,
        dense_units=args.dense_units,
        head_units=args.head_units,
    )
    model = build(mcfg, seed=args.seed)
    tcfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        optimizer=args.optimizer,
        seed=args.seed,
    )

    def progress(stats):
        print(f"epoch {stats.epoch}/{tcfg.epochs} loss={stats.loss:.5f} acc={stats.accuracy:.4f}", flush=True)

    trace = train(model, images, ds.labels, tcfg, progress=progress)
    manifest.lap("train")
    manifest.data["shape_chain"] = [list(s) for s in model.shape_chain()]
    manifest.data["num_parameters"] = model.num_parameters

    ckpt = out / CHECKPOINT_NAME
    model.save(ckpt)
    manifest.artifact(ckpt)
    trace_path = out / "loss_trace.csv"
    write_loss_trace(trace, trace_path)
    manifest.artifact(trace_path)
    manifest.write(out)
    print(f"checkpoint written to {ckpt}")


def cmd_evaluate(args) -> None:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest("evaluate", args)
    try:
        model = load_model(args.checkpoint, num_classes=args.num_classes)
    except FormatError as exc:
        raise ConfigError(f"cannot read checkpoint {args.checkpoint}: {exc}") from None
    ds = _load_dataset(args, "test")
    if ds.num_classes != model.config.num_classes:
        raise ConfigError(f"dataset has {ds.num_classes} classes but the checkpoint predicts {model.config.num_classes}")
    enc = _encoder_config(args)
    if (enc.target_size, enc.target_size, enc.channels) != model.config.input_shape:
        raise ConfigError(
            f"encoder produces {(enc.target_size, enc.target_size, enc.channels)} images "
            f"but the checkpoint expects {model.config.input_shape}"
        )
    manifest.dataset("test", ds)
    manifest.lap("load")
    images = encode_dataset(ds, enc, args.threads, _cache_dir(args))
    manifest.lap("encode")
    report = evaluate(model, images, ds.labels, threads=args.threads)
    manifest.lap("evaluate")
    export_report(report, out)
    for name in ["metrics.txt", "confusion.csv"] + [f"roc_class_{c}.csv" for c in range(report.num_classes)]:
        manifest.artifact(out / name)
    manifest.write(out)
    print(f"accuracy={report.accuracy:.6f}")
    print(f"f1_macro={report.f1_macro:.6f}")
    print(f"f1_weighted={report.f1_weighted:.6f}")


def _read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:] if ln]
    return header, np.array(rows)


def cmd_report(args) -> None:
    run = Path(args.run_dir)
    metrics = read_metrics(run / "metrics.txt")
    k = int(metrics["num_classes"])
    print(f"{'class':>5} {'precision':>9} {'recall':>7} {'f1':>7} {'auc':>7} {'support':>8}")
    for c in range(k):
        print(
            f"{c:>5} {float(metrics[f'precision_{c}']):>9.4f} {float(metrics[f'recall_{c}']):>7.4f} "
            f"{float(metrics[f'f1_{c}']):>7.4f} {float(metrics.get(f'auc_{c}', 'nan')):>7.4f} "
            f"{int(metrics[f'support_{c}']):>8}"
        )
    print(f"accuracy={metrics['accuracy']} f1_macro={metrics['f1_macro']} f1_weighted={metrics['f1_weighted']}")
    if args.no_plots:
        return
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not installed; skipping figures", file=sys.stderr)
        return

    out = Path(args.out_dir) if args.out_dir else run
    out.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 5))
    for c in range(k):
        path = run / f"roc_class_{c}.csv"
        if path.exists():
            _, pts = _read_csv(path)
            ax.plot(pts[:, 0], pts[:, 1], label=f"class {c} (AUC {float(metrics.get(f'auc_{c}', 'nan')):.3f})")
    ax.plot([0, 1], [0, 1], "k--", lw=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.legend(loc="lower right")
    fig.savefig(out / "roc.png", dpi=120, bbox_inches="tight")
    plt.close(fig)

    _, cm = _read_csv(run / "confusion.csv")
    cm = cm[:, 1:]
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(cm, cmap="Blues")
    for r in range(k):
        for c in range(k):
            ax.text(c, r, int(cm[r, c]), ha="center", va="center", fontsize=8)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    fig.colorbar(im, ax=ax)
    fig.savefig(out / "confusion.png", dpi=120, bbox_inches="tight")
    plt.close(fig)
    print(f"figures written to {out}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="runs/latest")
    p.add_argument("--threads", type=int, default=1)
    return p


def _data_flags(p: argparse.ArgumentParser, split: str) -> None:
    p.add_argument(f"--{split}-csv")
    p.add_argument("--num-classes", type=int)
    p.add_argument("--ptb-normal-csv")
    p.add_argument("--ptb-abnormal-csv")
    p.add_argument("--split-seed", type=int, default=0, help="seed of the PTB 80/20 split")
    p.add_argument("--subsample-fraction", type=float, default=1.0)


def _encoder_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gaf-kind", choices=["gasf", "gadf"], default="gasf")
    p.add_argument("--reduction", choices=["bilinear", "paa"], default="bilinear")
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--channels", type=int, default=3)


def _cache_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cache-dir")
    p.add_argument("--no-cache", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ecg-gaf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    p = sub.add_parser("encode", parents=[common], help="encode a heartbeat CSV into GAF tensors")
    _data_flags(p, "train")
    p.add_argument("--csv", dest="train_csv", help="alias of --train-csv")
    _encoder_flags(p)
    p.add_argument("--packed", action="store_true", help="write one (n, H, W, C) tensor file")
    p.add_argument("--export-png", type=int, default=0, metavar="N")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("train", parents=[common], help="train the classifier")
    _data_flags(p, "train")
    _encoder_flags(p)
    _cache_flags(p)
    p.add_argument("--dense-units", type=int, default=64)
    p.add_argument("--head-units", type=int, default=None, help="logit width (defaults to the class count)")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="evaluate a checkpoint on a test set")
    _data_flags(p, "test")
    _encoder_flags(p)
    _cache_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", parents=[common], help="summarise an evaluation directory")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_report, out_dir=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (DataError, StratificationError, ConfigError, FormatError, ShapeError, DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
