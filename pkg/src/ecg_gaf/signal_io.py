"""Loading, validation and stratified sampling of fixed-length heartbeat CSVs.

The expected CSV layout is the one used by the public pre-segmented MIT-BIH
and PTB heartbeat distributions: no header, 187 amplitude columns followed by
a (possibly float-formatted) integer label.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

SEGMENT_LENGTH = 187
ROW_FIELDS = SEGMENT_LENGTH + 1
LABEL_TOLERANCE = 1e-9

MITBIH_CLASSES = 5
PTB_CLASSES = 2


class DataError(ValueError):
    """Invalid heartbeat data (non-finite values, wrong lengths)."""


class MalformedRowError(DataError):
    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class LabelRangeError(DataError):
    pass


class StratificationError(ValueError):
    """Requested sampling fraction would leave a class without records."""


@dataclass(frozen=True)
class HeartbeatRecord:
    samples: np.ndarray
    label: int

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.shape != (SEGMENT_LENGTH,):
            raise DataError(f"heartbeat must have {SEGMENT_LENGTH} samples, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise DataError("heartbeat contains non-finite samples")
        if int(self.label) != self.label or self.label < 0:
            raise LabelRangeError(f"label must be a non-negative integer, got {self.label!r}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "label", int(self.label))


@dataclass(frozen=True)
class Dataset:
    """Heartbeats held column-wise: ``samples`` is (n, 187), ``labels`` is (n,).

    Both arrays are made read-only on construction so a Dataset can be
    shared freely.
    """

    samples: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str = "dataset"

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=np.float64).reshape(-1, SEGMENT_LENGTH)
        labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        if samples.shape[0] != labels.shape[0]:
            raise DataError(f"{samples.shape[0]} sample rows but {labels.shape[0]} labels")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if not np.all(np.isfinite(samples)):
            bad = int(np.flatnonzero(~np.isfinite(samples).all(axis=1))[0])
            raise DataError(f"record {bad} contains non-finite samples")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            bad = int(np.flatnonzero((labels < 0) | (labels >= self.num_classes))[0])
            raise LabelRangeError(
                f"record {bad} has label {labels[bad]} outside [0, {self.num_classes})"
            )
        samples.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def __getitem__(self, i: int) -> HeartbeatRecord:
        return HeartbeatRecord(self.samples[i], int(self.labels[i]))

    def __iter__(self) -> Iterator[HeartbeatRecord]:
        for i in range(len(self)):
            yield self[i]

    @property
    def records(self) -> tuple[HeartbeatRecord, ...]:
        return tuple(self)

    def take(self, indices: np.ndarray, name: str | None = None) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.samples[indices], self.labels[indices], self.num_classes, name or self.name)

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.samples, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.labels, dtype="<i8").tobytes())
        h.update(str(self.num_classes).encode())
        return h.hexdigest()


def _parse_rows(lines: Sequence[str]) -> np.ndarray:
    rows = []
    for i, line in enumerate(lines):
        fields = line.split(",")
        if len(fields) != ROW_FIELDS:
            raise MalformedRowError(i, f"expected {ROW_FIELDS} fields, found {len(fields)}")
        rows.append(fields)
    try:
        return np.array(rows, dtype=np.float64).reshape(len(rows), ROW_FIELDS)
    except ValueError:
        pass
    # Slow path only to name the offending row.
    for i, fields in enumerate(rows):
        try:
            [float(v) for v in fields]
        except ValueError as exc:
            raise MalformedRowError(i, f"non-numeric field ({exc})") from None
    raise DataError("could not parse CSV")  # pragma: no cover


def _read_table(path: Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, encoding="utf-8") as f:
        lines = [ln.strip() for ln in f]
    while lines and not lines[-1]:
        lines.pop()
    table = _parse_rows(lines) if lines else np.empty((0, ROW_FIELDS))

    finite = np.isfinite(table)
    if not finite.all():
        bad = int(np.flatnonzero(~finite.all(axis=1))[0])
        raise DataError(f"row {bad}: non-finite value")

    raw_labels = table[:, -1]
    labels = np.rint(raw_labels)
    off = np.abs(raw_labels - labels) > LABEL_TOLERANCE
    if off.any():
        bad = int(np.flatnonzero(off)[0])
        raise MalformedRowError(bad, f"label {raw_labels[bad]!r} is not integral")
    return table[:, :SEGMENT_LENGTH], labels.astype(np.int64)


def load_csv(path: str | Path, num_classes: int, name: str | None = None) -> Dataset:
    """Read one heartbeat CSV; record ``i`` is row ``i`` of the file."""
    path = Path(path)
    samples, labels = _read_table(path)
    out_of_range = (labels < 0) | (labels >= num_classes)
    if out_of_range.any():
        bad = int(np.flatnonzero(out_of_range)[0])
        raise LabelRangeError(f"row {bad}: label {int(labels[bad])} outside [0, {num_classes})")

    return Dataset(samples, labels, num_classes, name or path.stem)


def concat(datasets: Sequence[Dataset], name: str) -> Dataset:
    k = datasets[0].num_classes
    if any(d.num_classes != k for d in datasets):
        raise ValueError("cannot concatenate datasets with different class counts")
    return Dataset(
        np.concatenate([d.samples for d in datasets]),
        np.concatenate([d.labels for d in datasets]),
        k,
        name,
    )


def load_ptb(normal_path: str | Path, abnormal_path: str | Path) -> Dataset:
    """Concatenate the two PTB files, relabelling normal as 0 and abnormal as 1.

    Whatever label column the files carry is ignored.
    """
    parts = []
    for path, label in ((normal_path, 0), (abnormal_path, 1)):
        samples, _ = _read_table(Path(path))
        parts.append(Dataset(samples, np.full(len(samples), label), PTB_CLASSES, Path(path).stem))
    return concat(parts, "ptbdb")


def class_histogram(ds: Dataset) -> np.ndarray:
    return np.bincount(ds.labels, minlength=ds.num_classes).astype(np.int64)


def _allocate(counts: np.ndarray, fraction: float) -> np.ndarray:
    """Per-class sample sizes: largest-remainder rounding of ``counts * fraction``."""
    exact = counts * fraction
    alloc = np.floor(exact).astype(np.int64)
    total = int(math.floor(float(exact.sum()) + 0.5))
    remainder = exact - alloc
    # Stable sort keeps ties in class order.
    order = np.argsort(-remainder, kind="stable")
    for c in order[: max(0, total - int(alloc.sum()))]:
        alloc[c] += 1
    return np.minimum(alloc, counts)


def _check_fraction(ds: Dataset, fraction: float) -> np.ndarray:
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    counts = class_histogram(ds)
    starved = (counts > 0) & (counts * fraction < 1.0)
    if starved.any():
        c = int(np.flatnonzero(starved)[0])
        raise StratificationError(
            f"fraction {fraction} keeps {counts[c] * fraction:.3f} records of class {c} (has {counts[c]})"
        )
    return counts


def _split_indices(ds: Dataset, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    counts = _check_fraction(ds, fraction)
    alloc = _allocate(counts, fraction)
    rng = np.random.default_rng(seed)
    chosen, rest = [], []
    for c in range(ds.num_classes):
        members = rng.permutation(np.flatnonzero(ds.labels == c))
        chosen.append(members[: alloc[c]])
        rest.append(members[alloc[c]:])
    chosen = rng.permutation(np.concatenate(chosen))
    rest = rng.permutation(np.concatenate(rest))
    return chosen, rest


def stratified_subsample(ds: Dataset, fraction: float, seed: int) -> Dataset:
    """Draw ``fraction`` of the records, class by class, without replacement.

    Per-class sizes are within one record of ``fraction * count`` and the
    result is shuffled. Uses PCG64, so it is reproducible across platforms.
    """
    chosen, _ = _split_indices(ds, fraction, seed)
    return ds.take(chosen, f"{ds.name}-sub")


def stratified_split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    test_idx, train_idx = _split_indices(ds, test_fraction, seed)
    return ds.take(train_idx, f"{ds.name}-train"), ds.take(test_idx, f"{ds.name}-test")


def load_ptb_split(
    normal_path: str | Path, abnormal_path: str | Path, seed: int = 0, test_fraction: float = 0.2
) -> tuple[Dataset, Dataset]:
    """PTB as (train, test). At 0.2 this gives the 11642/2910 division by size."""
    return stratified_split(load_ptb(normal_path, abnormal_path), test_fraction, seed)


def save_csv(ds: Dataset, path: str | Path) -> None:
    table = np.column_stack([ds.samples, ds.labels.astype(np.float64)])
    np.savetxt(path, table, delimiter=",", fmt="%.18e")


# Gaussian wave components per class: (centre, width, amplitude) in beat time [0, 1].
_WAVES = (
    ((0.00, 0.020, 1.00), (0.05, 0.020, -0.25), (0.35, 0.060, 0.30), (0.85, 0.030, 0.12)),
    ((0.00, 0.020, 1.00), (0.05, 0.020, -0.20), (0.30, 0.050, 0.30), (0.62, 0.030, 0.18)),
    ((0.00, 0.080, 1.00), (0.15, 0.080, -0.60), (0.45, 0.100, -0.30)),
    ((0.00, 0.050, 1.00), (0.10, 0.050, -0.40), (0.40, 0.080, 0.10), (0.80, 0.030, 0.08)),
    ((0.00, 0.006, 1.00), (0.05, 0.060, 0.70), (0.45, 0.080, 0.35)),
)
_BEAT_LENGTHS = ((110, 160), (70, 110), (100, 170), (100, 160), (110, 170))


def synthetic_heartbeats(counts: Sequence[int], seed: int, name: str = "synthetic") -> Dataset:
    """Generate ECG-like beats shaped like the pre-segmented public files.

    Each beat starts at its R peak, is min-max scaled to [0, 1] and zero
    padded to 187 samples. Class ``c`` uses a fixed wave template with random
    timing, width, amplitude and noise jitter. Meant for tests and demos when
    the real recordings are not available; it is not a substitute for them.
    """
    if len(counts) > len(_WAVES):
        raise ValueError(f"at most {len(_WAVES)} synthetic classes")
    rng = np.random.default_rng(seed)
    rows, labels = [], []
    for c, n in enumerate(counts):
        lo, hi = _BEAT_LENGTHS[c]
        for _ in range(n):
            length = int(rng.integers(lo, hi + 1))
            t = np.linspace(0.0, 1.0, length)
            beat = np.zeros(length)
            for centre, width, amp in _WAVES[c]:
                centre += rng.normal(0.0, 0.015)
                width *= 1.0 + rng.normal(0.0, 0.1)
                amp *= 1.0 + rng.normal(0.0, 0.15)
                beat += amp * np.exp(-0.5 * ((t - centre) / width) ** 2)
            beat += rng.normal(0.0, 0.02, size=length)
            beat = (beat - beat.min()) / (beat.max() - beat.min())
            row = np.zeros(SEGMENT_LENGTH)
            row[:length] = beat
            rows.append(row)
            labels.append(c)
    order = rng.permutation(len(labels))
    return Dataset(np.array(rows)[order], np.array(labels)[order], max(2, len(counts)), name)
