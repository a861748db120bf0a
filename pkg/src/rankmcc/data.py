"""Dataset ingestion, synthetic generation, splitting, and batching.

The only ingestion format is CSV with header ``label,f0,...,f{d0-1}``: one
nonnegative integer class label followed by float features per row. Synthetic
data comes from seeded Gaussian blobs. Every random choice flows through an
explicit seed into a PCG64 generator, so datasets, splits, and batch orders
reproduce bit-for-bit (given one numpy version; numpy does not freeze
distribution streams across major releases).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "DatasetFormatError",
    "load_csv",
    "save_csv",
    "load_scores_csv",
    "load_labels_csv",
    "synth_blobs",
    "split",
    "batches",
]


class DatasetFormatError(ValueError):
    """Raised for malformed dataset files, with the offending line number."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    name: str = "dataset"

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        labs = np.asarray(self.labels, dtype=np.int64)
        # N == 0 is tolerated so extreme split fractions can hand everything
        # to train; ingestion and synthesis always produce N >= 1.
        if feats.ndim != 2:
            raise ValueError("features must be an [N, d0] matrix")
        if labs.shape != (feats.shape[0],):
            raise ValueError("labels must align with feature rows")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features must be finite")
        if np.any(labs < 0) or np.any(labs >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def take(self, indices: np.ndarray, name: str | None = None) -> "Dataset":
        return Dataset(
            self.features[indices], self.labels[indices], self.n_classes,
            name if name is not None else self.name,
        )


def load_csv(path, n_classes: int | None = None, name: str | None = None) -> Dataset:
    """Parse a ``label,f0,...`` CSV; unless given, n_classes = 1 + max label."""
    labels: list[int] = []
    rows: list[list[float]] = []
    width: int | None = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}: empty file") from None
        expected = ["label"] + [f"f{i}" for i in range(len(header) - 1)]
        if header != expected:
            raise DatasetFormatError(
                f"{path}: line 1: header must be label,f0,...,f{{d0-1}}, got {','.join(header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if width is None:
                width = len(row)
            if len(row) != width:
                raise DatasetFormatError(
                    f"{path}: line {lineno}: expected {width} columns, got {len(row)}"
                )
            try:
                label = int(row[0])
            except ValueError:
                raise DatasetFormatError(
                    f"{path}: line {lineno}: label {row[0]!r} is not an integer"
                ) from None
            if label < 0:
                raise DatasetFormatError(f"{path}: line {lineno}: label must be nonnegative")
            try:
                feats = [float(v) for v in row[1:]]
            except ValueError:
                raise DatasetFormatError(
                    f"{path}: line {lineno}: feature columns must be numeric"
                ) from None
            labels.append(label)
            rows.append(feats)
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    n = n_classes if n_classes is not None else max(labels) + 1
    return Dataset(np.array(rows), np.array(labels), n, name or str(path))


def save_csv(dataset: Dataset, path) -> None:
    """Write the canonical CSV form (repr-exact floats, LF newlines)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("label," + ",".join(f"f{i}" for i in range(dataset.dim)) + "\n")
        for label, row in zip(dataset.labels, dataset.features):
            fh.write(str(int(label)) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def load_scores_csv(path) -> np.ndarray:
    """Parse an evaluation score file: header ``s0,...,s{n-1}``, float rows."""
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}: empty file") from None
        if header != [f"s{i}" for i in range(len(header))]:
            raise DatasetFormatError(
                f"{path}: line 1: header must be s0,...,s{{n-1}}, got {','.join(header)}"
            )
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DatasetFormatError(
                    f"{path}: line {lineno}: expected {width} columns, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise DatasetFormatError(
                    f"{path}: line {lineno}: score columns must be numeric"
                ) from None
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    return np.array(rows)


def load_labels_csv(path) -> np.ndarray:
    """Parse an evaluation label file: header ``label``, one integer per row."""
    labels: list[int] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}: empty file") from None
        if header != ["label"]:
            raise DatasetFormatError(
                f"{path}: line 1: header must be 'label', got {','.join(header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                label = int(row[0])
            except ValueError:
                raise DatasetFormatError(
                    f"{path}: line {lineno}: label {row[0]!r} is not an integer"
                ) from None
            if label < 0:
                raise DatasetFormatError(f"{path}: line {lineno}: label must be nonnegative")
            labels.append(label)
    if not labels:
        raise DatasetFormatError(f"{path}: no data rows")
    return np.array(labels, dtype=np.int64)


def synth_blobs(n_classes: int, d0: int, per_class: int, std: float, seed: int = 0) -> Dataset:
    """Gaussian blobs: one cluster per class, means drawn once at scale 4."""
    if n_classes < 2:
        raise ValueError("need at least two classes")
    if per_class < 1:
        raise ValueError("per_class must be at least 1")
    if std < 0:
        raise ValueError("std must be nonnegative")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    means = 4.0 * rng.standard_normal((n_classes, d0))
    features = np.repeat(means, per_class, axis=0)
    features = features + std * rng.standard_normal(features.shape)
    labels = np.repeat(np.arange(n_classes), per_class)
    return Dataset(features, labels, n_classes, name=f"blobs{n_classes}x{per_class}d{d0}")


def split(dataset: Dataset, fractions: tuple[float, float, float], seed: int = 0):
    """Seeded shuffle then contiguous train/val/test cut.

    Val and test sizes are floored (with a 1e-9 nudge so exact rational
    fractions land on their intended counts); leftover rows go to train.
    """
    f_train, f_val, f_test = fractions
    if min(fractions) <= 0:
        raise ValueError("fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    perm = rng.permutation(dataset.size)
    n_val = int(dataset.size * f_val + 1e-9)
    n_test = int(dataset.size * f_test + 1e-9)
    n_train = dataset.size - n_val - n_test
    return (
        dataset.take(perm[:n_train], f"{dataset.name}/train"),
        dataset.take(perm[n_train : n_train + n_val], f"{dataset.name}/val"),
        dataset.take(perm[n_train + n_val :], f"{dataset.name}/test"),
    )


def batches(dataset: Dataset, batch_size: int, shuffle_seed, epoch: int):
    """Epoch-seeded permutation cut into consecutive index slices."""
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    parts = list(shuffle_seed) if isinstance(shuffle_seed, (list, tuple)) else [shuffle_seed]
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([*parts, epoch])))
    perm = rng.permutation(dataset.size)
    return [perm[i : i + batch_size] for i in range(0, dataset.size, batch_size)]
