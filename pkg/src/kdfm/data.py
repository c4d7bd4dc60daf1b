"""Datasets: synthetic generators, stratified splitting, balanced label
sampling, and the two on-disk formats (CSV and the KDF1 binary container).

Features live in memory as float64; KDF1 stores them as little-endian
float32. Labels are integers with 65535 marking an unlabeled row.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DataFormatError

UNLABELED = 65535

_KDF1_MAGIC = b"KDF1"
_CENTER_RETRIES = 1000


@dataclass
class Dataset:
    features: np.ndarray  # [N, d] float64
    labels: np.ndarray  # [N] int64; UNLABELED = 65535
    num_classes: int
    tag: str = ""
    grid_shape: tuple[int, int, int] | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or len(self.features) == 0:
            raise DataError(f"features must be a non-empty [N, d] matrix, got {self.features.shape}")
        if self.labels.shape != (len(self.features),):
            raise DataError(
                f"labels shape {self.labels.shape} does not match {len(self.features)} rows"
            )
        real = self.labels != UNLABELED
        if np.any((self.labels[real] < 0) | (self.labels[real] >= self.num_classes)):
            raise DataError(f"labels must lie in [0, {self.num_classes}) or be {UNLABELED}")

    def __len__(self) -> int:
        return len(self.features)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray, tag: str | None = None) -> "Dataset":
        return Dataset(
            features=self.features[indices].copy(),
            labels=self.labels[indices].copy(),
            num_classes=self.num_classes,
            tag=self.tag if tag is None else tag,
            grid_shape=self.grid_shape,
        )


def gen_two_moons(n: int, noise_sigma: float = 0.1, seed: int = 0) -> Dataset:
    """Two interleaved half circles: arcs centred at (0,0) and (1,0.5), radius 1."""
    if n < 2:
        raise DataError(f"need n >= 2, got {n}")
    rng = np.random.default_rng(seed)
    n0 = n - n // 2
    n1 = n // 2
    t0 = rng.uniform(0.0, np.pi, n0)
    t1 = rng.uniform(0.0, np.pi, n1)
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    features = np.vstack([upper, lower])
    if noise_sigma > 0.0:
        features = features + rng.normal(0.0, noise_sigma, size=features.shape)
    labels = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    return Dataset(features, labels, num_classes=2, tag="two-moons")


def gen_blobs(num_classes: int, n_per_class: int, dim: int, separation: float,
              noise_sigma: float, seed: int = 0) -> Dataset:
    """Gaussian blobs at random centres with pairwise distance >= separation."""
    if num_classes < 2 or dim < 1:
        raise DataError(f"need num_classes >= 2 and dim >= 1, got {num_classes}/{dim}")
    rng = np.random.default_rng(seed)
    box = separation * num_classes
    centers: list[np.ndarray] = []
    for _ in range(num_classes):
        for attempt in range(_CENTER_RETRIES + 1):
            if attempt == _CENTER_RETRIES:
                raise DataError(
                    f"could not place {num_classes} centres with separation {separation} "
                    f"after {_CENTER_RETRIES} retries"
                )
            candidate = rng.uniform(-box, box, size=dim)
            if all(np.linalg.norm(candidate - c) >= separation for c in centers):
                centers.append(candidate)
                break
    features = np.vstack(
        [c + rng.normal(0.0, noise_sigma, size=(n_per_class, dim)) for c in centers]
    )
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), n_per_class)
    return Dataset(features, labels, num_classes=num_classes, tag="blobs")


def split_80_20(ds: Dataset, seed: int):
    """Stratified split into (train, validation), 20% rounded down per stratum."""
    if len(ds) < 5:
        raise DataError(f"need at least 5 samples to split, got {len(ds)}")
    rng = np.random.default_rng(seed)
    train_idx, val_idx = [], []
    for value in np.unique(ds.labels):
        stratum = np.flatnonzero(ds.labels == value)
        if len(stratum) < 5:
            raise DataError(
                f"stratum for label {value} has {len(stratum)} samples; need >= 5 to split"
            )
        stratum = stratum[rng.permutation(len(stratum))]
        n_val = len(stratum) // 5
        val_idx.append(stratum[:n_val])
        train_idx.append(stratum[n_val:])
    train_idx = np.sort(np.concatenate(train_idx))
    val_idx = np.sort(np.concatenate(val_idx))
    return ds.subset(train_idx, tag=f"{ds.tag}/train"), ds.subset(val_idx, tag=f"{ds.tag}/val")


def sample_balanced_labels(train: Dataset, labels_per_class: int, seed: int):
    """Pick labels_per_class indices per class as S_l; S_u is every training index.

    The full training set doubles as the unlabeled pool with labels ignored,
    so |S_u| never depends on the label budget.
    """
    if labels_per_class < 1:
        raise DataError(f"labels_per_class must be >= 1, got {labels_per_class}")
    rng = np.random.default_rng(seed)
    chosen = []
    for cls in range(train.num_classes):
        members = np.flatnonzero(train.labels == cls)
        if len(members) < labels_per_class:
            raise DataError(
                f"class {cls} has {len(members)} training samples, "
                f"need {labels_per_class} for the labeled set"
            )
        pick = rng.choice(len(members), size=labels_per_class, replace=False)
        chosen.append(members[pick])
    labeled = np.sort(np.concatenate(chosen))
    unlabeled = np.arange(len(train), dtype=np.int64)
    return labeled, unlabeled


def save_csv(ds: Dataset, path) -> None:
    """Header row, label first (empty = unlabeled), features as repr floats."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"f{j}" for j in range(ds.dim)])
        for i in range(len(ds)):
            label = "" if ds.labels[i] == UNLABELED else str(int(ds.labels[i]))
            writer.writerow([label] + [repr(float(v)) for v in ds.features[i]])


def load_csv(path, num_classes: int | None = None) -> Dataset:
    """Read the CSV layout written by save_csv; empty label cells are unlabeled."""
    rows = []
    labels = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise DataFormatError(f"{path}: missing header row with label + feature columns")
        width = len(header) - 1
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width + 1:
                raise DataFormatError(
                    f"{path}:{lineno}: expected {width + 1} columns, got {len(row)}"
                )
            raw = row[0].strip()
            if raw == "":
                labels.append(UNLABELED)
            else:
                try:
                    labels.append(int(raw))
                except ValueError as exc:
                    raise DataFormatError(f"{path}:{lineno}: bad label {raw!r}") from exc
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: bad feature value") from exc
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    labels = np.array(labels, dtype=np.int64)
    if num_classes is None:
        real = labels[labels != UNLABELED]
        if len(real) == 0:
            raise DataFormatError(f"{path}: all rows unlabeled; pass num_classes explicitly")
        num_classes = int(real.max()) + 1
    try:
        return Dataset(np.array(rows), labels, num_classes=num_classes, tag=f"csv:{path}")
    except DataError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def save_kdf1(ds: Dataset, path) -> None:
    """Binary container: magic, u32 N/d/K, float32 features, u16 labels."""
    n, d = ds.features.shape
    with open(path, "wb") as fh:
        fh.write(_KDF1_MAGIC)
        fh.write(struct.pack("<III", n, d, ds.num_classes))
        fh.write(ds.features.astype("<f4").tobytes())
        fh.write(ds.labels.astype("<u2").tobytes())


def load_kdf1(path) -> Dataset:
    """Read a KDF1 file, reporting the byte offset of whatever is malformed."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _KDF1_MAGIC:
        raise DataFormatError(f"{path}: bad magic at byte 0, expected {_KDF1_MAGIC!r}")
    if len(blob) < 16:
        raise DataFormatError(
            f"{path}: truncated header, need 16 bytes, file ends at {len(blob)}"
        )
    n, d, k = struct.unpack_from("<III", blob, 4)
    if n == 0 or d == 0 or k == 0:
        raise DataFormatError(f"{path}: header declares empty dataset (N={n}, d={d}, K={k})")
    feat_start, feat_size = 16, n * d * 4
    label_start = feat_start + feat_size
    label_size = n * 2
    if len(blob) < label_start:
        raise DataFormatError(
            f"{path}: truncated feature section, expected {feat_size} bytes "
            f"at offset {feat_start}, file ends at {len(blob)}"
        )
    if len(blob) < label_start + label_size:
        raise DataFormatError(
            f"{path}: truncated label section, expected {label_size} bytes "
            f"at offset {label_start}, file ends at {len(blob)}"
        )
    if len(blob) > label_start + label_size:
        raise DataFormatError(
            f"{path}: {len(blob) - label_start - label_size} unexpected trailing "
            f"bytes at offset {label_start + label_size}"
        )
    features = np.frombuffer(blob, dtype="<f4", count=n * d, offset=feat_start)
    labels = np.frombuffer(blob, dtype="<u2", count=n, offset=label_start).astype(np.int64)
    bad = (labels != UNLABELED) & (labels >= k)
    if np.any(bad):
        first = int(np.flatnonzero(bad)[0])
        raise DataFormatError(
            f"{path}: label {labels[first]} out of range [0, {k}) for row {first} "
            f"at offset {label_start + 2 * first}"
        )
    return Dataset(
        features.astype(np.float64).reshape(n, d),
        labels,
        num_classes=k,
        tag=f"kdf1:{path}",
    )
