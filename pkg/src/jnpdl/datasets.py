"""Labeled feature datasets: CSV ingestion, synthetic generation, class-block views.

Samples are stored one per column.  Columns are always kept grouped by
class (all class-1 columns first, then class 2, ...) so that every
class owns a contiguous column range; loaders reorder input rows into
this canonical layout with a stable sort.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass
class LabeledDataset:
    """Feature matrix (s x N, one sample per column) with labels in 1..K."""

    features: np.ndarray
    labels: np.ndarray
    class_slices: list[slice]

    @property
    def dim(self) -> int:
        return self.features.shape[0]

    @property
    def n_samples(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_slices)

    @property
    def class_sizes(self) -> list[int]:
        return [sl.stop - sl.start for sl in self.class_slices]

    def class_features(self, c: int) -> np.ndarray:
        """Columns of class index c (0-based; label c + 1)."""
        return self.features[:, self.class_slices[c]]


def from_arrays(features, labels) -> LabeledDataset:
    """Build a dataset, relabeling to 1..K and grouping columns by class.

    Labels that are not exactly 1..K are remapped (sorted unique order)
    with a warning.  Column order within a class is preserved.
    """
    features = np.ascontiguousarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if features.ndim != 2:
        raise ValidationError("features must be a 2-D matrix (dim x samples)")
    if features.shape[1] != labels.shape[0]:
        raise ValidationError(
            f"feature columns ({features.shape[1]}) and labels ({labels.shape[0]}) disagree"
        )
    if labels.shape[0] == 0:
        raise ValidationError("dataset is empty")
    if not np.all(np.isfinite(features)):
        raise ValidationError("features contain NaN or infinite values")

    uniq = np.unique(labels)
    n_classes = uniq.shape[0]
    if not np.array_equal(uniq, np.arange(1, n_classes + 1)):
        warnings.warn(
            f"labels {uniq.tolist()} are not contiguous 1..{n_classes}; relabeling",
            stacklevel=2,
        )
        remap = {old: new for new, old in enumerate(uniq, start=1)}
        labels = np.array([remap[v] for v in labels], dtype=np.int64)

    order = np.argsort(labels, kind="stable")
    features = np.ascontiguousarray(features[:, order])
    labels = labels[order]

    slices = []
    start = 0
    for c in range(1, n_classes + 1):
        count = int(np.sum(labels == c))
        slices.append(slice(start, start + count))
        start += count
    return LabeledDataset(features, labels, slices)


def load_dataset(path) -> LabeledDataset:
    """Read a CSV dataset: one sample per row, integer label first.

    Lines starting with '#' and blank lines are ignored.
    """
    rows = []
    labels = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            if len(fields) < 2:
                raise ValidationError(f"{path}:{lineno}: need a label and at least one feature")
            try:
                label = int(fields[0])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: malformed label {fields[0]!r}") from None
            try:
                values = [float(v) for v in fields[1:]]
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: malformed feature value") from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ValidationError(
                    f"{path}:{lineno}: expected {width} features, found {len(values)}"
                )
            if not all(np.isfinite(values)):
                raise ValidationError(f"{path}:{lineno}: non-finite feature value")
            if label < 1:
                # relabeling in from_arrays handles 0- or arbitrary-based ids
                pass
            rows.append(values)
            labels.append(label)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    features = np.array(rows, dtype=np.float64).T
    return from_arrays(features, labels)


def save_dataset(dataset: LabeledDataset, path) -> None:
    """Write the CSV form (17 significant digits, exact float round-trip)."""
    from .model_io import atomic_write_text

    lines = []
    for j in range(dataset.n_samples):
        vals = ",".join(format(v, ".17g") for v in dataset.features[:, j])
        lines.append(f"{dataset.labels[j]},{vals}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def generate_synthetic(
    classes: int,
    per_class: int,
    dim: int,
    separation: float,
    correlation: float,
    seed: int,
) -> LabeledDataset:
    """Sample K Gaussian clusters with equicorrelated shared covariance.

    Cluster centers are `separation` times standard-normal draws, so
    separation 0 makes every class identically distributed.  The shared
    covariance is (1 - correlation) * I + correlation * ones; the whole
    dataset is shifted so the minimum feature value is >= 0, matching
    image-intensity semantics.  Deterministic per seed.
    """
    if classes < 1 or per_class < 1 or dim < 1:
        raise ValidationError("classes, per_class and dim must be positive")
    if separation < 0:
        raise ValidationError("separation must be non-negative")
    if not 0.0 <= correlation < 1.0:
        raise ValidationError("correlation must lie in [0, 1)")

    rng = np.random.default_rng(seed)
    centers = separation * rng.standard_normal((classes, dim))
    blocks = []
    for c in range(classes):
        z = rng.standard_normal((dim, per_class))
        shared = rng.standard_normal(per_class)
        noise = np.sqrt(1.0 - correlation) * z + np.sqrt(correlation) * shared[None, :]
        blocks.append(centers[c][:, None] + noise)
    features = np.concatenate(blocks, axis=1)
    low = features.min()
    if low < 0:
        features = features - low
    labels = np.repeat(np.arange(1, classes + 1), per_class)
    return from_arrays(features, labels)
