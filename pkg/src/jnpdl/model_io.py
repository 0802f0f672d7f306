"""Artifact serialization: the binary model container, objective-trace
CSV, metrics JSON, and atomic file writes.

Model container layout (all little-endian):
  magic bytes b"JNPDL1\\n", then uint32 header
  [s, s_p, q, A, K, N, atoms-per-class x K, samples-per-class x K],
  then row-major float64 blocks for P (s_p x s), M (s x s_p),
  D (s_p x A), X (A x N) and the per-class coefficient means (K x A).
Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .coding import CodingMatrix
from .dictionary import Dictionary, ranges_from_counts
from .errors import ValidationError
from .projection import ProjectionModel
from .training import TrainedModel

MAGIC = b"JNPDL1\n"


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temp file in the target directory plus rename."""
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def model_bytes(model: TrainedModel) -> bytes:
    proj = model.projection
    dictionary = model.dictionary
    coding = model.coding
    s_p, s = proj.P.shape
    n_atoms = dictionary.n_atoms
    n_classes = dictionary.n_classes
    n_samples = coding.coeffs.shape[1]
    atom_counts = [sl.stop - sl.start for sl in dictionary.class_ranges]
    sample_counts = [sl.stop - sl.start for sl in coding.column_slices]
    header = np.array(
        [s, s_p, proj.q, n_atoms, n_classes, n_samples, *atom_counts, *sample_counts],
        dtype="<u4",
    )
    parts = [MAGIC, header.tobytes()]
    for arr in (proj.P, proj.M, dictionary.atoms, coding.coeffs, coding.class_means):
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


def save_model(model: TrainedModel, path) -> None:
    atomic_write_bytes(path, model_bytes(model))


def read_header(path) -> dict:
    """Parse just the container header into named fields."""
    with open(path, "rb") as fh:
        blob = fh.read(len(MAGIC) + 6 * 4)
        if blob[: len(MAGIC)] != MAGIC:
            raise ValidationError(f"{path}: not a model container (bad magic bytes)")
        fixed = np.frombuffer(blob[len(MAGIC):], dtype="<u4")
        if fixed.size != 6:
            raise ValidationError(f"{path}: truncated header")
        s, s_p, q, n_atoms, n_classes, n_samples = (int(v) for v in fixed)
        counts = np.frombuffer(fh.read(2 * n_classes * 4), dtype="<u4")
        if counts.size != 2 * n_classes:
            raise ValidationError(f"{path}: truncated header")
    return {
        "s": s,
        "s_p": s_p,
        "q": q,
        "atoms": n_atoms,
        "classes": n_classes,
        "samples": n_samples,
        "atoms_per_class": counts[:n_classes].tolist(),
        "samples_per_class": counts[n_classes:].tolist(),
    }


def load_model(path) -> TrainedModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise ValidationError(f"{path}: not a model container (bad magic bytes)")
    offset = len(MAGIC)
    fixed = np.frombuffer(blob, dtype="<u4", count=6, offset=offset)
    if fixed.size != 6:
        raise ValidationError(f"{path}: truncated header")
    s, s_p, q, n_atoms, n_classes, n_samples = (int(v) for v in fixed)
    offset += 6 * 4
    counts = np.frombuffer(blob, dtype="<u4", count=2 * n_classes, offset=offset)
    offset += 2 * n_classes * 4
    atom_counts = counts[:n_classes].astype(int)
    sample_counts = counts[n_classes:].astype(int)
    if atom_counts.sum() != n_atoms:
        raise ValidationError(f"{path}: per-class atom counts do not sum to {n_atoms}")
    if sample_counts.sum() != n_samples:
        raise ValidationError(f"{path}: per-class sample counts do not sum to {n_samples}")

    def take(rows, cols):
        nonlocal offset
        count = rows * cols
        flat = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        if flat.size != count:
            raise ValidationError(f"{path}: truncated array data")
        offset += count * 8
        return flat.reshape(rows, cols).astype(np.float64)

    P = take(s_p, s)
    M = take(s, s_p)
    atoms = take(s_p, n_atoms)
    coeffs = take(n_atoms, n_samples)
    means = take(n_classes, n_atoms)
    if offset != len(blob):
        raise ValidationError(f"{path}: {len(blob) - offset} trailing bytes")

    projection = ProjectionModel(P, M, q)
    projection.validate()
    dictionary = Dictionary(atoms, ranges_from_counts(atom_counts))
    dictionary.validate()
    coding = CodingMatrix(coeffs, list(dictionary.class_ranges),
                          ranges_from_counts(sample_counts))
    if not np.allclose(means, coding.class_means, atol=1e-9):
        raise ValidationError(f"{path}: stored class means disagree with coefficients")
    return TrainedModel(projection, dictionary, coding, [], None)


def trace_csv(trace) -> str:
    lines = ["iter,R,Gp,Gc,l1,total"]
    for i, row in enumerate(trace):
        lines.append(f"{i},{row.r!r},{row.gp!r},{row.gc!r},{row.l1!r},{row.total!r}")
    return "\n".join(lines) + "\n"


def save_trace(trace, path) -> None:
    atomic_write_text(path, trace_csv(trace))


def metrics_json(metrics: dict) -> str:
    return json.dumps(metrics, indent=2, sort_keys=True) + "\n"


def save_metrics(metrics: dict, path) -> None:
    atomic_write_text(path, metrics_json(metrics))


def coeffs_csv(coeffs: np.ndarray) -> str:
    """One row per sample (coefficients as columns of the input matrix)."""
    lines = []
    for j in range(coeffs.shape[1]):
        lines.append(",".join(format(v, ".17g") for v in coeffs[:, j]))
    return "\n".join(lines) + "\n"
