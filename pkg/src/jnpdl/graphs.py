"""Intra-class (intrinsic) and inter-class (penalty) kNN similarity graphs.

Both graphs are binary, symmetrized with OR, and come paired with their
degree and Laplacian matrices.  Minimizing the intrinsic Laplacian
quadratic form pulls same-class points together; maximizing the penalty
one pushes different-class points apart.  Neighbor ties are broken by
the lower column index so construction is fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ValidationError

GraphKind = Literal["intrinsic", "penalty"]
Metric = Literal["euclidean", "correlation"]

# distance assigned to pairs involving a zero-norm column under the
# correlation metric (the metric's maximum)
_CORRELATION_MAX = 2.0


@dataclass(frozen=True)
class GraphParams:
    k_intrinsic: int = 5
    k_penalty: int = 30
    metric: Metric = "euclidean"

    def __post_init__(self):
        if self.k_intrinsic < 1 or self.k_penalty < 1:
            raise ValidationError("neighbor counts must be positive")
        if self.metric not in ("euclidean", "correlation"):
            raise ValidationError(f"unknown metric {self.metric!r}")


@dataclass(frozen=True)
class DiscriminativeGraph:
    """Binary similarity matrix with its degree and Laplacian matrices."""

    similarity: np.ndarray
    degree: np.ndarray
    laplacian: np.ndarray
    kind: GraphKind


def pairwise_distances(features: np.ndarray, metric: Metric) -> np.ndarray:
    """Symmetric N x N distance matrix between columns of `features`.

    euclidean: squared Euclidean distance (order-equivalent to Euclidean).
    correlation: 1 - cosine similarity; zero-norm columns are maximally
    distant (distance 2) from everything.
    """
    features = np.asarray(features, dtype=np.float64)
    gram = features.T @ features
    if metric == "euclidean":
        sq = np.diag(gram).copy()
        dist = sq[:, None] + sq[None, :] - 2.0 * gram
        np.maximum(dist, 0.0, out=dist)
    elif metric == "correlation":
        norms = np.sqrt(np.diag(gram).copy())
        zero = norms <= 0.0
        safe = np.where(zero, 1.0, norms)
        cos = gram / np.outer(safe, safe)
        dist = 1.0 - cos
        dist[zero, :] = _CORRELATION_MAX
        dist[:, zero] = _CORRELATION_MAX
    else:
        raise ValidationError(f"unknown metric {metric!r}")
    dist = 0.5 * (dist + dist.T)
    np.fill_diagonal(dist, 0.0)
    return dist


def _knn_similarity(dist, labels, k, same_class):
    """Directed kNN pick (stable tie-break by column index), OR-symmetrized."""
    n = dist.shape[0]
    sim = np.zeros((n, n))
    for i in range(n):
        if same_class:
            mask = labels == labels[i]
            mask[i] = False
        else:
            mask = labels != labels[i]
        candidates = np.flatnonzero(mask)
        k_eff = min(k, candidates.size)
        if k_eff == 0:
            continue
        order = np.argsort(dist[i, candidates], kind="stable")
        sim[i, candidates[order[:k_eff]]] = 1.0
    return np.where((sim + sim.T) > 0, 1.0, 0.0)


def _check_inputs(features, labels):
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels).ravel()
    if features.ndim != 2:
        raise ValidationError("features must be a 2-D matrix (dim x samples)")
    if features.shape[1] != labels.shape[0]:
        raise ValidationError(
            f"feature columns ({features.shape[1]}) and labels ({labels.shape[0]}) disagree"
        )
    if features.shape[1] < 2:
        raise ValidationError("need at least two samples to build a graph")
    if not np.all(np.isfinite(features)):
        raise ValidationError("features contain non-finite values")
    return features, labels


def build_intrinsic_graph(features, labels, params: GraphParams) -> DiscriminativeGraph:
    """kNN graph over same-class pairs; k is capped at (class size - 1)."""
    features, labels = _check_inputs(features, labels)
    dist = pairwise_distances(features, params.metric)
    sim = _knn_similarity(dist, labels, params.k_intrinsic, same_class=True)
    degree, laplacian = laplacian_of(sim)
    return DiscriminativeGraph(sim, degree, laplacian, "intrinsic")


def build_penalty_graph(features, labels, params: GraphParams) -> DiscriminativeGraph:
    """kNN graph over different-class pairs; k is capped at (N - class size)."""
    features, labels = _check_inputs(features, labels)
    if np.unique(labels).size < 2:
        raise ValidationError("penalty graph is undefined for a single-class dataset")
    dist = pairwise_distances(features, params.metric)
    sim = _knn_similarity(dist, labels, params.k_penalty, same_class=False)
    degree, laplacian = laplacian_of(sim)
    return DiscriminativeGraph(sim, degree, laplacian, "penalty")


def laplacian_of(similarity: np.ndarray):
    """Degree and Laplacian (degree - similarity) of a similarity matrix."""
    similarity = np.asarray(similarity, dtype=np.float64)
    if similarity.ndim != 2 or similarity.shape[0] != similarity.shape[1]:
        raise ValidationError("similarity must be square")
    if not np.array_equal(similarity, similarity.T):
        raise ValidationError("similarity must be symmetric")
    if similarity.size and similarity.min() < 0:
        raise ValidationError("similarity must be non-negative")
    if np.any(np.diag(similarity) != 0):
        raise ValidationError("similarity must have a zero diagonal")
    degree = np.diag(similarity.sum(axis=1))
    return degree, degree - similarity


def zero_graph(n: int, kind: GraphKind = "intrinsic") -> DiscriminativeGraph:
    """Edgeless graph; its Laplacian contributes nothing to any objective."""
    z = np.zeros((n, n))
    return DiscriminativeGraph(z, z.copy(), z.copy(), kind)
