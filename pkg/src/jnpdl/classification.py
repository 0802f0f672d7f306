"""Test-time classification: single samples via l1 coding and a
class-residual-plus-mean-distance score, image sets via per-frame labels
and majority voting (with a fast ridge-coded per-frame path)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .coding import code_l1, code_l2_batch
from .errors import ValidationError
from .training import TrainedModel, resolve_lambda2


@dataclass
class ClassifierParams:
    sigma: float = 0.05
    lambda1: float = 5e-6
    lambda2: float | None = None  # None: 0.001 * N / 700 from the model
    set_mode: Literal["l1", "l2_fast"] = "l2_fast"

    def __post_init__(self):
        if self.sigma < 0 or self.lambda1 < 0:
            raise ValidationError("classifier weights must be non-negative")
        if self.lambda2 is not None and self.lambda2 < 0:
            raise ValidationError("lambda2 must be non-negative")
        if self.set_mode not in ("l1", "l2_fast"):
            raise ValidationError(f"unknown set_mode {self.set_mode!r}")


def _project_one(raw, model: TrainedModel) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.float64).ravel()
    if raw.shape[0] != model.projection.P.shape[1]:
        raise ValidationError(
            f"sample has dimension {raw.shape[0]}, model expects {model.projection.P.shape[1]}"
        )
    return model.projection.P @ raw


def _model_lambda2(params: ClassifierParams, model: TrainedModel) -> float:
    return resolve_lambda2(params.lambda2, model.coding.coeffs.shape[1])


def lasso_code_projected(z, dictionary, lambda1: float) -> np.ndarray:
    """Warm-started l1 coding of an already-projected sample, certified
    relative to the gradient scale so large-magnitude features do not
    demand sub-rounding absolute accuracy."""
    warm = code_l2_batch(z[:, None], dictionary, max(lambda1, 1e-8))[:, 0]
    grad_scale = float(np.abs(2.0 * dictionary.atoms.T @ z).max(initial=1.0))
    return code_l1(z, dictionary, lambda1, x0=warm, tol=1e-6 * max(1.0, grad_scale))


def classify_sample(raw, model: TrainedModel, params: ClassifierParams):
    """(label, per-class scores): lasso-code the projected sample, score
    each class by its own-atoms residual plus sigma times the distance
    to that class's mean training coefficients.  Ties take the lowest
    class index."""
    z = _project_one(raw, model)
    dictionary = model.dictionary
    x = lasso_code_projected(z, dictionary, params.lambda1)
    means = model.coding.class_means
    scores = np.empty(dictionary.n_classes)
    for c in range(dictionary.n_classes):
        rows = dictionary.class_ranges[c]
        resid = z - dictionary.atoms[:, rows] @ x[rows]
        scores[c] = float(resid @ resid) + params.sigma * float(np.sum((x - means[c]) ** 2))
    return int(np.argmin(scores)) + 1, scores


def _residual_scores(Z, coeffs, dictionary) -> np.ndarray:
    """Per-class residual norms for ridge-coded frames (K x n_frames)."""
    scores = np.empty((dictionary.n_classes, Z.shape[1]))
    for c in range(dictionary.n_classes):
        rows = dictionary.class_ranges[c]
        resid = Z - dictionary.atoms[:, rows] @ coeffs[rows, :]
        scores[c] = np.sum(resid * resid, axis=0)
    return scores


def classify_frame_fast(raw, model: TrainedModel, params: ClassifierParams) -> int:
    """Label by class residual of the ridge (l2) code of the projected frame."""
    z = _project_one(raw, model)
    coeffs = code_l2_batch(z[:, None], model.dictionary, _model_lambda2(params, model))
    scores = _residual_scores(z[:, None], coeffs, model.dictionary)[:, 0]
    return int(np.argmin(scores)) + 1


def classify_set(frames, model: TrainedModel, params: ClassifierParams):
    """(label, vote histogram) for a set of frames (columns).

    Each frame is labeled independently (ridge path by default, lasso
    when set_mode is "l1") and the modal label wins; vote ties take the
    lowest class index."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 1:
        frames = frames[:, None]
    if frames.shape[1] < 1:
        raise ValidationError("frame set is empty")
    n_classes = model.dictionary.n_classes
    if params.set_mode == "l1":
        labels = [classify_sample(frames[:, j], model, params)[0]
                  for j in range(frames.shape[1])]
    else:
        Z = model.projection.P @ frames
        coeffs = code_l2_batch(Z, model.dictionary, _model_lambda2(params, model))
        scores = _residual_scores(Z, coeffs, model.dictionary)
        labels = (np.argmin(scores, axis=0) + 1).tolist()
    histogram = np.bincount(labels, minlength=n_classes + 1)[1:]
    return int(np.argmax(histogram)) + 1, histogram
