"""Non-negative projection learning with NMF-style multiplicative updates.

The projection P (rows split at q into an embedding part and a
reconstruction-compensation part) and the basis M are alternately
improved by multiplicative steps P <- P * (grad_neg + eps) / (grad_pos
+ eps), where the gradient of the projection objective is written as a
difference of two entrywise non-negative matrices.  A step that fails
to decrease the objective retries with square-rooted exponents and
finally keeps the previous iterate, so every step is monotone; column
renormalization of M happens once at the end of the call and its
(logged, unasserted) perturbation is excluded from the descent
guarantee.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dictionary import reconstruction_terms
from .errors import NumericalError, ValidationError

log = logging.getLogger(__name__)

_HALVINGS = 8


@dataclass
class ProjectionParams:
    alpha1: float = 1.0
    beta: float = 0.7
    epsilon_div: float = 1e-12
    max_iters: int = 10
    tol: float = 1e-12

    def __post_init__(self):
        if self.alpha1 < 0 or self.beta < 0:
            raise ValidationError("alpha1 and beta must be non-negative")
        if self.epsilon_div <= 0 or self.tol <= 0:
            raise ValidationError("epsilon_div and tol must be positive")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be positive")


@dataclass
class ProjectionModel:
    """Non-negative projection P (s_p x s) and basis M (s x s_p, unit columns).

    The first q rows of P carry the graph embedding; the remaining rows
    compensate reconstruction.  M splits column-wise at the same q.
    """

    P: np.ndarray
    M: np.ndarray
    q: int

    @property
    def P_hat(self) -> np.ndarray:
        return self.P[: self.q]

    @property
    def P_tilde(self) -> np.ndarray:
        return self.P[self.q:]

    @property
    def M_hat(self) -> np.ndarray:
        return self.M[:, : self.q]

    @property
    def M_tilde(self) -> np.ndarray:
        return self.M[:, self.q:]

    def validate(self):
        s_p, s = self.P.shape
        if self.M.shape != (s, s_p):
            raise ValidationError("M must be the transposed shape of P")
        if not (1 <= self.q < s_p):
            raise ValidationError(f"row split q={self.q} must satisfy 1 <= q < {s_p}")
        if not (np.all(np.isfinite(self.P)) and np.all(np.isfinite(self.M))):
            raise ValidationError("projection model contains non-finite values")
        if self.P.min() < 0 or self.M.min() < 0:
            raise ValidationError("P and M must be entrywise non-negative")
        norms = np.linalg.norm(self.M, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise ValidationError("columns of M must have unit norm")


def random_unit_columns(rng, rows: int, cols: int) -> np.ndarray:
    """Non-negative matrix with unit-norm columns, uniform [0,1) entries."""
    mat = rng.random((rows, cols))
    return mat / np.linalg.norm(mat, axis=0, keepdims=True)


def project(model: ProjectionModel, samples) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[0] != model.P.shape[1]:
        raise ValidationError(
            f"samples have dimension {samples.shape[0]}, projection expects {model.P.shape[1]}"
        )
    return model.P @ samples


def _split(mat):
    return np.maximum(mat, 0.0), np.maximum(-mat, 0.0)


def projection_graph_term(model: ProjectionModel, features, graphs, beta: float) -> float:
    """Unweighted graph projection term:
    |Y - M P Y|^2 + beta * (embedding/complement Laplacian traces) + |M - P'|^2."""
    Y = features
    E = Y - model.M @ (model.P @ Y)
    value = float(np.sum(E * E)) + float(np.sum((model.M - model.P.T) ** 2))
    if graphs is not None:
        intrinsic, penalty = graphs
        Zh = model.P_hat @ Y
        Zt = model.P_tilde @ Y
        value += beta * float(np.sum((Zh @ intrinsic.laplacian) * Zh))
        value += beta * float(np.sum((Zt @ penalty.laplacian) * Zt))
    return value


def projection_objective(model, dataset, dictionary, coding, graphs, params) -> float:
    """Reconstruction terms that involve P plus alpha1 times the graph term."""
    Z = model.P @ dataset.features
    global_term, local_term, _ = reconstruction_terms(dictionary, Z, coding)
    return global_term + local_term + params.alpha1 * projection_graph_term(
        model, dataset.features, graphs, params.beta
    )


class _Precomputed:
    """Split matrices that stay fixed while P and M move."""

    def __init__(self, dataset, dictionary, coding, graphs, params):
        Y = dataset.features
        self.Y = Y
        self.A_pos, self.A_neg = _split(Y @ Y.T)
        C = (dictionary.atoms @ coding.coeffs) @ Y.T
        self.C_pos, self.C_neg = _split(C)
        C_loc = np.zeros_like(C)
        for c, rows in enumerate(dictionary.class_ranges):
            cols = coding.column_slices[c]
            C_loc += (dictionary.atoms[:, rows] @ coding.coeffs[rows, cols]) @ Y[:, cols].T
        self.Cl_pos, self.Cl_neg = _split(C_loc)
        if graphs is not None:
            intrinsic, penalty = graphs
            for name, graph in (("i", intrinsic), ("p", penalty)):
                deg = np.diag(graph.degree)
                qb_pos, qb_neg = _split((Y * deg[None, :]) @ Y.T)
                qw_pos, qw_neg = _split((Y @ graph.similarity) @ Y.T)
                # degree part feeds the ascent half, similarity part the descent half
                setattr(self, f"G{name}_pos", qb_pos + qw_neg)
                setattr(self, f"G{name}_neg", qb_neg + qw_pos)
        else:
            n = Y.shape[0]
            zero = np.zeros((n, n))
            self.Gi_pos = self.Gi_neg = self.Gp_pos = self.Gp_neg = zero


def _p_split(P, M, pre: _Precomputed, params: ProjectionParams, q: int):
    a1, b = params.alpha1, params.beta
    MtM = M.T @ M
    gamma_pos = np.vstack([P[:q] @ pre.Gi_pos, P[q:] @ pre.Gp_pos])
    gamma_neg = np.vstack([P[:q] @ pre.Gi_neg, P[q:] @ pre.Gp_neg])
    pos = 2.0 * (
        2.0 * P @ pre.A_pos
        + pre.C_neg
        + pre.Cl_neg
        + a1 * (MtM @ P @ pre.A_pos + M.T @ pre.A_neg)
        + a1 * b * gamma_pos
        + a1 * P
    )
    neg = 2.0 * (
        2.0 * P @ pre.A_neg
        + pre.C_pos
        + pre.Cl_pos
        + a1 * (MtM @ P @ pre.A_neg + M.T @ pre.A_pos)
        + a1 * b * gamma_neg
        + a1 * M.T
    )
    return pos, neg


def _m_split(P, M, pre: _Precomputed, params: ProjectionParams):
    a1 = params.alpha1
    Z = P @ pre.Y
    ZZ_pos, ZZ_neg = _split(Z @ Z.T)
    F_pos, F_neg = _split(pre.Y @ Z.T)
    pos = 2.0 * a1 * (M @ ZZ_pos + F_neg + M)
    neg = 2.0 * a1 * (M @ ZZ_neg + F_pos + P.T)
    return pos, neg


def projection_gradients(model, dataset, dictionary, coding, graphs, params):
    """True gradients of the projection objective w.r.t. P and M."""
    pre = _Precomputed(dataset, dictionary, coding, graphs, params)
    pos_p, neg_p = _p_split(model.P, model.M, pre, params, model.q)
    pos_m, neg_m = _m_split(model.P, model.M, pre, params)
    return pos_p - neg_p, pos_m - neg_m


def _multiplicative_step(current, pos, neg, eps, eval_fn, current_val):
    """Apply cur * ((neg+eps)/(pos+eps))^t, shrinking t until descent."""
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(neg))):
        raise NumericalError("multiplicative update produced non-finite gradients")
    ratio = (neg + eps) / (pos + eps)
    exponent = 1.0
    for _ in range(_HALVINGS + 1):
        cand = current * ratio**exponent if exponent != 1.0 else current * ratio
        val = eval_fn(cand)
        if val <= current_val:
            return cand, val
        exponent *= 0.5
    return current, current_val


def update_projection(model: ProjectionModel, dataset, dictionary, coding, graphs,
                      params: ProjectionParams, step_log=None,
                      renormalize: bool = True) -> ProjectionModel:
    """Alternate multiplicative P- and M-steps (max_iters rounds), then
    renormalize M's columns.  The objective measured before that final
    renormalization never exceeds its value at entry."""
    pre = _Precomputed(dataset, dictionary, coding, graphs, params)
    q = model.q
    P = model.P.copy()
    M = model.M.copy()

    def full_objective(P_, M_):
        mdl = ProjectionModel(P_, M_, q)
        return projection_objective(mdl, dataset, dictionary, coding, graphs, params)

    def m_part(M_):
        E = pre.Y - M_ @ (P @ pre.Y)
        return params.alpha1 * (float(np.sum(E * E)) + float(np.sum((M_ - P.T) ** 2)))

    entry_val = full_objective(P, M)
    val = entry_val
    eps = params.epsilon_div
    rounds = 0
    for _ in range(params.max_iters):
        prev_val = val
        pos, neg = _p_split(P, M, pre, params, q)
        P, val = _multiplicative_step(P, pos, neg, eps, lambda c: full_objective(c, M), val)
        pos_m, neg_m = _m_split(P, M, pre, params)
        m_val = m_part(M)
        rest = val - m_val
        M, m_val = _multiplicative_step(M, pos_m, neg_m, eps, m_part, m_val)
        val = rest + m_val
        rounds += 1
        if abs(prev_val - val) <= params.tol * max(abs(prev_val), 1e-12):
            break

    prenorm_val = full_objective(P, M)
    if prenorm_val > entry_val:  # accumulated rounding only; keep the entry model
        P, M, prenorm_val = model.P.copy(), model.M.copy(), entry_val

    if renormalize:
        norms = np.linalg.norm(M, axis=0)
        M = M / np.where(norms > 0, norms, 1.0)
    post_val = full_objective(P, M)
    if post_val > prenorm_val:
        log.debug(
            "column renormalization of M raised the projection objective by %.3e",
            post_val - prenorm_val,
        )
    if step_log is not None:
        step_log.append(
            {"entry": entry_val, "prenorm": prenorm_val, "post": post_val, "rounds": rounds}
        )
    out = ProjectionModel(P, M, q)
    if renormalize:
        out.validate()
    return out
