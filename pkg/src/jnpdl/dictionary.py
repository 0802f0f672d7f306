"""Class-structured dictionary: initialization, objective, per-atom updates.

The dictionary objective combines a global reconstruction term over all
samples, a local term that asks each class's atoms to reconstruct that
class's samples, and a cross term that penalizes atoms of class j for
carrying weight on other classes' samples:

    F(D) = |Z - D X|^2 + sum_c |Z_c - D_c X_c^c|^2 + sum_c sum_{j!=c} |D_j X_c^j|^2

with Z the projected samples.  Atoms are updated one at a time by an
exact rank-1 solve followed by projection to the unit sphere, which
never increases F.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import NumericalError, ValidationError

if TYPE_CHECKING:
    from .coding import CodingMatrix

_DEAD_ATOM_TOL = 1e-12


@dataclass
class Dictionary:
    """Unit-norm atom matrix (s_p x A) partitioned into per-class blocks."""

    atoms: np.ndarray
    class_ranges: list[slice]

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_ranges)

    def block(self, c: int) -> np.ndarray:
        """Atoms of class index c (0-based)."""
        return self.atoms[:, self.class_ranges[c]]

    def validate(self):
        if not np.all(np.isfinite(self.atoms)):
            raise ValidationError("dictionary atoms contain non-finite values")
        norms = np.linalg.norm(self.atoms, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise ValidationError("dictionary atoms must have unit norm")
        stops = [0] + [sl.stop for sl in self.class_ranges]
        starts = [sl.start for sl in self.class_ranges] + [self.n_atoms]
        if stops != starts:
            raise ValidationError("class ranges must partition the atom columns")


def ranges_from_counts(counts) -> list[slice]:
    out, start = [], 0
    for c in counts:
        out.append(slice(start, start + int(c)))
        start += int(c)
    return out


def init_dictionary(s_p: int, atoms_per_class, seed: int) -> Dictionary:
    """Random non-negative dictionary, uniform [0,1) columns normalized to unit norm."""
    counts = [int(c) for c in atoms_per_class]
    if s_p < 1:
        raise ValidationError("atom dimension must be positive")
    if any(c < 1 for c in counts):
        raise ValidationError("every class needs at least one atom")
    rng = np.random.default_rng(seed)
    atoms = rng.random((s_p, sum(counts)))
    atoms /= np.linalg.norm(atoms, axis=0, keepdims=True)
    return Dictionary(atoms, ranges_from_counts(counts))


def reconstruction_terms(dictionary: Dictionary, projected: np.ndarray, coding: "CodingMatrix"):
    """(global, local, cross) reconstruction errors; their sum is F(D)."""
    D = dictionary.atoms
    X = coding.coeffs
    Z = projected
    global_term = float(np.sum((Z - D @ X) ** 2))
    local_term = 0.0
    cross_term = 0.0
    n = Z.shape[1]
    for c in range(dictionary.n_classes):
        rows = dictionary.class_ranges[c]
        cols = coding.column_slices[c]
        Dc = D[:, rows]
        local_term += float(np.sum((Z[:, cols] - Dc @ X[rows, cols]) ** 2))
        other = np.ones(n, dtype=bool)
        other[cols] = False
        cross_term += float(np.sum((Dc @ X[rows, :][:, other]) ** 2))
    return global_term, local_term, cross_term


def dictionary_objective(dictionary: Dictionary, projected, coding) -> float:
    g, l, x = reconstruction_terms(dictionary, projected, coding)
    return g + l + x


def dictionary_gradient(dictionary: Dictionary, projected, coding) -> np.ndarray:
    """Gradient of F with respect to the atom matrix (pre-normalization)."""
    D = dictionary.atoms
    X = coding.coeffs
    Z = projected
    grad = 2.0 * (D @ X - Z) @ X.T
    n = Z.shape[1]
    for c in range(dictionary.n_classes):
        rows = dictionary.class_ranges[c]
        cols = coding.column_slices[c]
        Dc = D[:, rows]
        grad[:, rows] += 2.0 * (Dc @ X[rows, cols] - Z[:, cols]) @ X[rows, cols].T
        other = np.ones(n, dtype=bool)
        other[cols] = False
        Xo = X[rows, :][:, other]
        grad[:, rows] += 2.0 * Dc @ (Xo @ Xo.T)
    return grad


def update_dictionary(dictionary: Dictionary, projected, coding) -> Dictionary:
    """One deterministic sweep of per-atom rank-1 updates (ascending index).

    Each atom's quadratic subproblem is solved exactly and the solution
    renormalized; acceptance keeps the previous atom whenever the
    normalized candidate would not decrease F, so the sweep is monotone.
    Atoms with (near-)zero coefficient rows are left unchanged.
    """
    D = dictionary.atoms.copy()
    X = coding.coeffs
    Z = projected
    if not np.all(np.isfinite(Z)):
        raise NumericalError("projected samples contain non-finite values")
    n = Z.shape[1]

    R = Z - D @ X
    for c in range(dictionary.n_classes):
        rows = dictionary.class_ranges[c]
        cols = coding.column_slices[c]
        other = np.ones(n, dtype=bool)
        other[cols] = False
        # class-local residual and cross-term product, rank-1 maintained
        Rl = Z[:, cols] - D[:, rows] @ X[rows, cols]
        S = D[:, rows] @ X[rows, :][:, other]
        for k in range(rows.start, rows.stop):
            xk = X[k, :]
            xk_c = X[k, cols]
            xk_o = X[k, other]
            ck = xk @ xk + xk_c @ xk_c + xk_o @ xk_o
            if ck < _DEAD_ATOM_TOL:
                continue
            d_old = D[:, k].copy()
            v = (
                R @ xk
                + d_old * (xk @ xk)
                + Rl @ xk_c
                + d_old * (xk_c @ xk_c)
                - S @ xk_o
                + d_old * (xk_o @ xk_o)
            )
            vnorm = np.linalg.norm(v)
            if vnorm < _DEAD_ATOM_TOL:
                continue
            d_new = v / vnorm
            # unit-sphere delta of the atom's quadratic: -2 (d_new - d_old) . v
            if -2.0 * float((d_new - d_old) @ v) > 0.0:
                continue
            delta = d_old - d_new
            R += np.outer(delta, xk)
            Rl += np.outer(delta, xk_c)
            S -= np.outer(delta, xk_o)
            D[:, k] = d_new
    if not np.all(np.isfinite(D)):
        raise NumericalError("dictionary update produced non-finite atoms")
    return Dictionary(D, list(dictionary.class_ranges))
