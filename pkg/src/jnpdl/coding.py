"""Coefficient solvers: training-time graph-regularized l1 coding plus
test-time l1 (lasso) and l2 (ridge) coding over a fixed dictionary.

The training update minimizes, with projection and dictionary held fixed,

    |Z - D X|^2 + sum_c |Z_c - D_c X_c^c|^2 + sum_c sum_{j!=c} |D_j X_c^j|^2
      + alpha2 * (tr(X L X') - tr(X L_pen X')) + alpha3 * |X|_1

by column-wise block coordinate descent.  The penalty Laplacian makes a
column's quadratic potentially indefinite, so each column adds a proximal
term tau * |x - x_old|^2 with tau large enough to restore convexity; each
column subproblem is then solved by accelerated proximal gradient with
backtracking, keeping the best iterate, which makes every sweep monotone
in the true objective.

The graph difference term is concave along directions the dictionary
quadratic barely curves, which leaves the full objective unbounded
below; chasing a column subproblem's exact minimizer there inflates the
coefficients without limit.  Column moves are therefore clamped to a
trust radius: the clamped point lies on the segment to the subproblem
solution, so descent is preserved while total drift stays bounded by
the radius times the sweep count.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dictionary import Dictionary, reconstruction_terms
from .errors import ConvergenceError, NumericalError, ValidationError


@dataclass
class CoderParams:
    alpha2: float = 1.0
    alpha3: float = 0.05
    lambda1: float = 5e-6
    lambda2: float = 1e-3
    prox_tau: float = 0.1
    trust_radius: float = 1.0
    max_iters: int = 100
    max_sweeps: int = 10
    tol: float = 1e-6

    def __post_init__(self):
        if min(self.alpha2, self.alpha3, self.lambda1, self.lambda2) < 0:
            raise ValidationError("coder weights must be non-negative")
        if self.prox_tau <= 0 or self.tol <= 0 or self.trust_radius <= 0:
            raise ValidationError("prox_tau, trust_radius and tol must be positive")
        if self.max_iters < 1 or self.max_sweeps < 1:
            raise ValidationError("iteration limits must be positive")


@dataclass
class CodingMatrix:
    """Coefficient matrix (A x N) aligned column-wise with the samples.

    `atom_slices[j]` selects the rows of class-j atoms and
    `column_slices[i]` the columns of class-i samples, so the block
    X_i^j is coeffs[atom_slices[j], column_slices[i]].
    """

    coeffs: np.ndarray
    atom_slices: list[slice]
    column_slices: list[slice]

    @property
    def n_classes(self) -> int:
        return len(self.column_slices)

    def block(self, i: int, j: int) -> np.ndarray:
        """Coefficients of class-i samples over class-j atoms (X_i^j)."""
        return self.coeffs[self.atom_slices[j], self.column_slices[i]]

    @property
    def class_means(self) -> np.ndarray:
        """Per-class mean coefficient vectors, recomputed on access (K x A)."""
        return class_means(self)


def class_means(coding: CodingMatrix) -> np.ndarray:
    means = np.empty((coding.n_classes, coding.coeffs.shape[0]))
    for c, cols in enumerate(coding.column_slices):
        if cols.stop - cols.start < 1:
            raise ValidationError(f"class {c + 1} has no coefficient columns")
        means[c] = coding.coeffs[:, cols].mean(axis=1)
    return means


def _power_norm(mat: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    n = mat.shape[0]
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(100):
        w = mat @ v
        nw = np.linalg.norm(w)
        if nw <= 1e-300:
            return 0.0
        v = w / nw
        lam = float(v @ (mat @ v))
    return lam


def _soft(v: np.ndarray, thresh: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def lasso_kkt_residual(grad: np.ndarray, x: np.ndarray, lam: float) -> float:
    """Max violation of the l1 optimality conditions, given the smooth gradient."""
    r = np.where(
        x > 0,
        np.abs(grad + lam),
        np.where(x < 0, np.abs(grad - lam), np.maximum(np.abs(grad) - lam, 0.0)),
    )
    return float(r.max()) if r.size else 0.0


def _restricted_solve(G, h, support, signs, lam):
    """Stationary point on a fixed support and sign pattern:
    2 (G_SS x_S - h_S) = -lam * signs."""
    Gss = G[np.ix_(support, support)]
    rhs = h[support] - 0.5 * lam * signs
    try:
        sol = np.linalg.solve(Gss, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(Gss, rhs, rcond=None)[0]
    return sol


def code_l1(sample, dictionary: Dictionary, lambda1: float, *,
            tol: float = 1e-6, max_iters: int = 1000, x0=None) -> np.ndarray:
    """Solve min_x |sample - D x|^2 + lambda1 * |x|_1 by feature-sign
    search: grow an active set one violating coordinate at a time, solve
    the sign-restricted stationarity system exactly, and walk sign
    crossings when the solve flips a sign.  The result is certified by
    the KKT residual.

    Raises ConvergenceError (carrying the best iterate and its residual)
    if the certificate is not met within max_iters steps.
    """
    sample = np.asarray(sample, dtype=np.float64).ravel()
    if lambda1 < 0:
        raise ValidationError("lambda1 must be non-negative")
    if sample.shape[0] != dictionary.atoms.shape[0]:
        raise ValidationError("sample dimension does not match the dictionary")
    if not np.all(np.isfinite(sample)):
        raise ValidationError("sample contains non-finite values")

    D = dictionary.atoms
    n_atoms = D.shape[1]
    G = D.T @ D
    h = D.T @ sample

    def kkt_of(x):
        return lasso_kkt_residual(2.0 * (G @ x - h), x, lambda1)

    def objective(x):
        r = sample - D @ x
        return float(r @ r) + lambda1 * float(np.abs(x).sum())

    if lambda1 == 0.0:
        x = np.linalg.lstsq(D, sample, rcond=None)[0]
        res = kkt_of(x)
        if res <= tol:
            return x
        raise ConvergenceError(
            f"least-squares coding left KKT residual {res:g} > {tol:g}",
            last_iterate=x, kkt_residual=res,
        )

    x = np.zeros(n_atoms) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    best_x, best_kkt = x.copy(), kkt_of(x)
    if best_kkt <= tol:
        return x

    def settle_support(x):
        """Feature-sign inner loop: exact solves on the current support,
        walking the best sign crossing whenever a solve flips a sign."""
        for _ in range(4 * n_atoms + 8):
            support = np.flatnonzero(x)
            if support.size == 0:
                return x
            signs = np.sign(x[support])
            sol = _restricted_solve(G, h, support, signs, lambda1)
            if not np.all(np.isfinite(sol)):
                return x
            if np.all(np.sign(sol) == signs):
                out = np.zeros(n_atoms)
                out[support] = sol
                return out
            xs = x[support]
            direction = sol - xs
            candidates = [(1.0, -1)]
            for i in range(support.size):
                if direction[i] != 0.0:
                    t = -xs[i] / direction[i]
                    if 0.0 < t < 1.0:
                        candidates.append((t, i))
            best_val, best_cand = objective(x), None
            for t, i in candidates:
                cand = np.zeros(n_atoms)
                cand[support] = xs + t * direction
                if i >= 0:
                    cand[support[i]] = 0.0  # exact crossing
                val = objective(cand)
                if val < best_val:
                    best_val, best_cand = val, cand
            if best_cand is None:
                return x  # pattern is stationary for this support
            x = best_cand
        return x

    for _ in range(max_iters):
        x = settle_support(x)
        grad = 2.0 * (G @ x - h)
        res = lasso_kkt_residual(grad, x, lambda1)
        if res < best_kkt:
            best_x, best_kkt = x.copy(), res
        if res <= tol:
            return x
        # activate the worst zero-coordinate violation
        viol = np.where(x == 0.0, np.abs(grad) - lambda1, -np.inf)
        k = int(np.argmax(viol))
        if not viol[k] > 0:
            break  # no activation possible and support settled: stalled
        support = np.append(np.flatnonzero(x), k)
        signs = np.append(np.sign(x[np.flatnonzero(x)]), -np.sign(grad[k]))
        sol = _restricted_solve(G, h, support, signs, lambda1)
        if not np.all(np.isfinite(sol)):
            break
        cand = np.zeros(n_atoms)
        cand[support] = sol
        if np.all(np.sign(sol) == signs):
            x = cand
        else:
            # keep the activation but land on the best crossing toward sol
            xs = np.zeros(support.size)
            xs[:-1] = x[support[:-1]]
            direction = sol - xs
            best_val, best_cand = objective(x), None
            pairs = [(1.0, -1)] + [
                (-xs[i] / direction[i], i)
                for i in range(support.size)
                if direction[i] != 0.0 and 0.0 < -xs[i] / direction[i] < 1.0
            ]
            for t, i in pairs:
                c = np.zeros(n_atoms)
                c[support] = xs + t * direction
                if i >= 0:
                    c[support[i]] = 0.0
                val = objective(c)
                if val < best_val:
                    best_val, best_cand = val, c
            if best_cand is None:
                break
            x = best_cand

    res = kkt_of(x)
    if res < best_kkt:
        best_x, best_kkt = x.copy(), res
    if best_kkt <= tol:
        return best_x
    raise ConvergenceError(
        f"l1 coding did not reach KKT residual {tol:g} in {max_iters} steps "
        f"(best {best_kkt:g})",
        last_iterate=best_x,
        kkt_residual=best_kkt,
    )


def code_l2(sample, dictionary: Dictionary, lambda2: float) -> np.ndarray:
    """Ridge coding: (D'D + lambda2 I)^-1 D' sample."""
    sample = np.asarray(sample, dtype=np.float64).ravel()
    return code_l2_batch(sample[:, None], dictionary, lambda2)[:, 0]


def code_l2_batch(samples, dictionary: Dictionary, lambda2: float) -> np.ndarray:
    """Ridge coding of many samples at once (columns)."""
    samples = np.asarray(samples, dtype=np.float64)
    if lambda2 < 0:
        raise ValidationError("lambda2 must be non-negative")
    if samples.shape[0] != dictionary.atoms.shape[0]:
        raise ValidationError("sample dimension does not match the dictionary")
    if not np.all(np.isfinite(samples)):
        raise ValidationError("samples contain non-finite values")
    D = dictionary.atoms
    gram = D.T @ D
    gram[np.diag_indices_from(gram)] += lambda2
    try:
        out = np.linalg.solve(gram, D.T @ samples)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"ridge system is singular (lambda2={lambda2:g}): {exc}") from exc
    if not np.all(np.isfinite(out)):
        raise NumericalError("ridge coding produced non-finite coefficients")
    return out


def coefficient_graph_term(coeffs, laplacian_intrinsic, laplacian_penalty) -> float:
    """tr(X L X') - tr(X L_pen X'), columns of X as graph nodes."""
    intr = float(np.sum((coeffs @ laplacian_intrinsic) * coeffs))
    pen = float(np.sum((coeffs @ laplacian_penalty) * coeffs))
    return intr - pen


def coding_objective(projected, dictionary, coding, graphs, params: CoderParams) -> float:
    """Training coefficient objective at fixed projection and dictionary."""
    total = sum(reconstruction_terms(dictionary, projected, coding))
    if graphs is not None and params.alpha2 != 0.0:
        intrinsic, penalty = graphs
        total += params.alpha2 * coefficient_graph_term(
            coding.coeffs, intrinsic.laplacian, penalty.laplacian
        )
    total += params.alpha3 * float(np.abs(coding.coeffs).sum())
    return total


def smooth_coding_gradient(projected, dictionary, coding, graphs, params: CoderParams) -> np.ndarray:
    """Gradient of the smooth (non-l1) part of the coefficient objective."""
    D = dictionary.atoms
    X = coding.coeffs
    Z = projected
    grad = 2.0 * D.T @ (D @ X - Z)
    for c, rows in enumerate(dictionary.class_ranges):
        cols = coding.column_slices[c]
        Dc = D[:, rows]
        grad[rows, :] += 2.0 * (Dc.T @ Dc) @ X[rows, :]
        grad[rows, cols] -= 2.0 * Dc.T @ Z[:, cols]
    if graphs is not None and params.alpha2 != 0.0:
        intrinsic, penalty = graphs
        grad += 2.0 * params.alpha2 * X @ (intrinsic.laplacian - penalty.laplacian)
    return grad


def _fista_quadratic(H, scalar, lin, l1_weight, x0, lip0, max_iters, kkt_tol):
    """min_x  x'Hx + scalar|x|^2 + lin'x + l1_weight |x|_1, returning the
    best iterate by objective value (x0 included as a candidate)."""

    def smooth(v):
        return float(v @ (H @ v)) + scalar * float(v @ v) + float(lin @ v)

    def smooth_grad(v):
        return 2.0 * (H @ v) + 2.0 * scalar * v + lin

    def value(v):
        return smooth(v) + l1_weight * float(np.abs(v).sum())

    x = x0.copy()
    best_x, best_val = x.copy(), value(x)
    grad = smooth_grad(x)
    if lasso_kkt_residual(grad, x, l1_weight) <= kkt_tol:
        return x
    step = 1.0 / lip0 if lip0 > 0 else 1.0
    y = x.copy()
    t = 1.0
    prev_val = best_val
    for _ in range(max_iters):
        gy = smooth_grad(y)
        fy = smooth(y)
        while True:
            z = _soft(y - step * gy, step * l1_weight)
            dz = z - y
            if smooth(z) <= fy + float(gy @ dz) + float(dz @ dz) / (2.0 * step) + 1e-14:
                break
            step *= 0.5
            if step < 1e-18:
                break
        val = value(z)
        if val < best_val:
            best_x, best_val = z.copy(), val
        if lasso_kkt_residual(smooth_grad(z), z, l1_weight) <= kkt_tol:
            return z if val <= best_val else best_x
        if not val <= prev_val:  # restart momentum (also on non-finite values)
            t = 1.0
            y = z.copy()
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = z + ((t - 1.0) / t_next) * (z - x)
            t = t_next
        x = z
        prev_val = val
    return best_x


def update_training_coeffs(projected, dictionary: Dictionary, graphs,
                           current: CodingMatrix, params: CoderParams) -> CodingMatrix:
    """Block coordinate sweeps over coefficient columns (ascending index).

    `graphs` is a (intrinsic, penalty) DiscriminativeGraph pair over the
    training columns, or None when alpha2 is zero.  Never increases the
    coefficient objective; warns if the sweep limit is hit before the
    relative-change tolerance.
    """
    Z = np.asarray(projected, dtype=np.float64)
    D = dictionary.atoms
    X = current.coeffs.copy()
    n = X.shape[1]
    if Z.shape != (D.shape[0], n):
        raise ValidationError("projected samples do not match dictionary/coding shapes")
    if not np.all(np.isfinite(Z)):
        raise NumericalError("projected samples contain non-finite values")

    # shared per-column quadratic: D'D plus the block-diagonal local/cross part
    H = D.T @ D
    for rows in dictionary.class_ranges:
        Dc = D[:, rows]
        H[rows, rows] += Dc.T @ Dc
    lam_base = _power_norm(H) * 1.05

    use_graphs = graphs is not None and params.alpha2 != 0.0
    if use_graphs:
        intrinsic, penalty = graphs
        Lg = params.alpha2 * (intrinsic.laplacian - penalty.laplacian)
        if Lg.shape != (n, n):
            raise ValidationError("graphs were built over a different sample count")
        diag = np.diag(Lg)
        tau = np.maximum(0.0, -diag) + params.prox_tau
    else:
        Lg = None
        tau = np.full(n, params.prox_tau)

    # linear coefficients of the reconstruction terms, one column each
    B = -2.0 * (D.T @ Z)
    for c, rows in enumerate(dictionary.class_ranges):
        cols = current.column_slices[c]
        B[rows, cols] -= 2.0 * D[:, rows].T @ Z[:, cols]

    def objective(coeffs):
        tmp = CodingMatrix(coeffs, current.atom_slices, current.column_slices)
        return coding_objective(Z, dictionary, tmp, graphs if use_graphs else None, params)

    obj = objective(X)
    converged = False
    for _ in range(params.max_sweeps):
        for col in range(n):
            x0 = X[:, col].copy()
            if Lg is not None:
                scalar = tau[col] + Lg[col, col]
                coupling = X @ Lg[:, col] - Lg[col, col] * x0
                lin = B[:, col] + 2.0 * coupling - 2.0 * tau[col] * x0
            else:
                scalar = tau[col]
                lin = B[:, col] - 2.0 * tau[col] * x0
            kkt_tol = 1e-9 * (1.0 + float(np.abs(lin).max(initial=0.0)))
            x_new = _fista_quadratic(
                H, scalar, lin, params.alpha3, x0,
                lip0=2.0 * (lam_base + scalar),
                max_iters=params.max_iters,
                kkt_tol=kkt_tol,
            )
            move = x_new - x0
            dist = float(np.linalg.norm(move))
            if dist > params.trust_radius:
                x_new = x0 + (params.trust_radius / dist) * move
            X[:, col] = x_new
        new_obj = objective(X)
        if not np.isfinite(new_obj):
            raise NumericalError("coefficient update produced a non-finite objective")
        if abs(obj - new_obj) <= params.tol * max(abs(obj), 1e-12):
            obj = new_obj
            converged = True
            break
        obj = new_obj
    if not converged:
        warnings.warn("coefficient update stopped at the sweep limit before reaching tol",
                      stacklevel=2)
    return CodingMatrix(X, list(current.atom_slices), list(current.column_slices))
