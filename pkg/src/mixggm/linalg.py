"""Dense symmetric-matrix primitives used throughout the package.

All routines operate on plain numpy arrays.  Precision matrices stay small
(p of a few hundred at most), so everything here is dense.
"""

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import NonConvergence, NotPositiveDefinite

# Relative pivot threshold below which a matrix is declared not PD.
# Distinguishes genuine indefiniteness from round-off.
PIVOT_RTOL = 1e-12


def cholesky(m):
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Parameters
    ----------
    m : ndarray, shape (p, p)
        Symmetric matrix.

    Returns
    -------
    L : ndarray, shape (p, p)
        Lower-triangular factor with ``L @ L.T == m``.

    Raises
    ------
    NotPositiveDefinite
        If any pivot falls at or below ``PIVOT_RTOL * max(diag(m))``; the
        failing pivot index is attached to the exception.
    """
    m = np.asarray(m, dtype=float)
    p = m.shape[0]
    threshold = PIVOT_RTOL * max(np.max(np.diag(m)), 0.0)
    L = np.zeros_like(m)
    for j in range(p):
        pivot = m[j, j] - L[j, :j] @ L[j, :j]
        if pivot <= threshold:
            raise NotPositiveDefinite(
                f"pivot {pivot:.3e} at index {j} (threshold {threshold:.3e})",
                pivot=j,
            )
        ljj = np.sqrt(pivot)
        L[j, j] = ljj
        if j + 1 < p:
            L[j + 1:, j] = (m[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / ljj
    return L


def log_det(m, chol=None):
    """log-determinant of a symmetric PD matrix via its Cholesky factor."""
    L = cholesky(m) if chol is None else chol
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def spectral_norm(m, tol=1e-9, max_iter=10000):
    """Largest absolute eigenvalue of a symmetric matrix.

    Power iteration on ``m @ m`` (eigenvalues squared, so sign ties cannot
    stall the iteration) with a deterministic start vector: normalized
    all-ones, re-randomized from a fixed seed if it happens to be
    orthogonal to the dominant eigenspace.

    Raises
    ------
    NonConvergence
        If the iteration has not stabilised after ``max_iter`` steps.
    """
    m = np.asarray(m, dtype=float)
    p = m.shape[0]
    if p == 0:
        return 0.0
    scale = np.max(np.abs(m))
    if scale == 0.0:
        return 0.0
    a = m / scale
    v = np.ones(p) / np.sqrt(p)
    rng = np.random.default_rng(0)
    est = 0.0
    for _ in range(max_iter):
        w = a @ (a @ v)
        nw = np.linalg.norm(w)
        if nw <= 1e-300:
            # start vector in (or numerically in) the nullspace of a @ a
            v = rng.standard_normal(p)
            v /= np.linalg.norm(v)
            continue
        v_new = w / nw
        est_new = np.sqrt(nw)  # nw == v.T (a@a) v up to normalisation drift
        if abs(est_new - est) <= tol * max(1.0, est_new):
            # Rayleigh quotient of a@a for the final estimate
            av = a @ v_new
            return float(np.sqrt(av @ av) * scale)
        est = est_new
        v = v_new
    raise NonConvergence(f"power iteration did not converge in {max_iter} steps")


def solve_spd(m, b, chol=None):
    """Solve ``m @ x = b`` for symmetric PD ``m`` via Cholesky."""
    L = cholesky(m) if chol is None else chol
    y = solve_triangular(L, b, lower=True)
    return solve_triangular(L.T, y, lower=False)


def invert_spd(m, chol=None):
    """Inverse of a symmetric PD matrix, symmetrized exactly."""
    L = cholesky(m) if chol is None else chol
    inv = solve_spd(m, np.eye(m.shape[0]), chol=L)
    return 0.5 * (inv + inv.T)


def is_positive_definite(m):
    """True when ``cholesky`` accepts the matrix."""
    try:
        cholesky(m)
    except NotPositiveDefinite:
        return False
    return True
