"""Input validation helpers shared by the estimators and the CLI."""

import numpy as np

from .kernels import EPANECHNIKOV, GAUSSIAN, KernelSpec


def check_X_z(X, z=None):
    """Validate an observation matrix and optional covariate vector.

    Returns float arrays with ``X`` of shape (n, p), n >= 2, and ``z`` of
    length n.  Non-finite entries are rejected.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-dimensional, got shape {X.shape}")
    n, p = X.shape
    if n < 2 or p < 1:
        raise ValueError(f"need at least 2 observations of >=1 variables, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite entries")
    if z is None:
        return X, None
    z = np.asarray(z, dtype=float).ravel()
    if z.shape[0] != n:
        raise ValueError(f"z has length {z.shape[0]}, expected {n}")
    if not np.all(np.isfinite(z)):
        raise ValueError("z contains non-finite entries")
    return X, z


def resolve_kernel(kernel, bandwidth):
    """Build a KernelSpec from an estimator's string/float parameters."""
    if isinstance(kernel, KernelSpec):
        return kernel
    if kernel not in (EPANECHNIKOV, GAUSSIAN):
        raise ValueError(f"kernel must be one of {(EPANECHNIKOV, GAUSSIAN)}, got {kernel!r}")
    return KernelSpec(family=kernel, bandwidth=float(bandwidth))


def resolve_grid(grid, z, bandwidth):
    """Grid points from either a point count or an explicit array.

    An integer asks for that many equally spaced points over the observed
    covariate range.  Explicit points must be strictly increasing, at
    least two, and lie within the data range widened by one bandwidth.
    """
    if np.isscalar(grid):
        g = int(grid)
        if g < 2:
            raise ValueError("grid needs at least 2 points")
        lo, hi = float(np.min(z)), float(np.max(z))
        if lo == hi:
            raise ValueError("covariate is constant; a grid cannot be derived")
        return np.linspace(lo, hi, g)
    points = np.asarray(grid, dtype=float).ravel()
    if points.shape[0] < 2:
        raise ValueError("grid needs at least 2 points")
    if np.any(np.diff(points) <= 0):
        raise ValueError("grid points must be strictly increasing")
    lo = float(np.min(z)) - bandwidth
    hi = float(np.max(z)) + bandwidth
    if points[0] < lo or points[-1] > hi:
        raise ValueError(
            f"grid points must lie within [{lo}, {hi}] "
            "(data range widened by one bandwidth)")
    return points
