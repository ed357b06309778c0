"""Information-criterion scoring and the nested choice of the number of
components, the penalty, and the bandwidth.

The score is ``-2 * loglik + log(N) * df`` where ``df`` charges the
parameter count of every grid point's model, rescaled by the per-function
degrees of freedom of the smoothing kernel (so halving the bandwidth
doubles the charge).  The number of components is chosen first by the best
score over all (penalty, bandwidth) pairs, then the penalty by the best
score over bandwidths, and finally the bandwidth by cross-validated
held-out log-likelihood.
"""

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import em, kernels
from .exceptions import AllInitializationsFailed, AllWeightsZero, EmptyGrid
from .validation import resolve_grid, resolve_kernel


@dataclass
class BicRecord:
    """One scored configuration; ``bic == -2*loglik + log(n)*df`` exactly."""

    n_components: int
    alpha: float
    bandwidth: float
    loglik: float
    df: float
    bic: float
    converged: bool
    status: str = "ok"


@dataclass
class SelectionResult:
    n_components: int
    alpha: float
    bandwidth: float
    records: list
    cv_scores: list  # (bandwidth, summed held-out log-likelihood)


def observed_loglik(X, z, fit):
    """Total observed-data mixture log-likelihood under a fit.

    Parameters at each observation are interpolated from the fit's grid;
    the per-observation mixture densities are combined in log space.
    """
    log_lik = em.component_log_likelihoods(
        np.asarray(X, dtype=float), z, fit.grid_points, fit.pi, fit.mu,
        fit.theta)
    _, mix = em.responsibilities_from_logs(log_lik)
    return float(mix.sum())


def degrees_of_freedom(fit, kconst):
    """Effective parameter count of a fitted model.

    Counts, per grid point, the component means plus the upper triangle
    (diagonal included) of every nonzero precision pattern, averages over
    grid points, adds the free mixing proportions, and scales by the
    kernel's per-function degrees of freedom.
    """
    K, G = fit.pi.shape
    p = fit.mu.shape[2]
    iu = np.triu_indices(p)
    nonzero = 0
    for g in range(G):
        for k in range(K):
            nonzero += int(np.count_nonzero(fit.theta[k, g][iu]))
    bracket = (K - 1) + (K * p * G + nonzero) / G
    return bracket * kconst.df_unit


def bic_score(X, z, *, n_components, alpha, kernel_spec, grid_points,
              support_length=None, max_iter=200, tol=1e-5, n_init=5,
              random_state=None):
    """Fit one configuration and assemble its score record."""
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float)
    if support_length is None:
        support_length = float(np.max(z) - np.min(z))
    kconst = kernels.constants(kernel_spec, support_length)
    try:
        fit = em.fit_mixture(
            X, z, n_components=n_components, alpha=alpha,
            kernel_spec=kernel_spec, grid_points=grid_points,
            max_iter=max_iter, tol=tol, n_init=n_init,
            random_state=random_state)
    except (AllInitializationsFailed, AllWeightsZero) as exc:
        record = BicRecord(n_components=n_components, alpha=alpha,
                           bandwidth=kernel_spec.bandwidth, loglik=np.nan,
                           df=np.nan, bic=np.inf, converged=False,
                           status=f"failed: {exc}")
        return record, None
    ll = observed_loglik(X, z, fit)
    df = degrees_of_freedom(fit, kconst)
    bic = -2.0 * ll + np.log(X.shape[0]) * df
    record = BicRecord(n_components=n_components, alpha=alpha,
                       bandwidth=kernel_spec.bandwidth, loglik=ll, df=df,
                       bic=bic, converged=fit.converged)
    return record, fit


def contiguous_folds(z, n_folds):
    """Index folds contiguous in covariate order; they partition the data."""
    order = np.argsort(np.asarray(z, dtype=float), kind="stable")
    return [fold for fold in np.array_split(order, n_folds) if fold.size]


def _score_cell(args):
    (X, z, K, lam, h, kernel, grid, support_length, max_iter, tol, n_init,
     seed) = args
    spec = resolve_kernel(kernel, h)
    grid_points = resolve_grid(grid, z, h)
    record, _ = bic_score(
        X, z, n_components=K, alpha=lam, kernel_spec=spec,
        grid_points=grid_points, support_length=support_length,
        max_iter=max_iter, tol=tol, n_init=n_init, random_state=seed)
    return record


def _cv_bandwidth_score(X, z, K, lam, h, kernel, grid, folds, max_iter, tol,
                        n_init, seed):
    """Summed held-out log-likelihood over the folds; -inf on any failure."""
    spec = resolve_kernel(kernel, h)
    grid_points = resolve_grid(grid, z, h)
    total = 0.0
    for fold in folds:
        train = np.setdiff1d(np.arange(len(z)), fold)
        try:
            fit = em.fit_mixture(
                X[train], z[train], n_components=K, alpha=lam,
                kernel_spec=spec, grid_points=grid_points,
                max_iter=max_iter, tol=tol, n_init=n_init,
                random_state=seed)
        except (AllInitializationsFailed, AllWeightsZero):
            return -np.inf
        total += observed_loglik(X[fold], z[fold], fit)
    return total


def select(X, z, *, K_values, lambda_values, h_values, cv_folds=5,
           kernel="epanechnikov", grid=11, support_length=None, max_iter=200,
           tol=1e-5, n_init=5, random_state=None, threads=1):
    """Nested selection of component count, penalty, and bandwidth.

    Stage one picks the component count with the best score over all
    (penalty, bandwidth) pairs; stage two fixes it and picks the penalty
    by the best score over bandwidths; stage three fixes both and picks
    the bandwidth by cross-validated held-out log-likelihood on folds
    contiguous in covariate order.  Ties break toward fewer components,
    larger penalties, and larger bandwidths.
    """
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float)
    K_values = sorted(set(int(k) for k in K_values))
    lambda_values = sorted(set(float(v) for v in lambda_values))
    h_values = sorted(set(float(v) for v in h_values))
    if not K_values or not lambda_values or not h_values:
        raise EmptyGrid("K_values, lambda_values and h_values must be non-empty")

    cells = list(itertools.product(K_values, lambda_values, h_values))
    tasks = [(X, z, K, lam, h, kernel, grid, support_length, max_iter, tol,
              n_init, random_state) for K, lam, h in cells]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_score_cell, tasks))
    else:
        records = [_score_cell(t) for t in tasks]

    def best_bic(K=None, lam=None):
        chosen = [r for r in records
                  if (K is None or r.n_components == K)
                  and (lam is None or r.alpha == lam)]
        return min(r.bic for r in chosen)

    K_hat = K_values[0]
    best = np.inf
    for K in K_values:  # ascending: ties go to the smaller count
        score = best_bic(K=K)
        if score < best:
            best = score
            K_hat = K

    lam_hat = lambda_values[-1]
    best = np.inf
    for lam in reversed(lambda_values):  # descending: ties to larger penalty
        score = best_bic(K=K_hat, lam=lam)
        if score < best:
            best = score
            lam_hat = lam

    folds = contiguous_folds(z, cv_folds)
    cv_scores = []
    for h in h_values:
        cv_scores.append((h, _cv_bandwidth_score(
            X, z, K_hat, lam_hat, h, kernel, grid, folds, max_iter, tol,
            n_init, random_state)))
    h_hat = h_values[-1]
    best = -np.inf
    for h, score in reversed(cv_scores):  # descending: ties to larger h
        if score > best:
            best = score
            h_hat = h

    return SelectionResult(n_components=K_hat, alpha=lam_hat,
                           bandwidth=h_hat, records=records,
                           cv_scores=cv_scores)
