"""Scikit-learn style estimators wrapping the fitting routines.

All estimators follow the usual conventions: hyperparameters in
``__init__`` (handled by ``BaseEstimator.get_params``/``set_params``),
fitted state in trailing-underscore attributes, ``fit`` returns ``self``.
The covariate enters as a second positional argument to ``fit``.
"""

import numpy as np
from sklearn.base import BaseEstimator

from . import em
from .validation import check_X_z, resolve_grid, resolve_kernel


class MixtureGraphicalLasso(BaseEstimator):
    """Covariate-indexed mixture of sparse Gaussian graphical models.

    Parameters
    ----------
    n_components : int
        Number of mixture components.
    alpha : float
        Off-diagonal l1 penalty on the precision matrices.
    kernel : {'epanechnikov', 'gaussian'}
        Smoothing kernel family.
    bandwidth : float
        Kernel bandwidth, in covariate units.
    grid : int or array-like
        Number of equally spaced grid points over the covariate range, or
        explicit strictly increasing grid points.
    max_iter : int
        Iteration cap for each EM restart.
    tol : float
        Mean relative change of the per-grid-point objective below which
        a restart stops.
    n_init : int
        Number of random restarts; the best final objective wins.
    random_state : int or None
        Seed; identical seeds give identical fits.

    Attributes
    ----------
    grid_points_ : ndarray, shape (G,)
    weights_ : ndarray, shape (K, G)
        Mixing proportions at each grid point.
    means_ : ndarray, shape (K, G, p)
    precisions_ : ndarray, shape (K, G, p, p)
        Sparse precision estimates; off-diagonal zeros are exact.
    covariances_ : ndarray, shape (K, G, p, p)
    responsibilities_ : ndarray, shape (n, K)
    objective_trace_ : ndarray, shape (n_iter_ + 1, G)
    converged_ : bool
    n_iter_ : int
    """

    def __init__(self, n_components=2, alpha=0.1, kernel="epanechnikov",
                 bandwidth=0.5, grid=11, max_iter=200, tol=1e-5, n_init=5,
                 random_state=None):
        self.n_components = n_components
        self.alpha = alpha
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.grid = grid
        self.max_iter = max_iter
        self.tol = tol
        self.n_init = n_init
        self.random_state = random_state

    def fit(self, X, z):
        """Fit the mixture to observations ``X`` indexed by covariate ``z``."""
        X, z = check_X_z(X, z)
        spec = resolve_kernel(self.kernel, self.bandwidth)
        grid_points = resolve_grid(self.grid, z, spec.bandwidth)
        fit = em.fit_mixture(
            X, z, n_components=self.n_components, alpha=self.alpha,
            kernel_spec=spec, grid_points=grid_points,
            max_iter=self.max_iter, tol=self.tol, n_init=self.n_init,
            random_state=self.random_state)
        self._store(fit)
        return self

    def _store(self, fit):
        self.fit_result_ = fit
        self.grid_points_ = fit.grid_points
        self.weights_ = fit.pi
        self.means_ = fit.mu
        self.precisions_ = fit.theta
        self.covariances_ = fit.covariances
        self.responsibilities_ = fit.gamma
        self.objective_trace_ = fit.objective_trace
        self.converged_ = fit.converged
        self.n_iter_ = fit.n_iter

    def params_at(self, z):
        """Interpolated (proportions, means, precisions) at one covariate."""
        return em.interpolate_params(self.grid_points_, self.weights_,
                                     self.means_, self.precisions_, float(z))

    def predict_proba(self, X, z):
        """Posterior component probabilities, shape (n, K)."""
        X, z = check_X_z(X, z)
        return em.e_step(X, z, self.grid_points_, self.weights_, self.means_,
                         self.precisions_)

    def predict(self, X, z):
        """Most probable component index per observation."""
        return np.argmax(self.predict_proba(X, z), axis=1)

    def score(self, X, z):
        """Average observed log-likelihood of the data."""
        X, z = check_X_z(X, z)
        log_lik = em.component_log_likelihoods(
            X, z, self.grid_points_, self.weights_, self.means_,
            self.precisions_)
        _, mix = em.responsibilities_from_logs(log_lik)
        return float(mix.mean())


class TimeVaryingGraphicalLasso(BaseEstimator):
    """Single covariate-indexed sparse graph (one-component special case).

    No EM loop: each grid point takes a kernel-weighted mean and scatter
    followed by one penalized solve.
    """

    def __init__(self, alpha=0.1, kernel="epanechnikov", bandwidth=0.5,
                 grid=11):
        self.alpha = alpha
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.grid = grid

    def fit(self, X, z):
        X, z = check_X_z(X, z)
        spec = resolve_kernel(self.kernel, self.bandwidth)
        grid_points = resolve_grid(self.grid, z, spec.bandwidth)
        solutions, means = em.fit_time_varying(
            X, z, alpha=self.alpha, kernel_spec=spec, grid_points=grid_points)
        self.grid_points_ = grid_points
        self.solutions_ = solutions
        self.means_ = means
        self.precisions_ = np.stack([s.theta for s in solutions])
        self.covariances_ = np.stack([s.w for s in solutions])
        return self


class FiniteMixtureGraphicalLasso(BaseEstimator):
    """Covariate-free mixture of sparse Gaussian graphical models."""

    def __init__(self, n_components=2, alpha=0.1, max_iter=200, tol=1e-5,
                 n_init=5, random_state=None):
        self.n_components = n_components
        self.alpha = alpha
        self.max_iter = max_iter
        self.tol = tol
        self.n_init = n_init
        self.random_state = random_state

    def fit(self, X, y=None):
        X, _ = check_X_z(X)
        fit = em.fit_finite_mixture(
            X, n_components=self.n_components, alpha=self.alpha,
            max_iter=self.max_iter, tol=self.tol, n_init=self.n_init,
            random_state=self.random_state)
        self.fit_result_ = fit
        self.weights_ = fit.pi[:, 0]
        self.means_ = fit.mu[:, 0]
        self.precisions_ = fit.theta[:, 0]
        self.covariances_ = fit.covariances[:, 0]
        self.responsibilities_ = fit.gamma
        self.objective_trace_ = fit.objective_trace[:, 0]
        self.converged_ = fit.converged
        self.n_iter_ = fit.n_iter
        return self

    def predict_proba(self, X):
        X, _ = check_X_z(X)
        return em.e_step(X, None, None, self.weights_[:, np.newaxis],
                         self.means_[:, np.newaxis],
                         self.precisions_[:, np.newaxis])

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def score(self, X, y=None):
        X, _ = check_X_z(X)
        log_lik = em.component_log_likelihoods(
            X, None, None, self.weights_[:, np.newaxis],
            self.means_[:, np.newaxis], self.precisions_[:, np.newaxis])
        _, mix = em.responsibilities_from_logs(log_lik)
        return float(mix.mean())


class SemiparametricMixtureGraphicalLasso(BaseEstimator):
    """Mixture with covariate-dependent proportions but fixed graphs."""

    def __init__(self, n_components=2, alpha=0.1, kernel="epanechnikov",
                 bandwidth=0.5, grid=11, max_iter=200, tol=1e-5, n_init=5,
                 random_state=None):
        self.n_components = n_components
        self.alpha = alpha
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.grid = grid
        self.max_iter = max_iter
        self.tol = tol
        self.n_init = n_init
        self.random_state = random_state

    def fit(self, X, z):
        X, z = check_X_z(X, z)
        spec = resolve_kernel(self.kernel, self.bandwidth)
        grid_points = resolve_grid(self.grid, z, spec.bandwidth)
        fit = em.fit_semiparametric(
            X, z, n_components=self.n_components, alpha=self.alpha,
            kernel_spec=spec, grid_points=grid_points,
            max_iter=self.max_iter, tol=self.tol, n_init=self.n_init,
            random_state=self.random_state)
        self.fit_result_ = fit
        self.grid_points_ = fit.grid_points
        self.weights_ = fit.pi
        self.means_ = fit.mu[:, 0]
        self.precisions_ = fit.theta[:, 0]
        self.responsibilities_ = fit.gamma
        self.objective_trace_ = fit.objective_trace[:, 0]
        self.converged_ = fit.converged
        self.n_iter_ = fit.n_iter
        return self
