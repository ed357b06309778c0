"""Kernel-weighted EM for covariate-indexed mixtures of sparse Gaussian
graphical models, plus its three reduced forms (single mixture along the
covariate, covariate-free finite mixture, and the two-stage variant with
covariate-free graphs).

One design detail matters throughout: responsibilities are computed once
per iteration at the observed covariate values (with parameters linearly
interpolated between grid points), and every grid point's M-step consumes
that shared matrix.  Sharing the E-step is what keeps component labels
aligned across grid points.
"""

from dataclasses import dataclass, field

import numpy as np

from . import glasso, kernels, linalg
from .exceptions import (AllInitializationsFailed, AllWeightsZero,
                         DegenerateComponent, NotPositiveDefinite)

LOG_2PI = float(np.log(2.0 * np.pi))

# Component mass below this fraction of the local kernel mass freezes the
# component at that grid point for the iteration.
DEGENERATE_RTOL = 1e-12
# Consecutive frozen iterations after which a restart is abandoned.
MAX_FROZEN = 10
# Diagonal load applied when an interpolated precision loses definiteness.
INTERP_JITTER = 1e-8


class _RestartFailed(Exception):
    """Internal control flow: abandon the current random restart."""


def log_density(x, mu, theta):
    """Gaussian log-density at ``x`` parameterized by mean and precision."""
    return float(_log_density_rows(np.atleast_2d(x), np.asarray(mu, dtype=float),
                                   np.asarray(theta, dtype=float))[0])


def _log_density_rows(X, mu, theta, chol=None):
    """Log-densities of the rows of X under one (mu, theta); (N,) array."""
    L = linalg.cholesky(theta) if chol is None else chol
    half_logdet = float(np.sum(np.log(np.diag(L))))
    R = (X - mu) @ L
    q = np.einsum("ij,ij->i", R, R)
    return -0.5 * X.shape[1] * LOG_2PI + half_logdet - 0.5 * q


def _pd_repair(theta):
    """Reinstate definiteness lost to entrywise interpolation."""
    try:
        linalg.cholesky(theta)
        return theta
    except NotPositiveDefinite:
        pass
    eps = INTERP_JITTER * float(np.mean(np.diag(theta)))
    eye = np.eye(theta.shape[0])
    while True:
        theta = theta + eps * eye
        try:
            linalg.cholesky(theta)
            return theta
        except NotPositiveDefinite:
            eps *= 10.0


def _bracket(u, z):
    """Bracketing grid indexes and interpolation weight, clamped."""
    if z <= u[0]:
        return 0, 0, 0.0
    if z >= u[-1]:
        return len(u) - 1, len(u) - 1, 0.0
    g1 = int(np.searchsorted(u, z, side="right"))
    g0 = g1 - 1
    if u[g0] == z:
        return g0, g0, 0.0
    return g0, g1, (z - u[g0]) / (u[g1] - u[g0])


def interpolate_params(grid_points, pi, mu, theta, z):
    """Per-component parameters at covariate value ``z``.

    Entrywise linear interpolation between the bracketing grid points;
    ``z`` outside the grid clamps to the nearest endpoint.  Interpolated
    proportions are renormalized, interpolated precisions jitter-repaired
    if a Cholesky fails.
    """
    g0, g1, t = _bracket(grid_points, z)
    if g0 == g1:
        return pi[:, g0], mu[:, g0], theta[:, g0]
    pi_z = (1.0 - t) * pi[:, g0] + t * pi[:, g1]
    pi_z = pi_z / pi_z.sum()
    mu_z = (1.0 - t) * mu[:, g0] + t * mu[:, g1]
    th_z = (1.0 - t) * theta[:, g0] + t * theta[:, g1]
    th_z = np.stack([_pd_repair(th_z[k]) for k in range(th_z.shape[0])])
    return pi_z, mu_z, th_z


def interpolate_pi(grid_points, pi, z):
    """Interpolated mixing proportions only (renormalized)."""
    g0, g1, t = _bracket(grid_points, z)
    if g0 == g1:
        return pi[:, g0]
    v = (1.0 - t) * pi[:, g0] + t * pi[:, g1]
    return v / v.sum()


def component_log_likelihoods(X, z, grid_points, pi, mu, theta):
    """(N, K) matrix of ``log(pi_k(z_n) * phi_k(x_n))``.

    Parameters at each observation come from :func:`interpolate_params`;
    observations sharing a covariate value share one interpolation.  With
    ``grid_points`` None the model is covariate-free and column 0 of the
    parameter arrays applies everywhere.
    """
    N = X.shape[0]
    K = pi.shape[0]
    out = np.empty((N, K))
    if grid_points is None:
        groups = [(None, np.arange(N))]
    else:
        uz, inverse = np.unique(np.asarray(z, dtype=float), return_inverse=True)
        groups = [(uz[i], np.where(inverse == i)[0]) for i in range(len(uz))]
    for zval, rows in groups:
        if zval is None:
            pi_z, mu_z, th_z = pi[:, 0], mu[:, 0], theta[:, 0]
        else:
            pi_z, mu_z, th_z = interpolate_params(grid_points, pi, mu, theta, zval)
        Xg = X[rows]
        for k in range(K):
            lp = np.log(pi_z[k]) if pi_z[k] > 0 else -np.inf
            out[rows, k] = lp + _log_density_rows(Xg, mu_z[k], th_z[k])
    return out


def responsibilities_from_logs(log_lik):
    """Normalize per-component log-likelihoods into responsibilities.

    Returns the (N, K) responsibility matrix and the (N,) log-sum-exp of
    each row (the per-observation mixture log-likelihood).
    """
    m = np.max(log_lik, axis=1, keepdims=True)
    ex = np.exp(log_lik - m)
    s = ex.sum(axis=1, keepdims=True)
    gamma = ex / s
    return gamma, (m + np.log(s))[:, 0]


def e_step(X, z, grid_points, pi, mu, theta):
    """Posterior component probabilities for every observation."""
    log_lik = component_log_likelihoods(X, z, grid_points, pi, mu, theta)
    gamma, _ = responsibilities_from_logs(log_lik)
    return gamma


def m_step_pi(gamma, weights):
    """Kernel-weighted proportion update; sums to one exactly."""
    sw = float(weights.sum())
    if sw <= 0:
        raise AllWeightsZero("kernel mass is zero at this grid point")
    pi = gamma.T @ weights / sw
    return pi / pi.sum()


def m_step_mu(X, gamma_k, weights):
    """Responsibility- and kernel-weighted mean update."""
    c = gamma_k * weights
    a = float(c.sum())
    if a <= 0:
        raise DegenerateComponent("no responsibility mass at this grid point")
    return c @ X / a


def weighted_scatter(X, gamma_k, weights, mu_k):
    """Normalized weighted scatter around ``mu_k`` and its total mass."""
    c = gamma_k * weights
    a = float(c.sum())
    D = X - mu_k
    A = (D * c[:, np.newaxis]).T @ D / a
    return 0.5 * (A + A.T), a


def m_step_theta(X, gamma_k, weights, mu_k, base_lambda, warm_start=None,
                 kkt_tol=1e-9):
    """Sparse precision update: weighted scatter plus one penalized solve."""
    A, a = weighted_scatter(X, gamma_k, weights, mu_k)
    lam = glasso.effective_penalty(base_lambda, X.shape[0], a)
    return glasso.solve(A, lam, warm_start=warm_start, kkt_tol=kkt_tol)


def local_objective(X, weights, pi_g, mu_g, theta_g, base_lambda):
    """Penalized local log-likelihood at one grid point's parameters."""
    N, _ = X.shape
    K = pi_g.shape[0]
    log_lik = np.empty((N, K))
    pen = 0.0
    for k in range(K):
        lp = np.log(pi_g[k]) if pi_g[k] > 0 else -np.inf
        log_lik[:, k] = lp + _log_density_rows(X, mu_g[k], theta_g[k])
        pen += np.abs(theta_g[k]).sum() - np.abs(np.diag(theta_g[k])).sum()
    _, mix = responsibilities_from_logs(log_lik)
    return float(mix @ weights) / N - base_lambda * pen


@dataclass
class MixtureFit:
    """Fitted per-grid-point mixture parameters plus fit diagnostics.

    ``objective_trace[t, g]`` is the penalized local objective at grid
    point g after iteration t (t=0 is the initialization M-step); each
    column is non-decreasing up to statistical slack.
    """

    grid_points: np.ndarray          # (G,) or None for covariate-free fits
    pi: np.ndarray                   # (K, G)
    mu: np.ndarray                   # (K, G, p)
    theta: np.ndarray                # (K, G, p, p)
    gamma: np.ndarray                # (N, K), from the final E-step
    objective_trace: np.ndarray      # (n_iter + 1, G)
    converged: bool
    n_iter: int
    solutions: list = field(repr=False, default=None)  # K x G GlassoSolution

    @property
    def n_components(self):
        return self.pi.shape[0]

    @property
    def mean_objective(self):
        return float(np.mean(self.objective_trace[-1]))

    @property
    def covariances(self):
        K, G = self.pi.shape
        p = self.mu.shape[2]
        out = np.empty((K, G, p, p))
        for k in range(K):
            for g in range(G):
                out[k, g] = self.solutions[k][g].w
        return out

    def params_at(self, z):
        """Interpolated (pi, mu, theta) at a covariate value."""
        if self.grid_points is None:
            return self.pi[:, 0], self.mu[:, 0], self.theta[:, 0]
        return interpolate_params(self.grid_points, self.pi, self.mu,
                                  self.theta, z)


class _State:
    """Parameters and solver state carried between EM iterations."""

    __slots__ = ("pi", "mu", "theta", "solutions")

    def __init__(self, pi, mu, theta, solutions):
        self.pi = pi
        self.mu = mu
        self.theta = theta
        self.solutions = solutions


def _m_step(X, weight_rows, gamma, base_lambda, prev, frozen, kkt_tol):
    """M-step across all grid points given shared responsibilities.

    ``weight_rows`` is the (G, N) kernel weight matrix.  Components whose
    local mass vanishes keep their previous parameters for the iteration;
    a component frozen MAX_FROZEN times in a row, or degenerate when there
    is nothing to freeze to, abandons the restart.
    """
    G, N = weight_rows.shape
    K = gamma.shape[1]
    p = X.shape[1]
    pi = np.empty((K, G))
    mu = np.empty((K, G, p))
    theta = np.empty((K, G, p, p))
    solutions = [[None] * G for _ in range(K)]
    for g in range(G):
        w = weight_rows[g]
        sw = float(w.sum())
        pi[:, g] = m_step_pi(gamma, w)
        for k in range(K):
            a = float((gamma[:, k] * w).sum())
            if a < DEGENERATE_RTOL * sw or a <= 1e-12:
                if prev is None:
                    raise _RestartFailed(
                        f"component {k} degenerate at grid point {g} during "
                        "initialization")
                frozen[k, g] += 1
                if frozen[k, g] >= MAX_FROZEN:
                    raise _RestartFailed(
                        f"component {k} frozen {MAX_FROZEN} iterations at "
                        f"grid point {g}")
                mu[k, g] = prev.mu[k, g]
                theta[k, g] = prev.theta[k, g]
                solutions[k][g] = prev.solutions[k][g]
                continue
            frozen[k, g] = 0
            mu[k, g] = m_step_mu(X, gamma[:, k], w)
            warm = prev.solutions[k][g] if prev is not None else None
            sol = m_step_theta(X, gamma[:, k], w, mu[k, g], base_lambda,
                               warm_start=warm, kkt_tol=kkt_tol)
            solutions[k][g] = sol
            theta[k, g] = sol.theta
    return _State(pi, mu, theta, solutions)


def _objective_row(X, weight_rows, state, base_lambda):
    return np.array([
        local_objective(X, weight_rows[g], state.pi[:, g], state.mu[:, g],
                        state.theta[:, g], base_lambda)
        for g in range(weight_rows.shape[0])
    ])


def _run_restart(X, z, grid_points, weight_rows, n_components, base_lambda,
                 max_iter, tol, rng, kkt_tol, init_state=None):
    N = X.shape[0]
    frozen = np.zeros((n_components, weight_rows.shape[0]), dtype=int)
    if init_state is None:
        gamma = rng.dirichlet(np.ones(n_components), size=N)
        state = _m_step(X, weight_rows, gamma, base_lambda, None, frozen,
                        kkt_tol)
    else:
        state = init_state
        gamma = None
    trace = [_objective_row(X, weight_rows, state, base_lambda)]
    converged = False
    n_iter = 0
    for _ in range(max_iter):
        gamma = e_step(X, z, grid_points, state.pi, state.mu, state.theta)
        state = _m_step(X, weight_rows, gamma, base_lambda, state, frozen,
                        kkt_tol)
        trace.append(_objective_row(X, weight_rows, state, base_lambda))
        n_iter += 1
        prev_row, new_row = trace[-2], trace[-1]
        rel = np.abs(new_row - prev_row) / np.maximum(np.abs(prev_row), 1e-10)
        if float(rel.mean()) <= tol:
            converged = True
            break
    return MixtureFit(grid_points=grid_points, pi=state.pi, mu=state.mu,
                      theta=state.theta, gamma=gamma,
                      objective_trace=np.asarray(trace), converged=converged,
                      n_iter=n_iter, solutions=state.solutions)


def _state_from_params(pi, mu, theta):
    """Wrap plain parameter arrays (e.g. a persisted model) as a state."""
    K, G = pi.shape
    solutions = [[None] * G for _ in range(K)]
    for k in range(K):
        for g in range(G):
            th = theta[k, g]
            solutions[k][g] = glasso.GlassoSolution(
                theta=th, w=linalg.invert_spd(th), iterations=0,
                kkt_residual=np.inf, certified=False)
    return _State(np.asarray(pi, dtype=float), np.asarray(mu, dtype=float),
                  np.asarray(theta, dtype=float), solutions)


def fit_mixture(X, z, *, n_components, alpha, kernel_spec, grid_points,
                max_iter=200, tol=1e-5, n_init=5, random_state=None,
                kkt_tol=1e-9, init_params=None):
    """Fit the covariate-indexed mixture by kernel-weighted EM.

    Each restart draws per-observation responsibilities from a symmetric
    Dirichlet, materializes parameters with one M-step, then alternates a
    shared E-step with per-grid-point M-steps.  The restart with the best
    final mean objective wins; identical seeds give identical results.

    ``init_params`` (a (pi, mu, theta) triple on the same grid, e.g. a
    persisted model) replaces the random restarts with a single warm run.

    Raises
    ------
    AllInitializationsFailed
        If every restart degenerated.
    """
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float)
    grid_points = np.asarray(grid_points, dtype=float)
    weight_rows = np.stack(
        [kernels.weights_at(kernel_spec, z, u) for u in grid_points])

    if init_params is not None:
        state = _state_from_params(*init_params)
        try:
            return _run_restart(X, z, grid_points, weight_rows, n_components,
                                alpha, max_iter, tol, None, kkt_tol,
                                init_state=state)
        except _RestartFailed as exc:
            raise AllInitializationsFailed(str(exc)) from exc

    best = None
    for seed_seq in np.random.SeedSequence(random_state).spawn(n_init):
        rng = np.random.default_rng(seed_seq)
        try:
            fit = _run_restart(X, z, grid_points, weight_rows, n_components,
                               alpha, max_iter, tol, rng, kkt_tol)
        except _RestartFailed:
            continue
        if best is None or fit.mean_objective > best.mean_objective:
            best = fit
    if best is None:
        raise AllInitializationsFailed(
            f"all {n_init} restarts hit a degenerate component")
    return best


def fit_time_varying(X, z, *, alpha, kernel_spec, grid_points):
    """Single-graph special case: one penalized solve per grid point.

    Returns the (G,) list of GlassoSolution plus the (G, p) kernel-weighted
    means.  No EM loop is involved.
    """
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float)
    grid_points = np.asarray(grid_points, dtype=float)
    N, p = X.shape
    ones = np.ones(N)
    solutions = []
    means = np.empty((len(grid_points), p))
    for g, u in enumerate(grid_points):
        w = kernels.weights_at(kernel_spec, z, u)
        means[g] = m_step_mu(X, ones, w)
        solutions.append(m_step_theta(X, ones, w, means[g], alpha))
    return solutions, means


def fit_finite_mixture(X, *, n_components, alpha, max_iter=200, tol=1e-5,
                       n_init=5, random_state=None, kkt_tol=1e-9):
    """Covariate-free mixture: EM with unit weights at a single pseudo grid
    point.  The ascent property holds exactly here (no smoothing slack)."""
    X = np.asarray(X, dtype=float)
    weight_rows = np.ones((1, X.shape[0]))
    best = None
    for seed_seq in np.random.SeedSequence(random_state).spawn(n_init):
        rng = np.random.default_rng(seed_seq)
        try:
            fit = _run_restart(X, None, None, weight_rows, n_components,
                               alpha, max_iter, tol, rng, kkt_tol)
        except _RestartFailed:
            continue
        if best is None or fit.mean_objective > best.mean_objective:
            best = fit
    if best is None:
        raise AllInitializationsFailed(
            f"all {n_init} restarts hit a degenerate component")
    return best


def _semiparam_log_lik(X, z, grid_points, pi, mu_g, theta_g):
    """(N, K) ``log(pi_k(z_n) * phi_k(x_n))`` with covariate-free graphs."""
    N = X.shape[0]
    K = pi.shape[0]
    dens = np.stack([_log_density_rows(X, mu_g[k], theta_g[k])
                     for k in range(K)], axis=1)
    logpi = np.empty((N, K))
    uz, inverse = np.unique(np.asarray(z, dtype=float), return_inverse=True)
    with np.errstate(divide="ignore"):
        for i, zval in enumerate(uz):
            logpi[inverse == i] = np.log(interpolate_pi(grid_points, pi, zval))
    return logpi + dens


def _global_m_step(X, gamma, base_lambda, prev_solutions, kkt_tol):
    """Pooled mean/precision updates shared by both two-stage phases."""
    N, p = X.shape
    K = gamma.shape[1]
    ones = np.ones(N)
    mu_g = np.empty((K, p))
    theta_g = np.empty((K, p, p))
    solutions = [None] * K
    for k in range(K):
        a = float(gamma[:, k].sum())
        if a <= 1e-12:
            raise _RestartFailed(f"component {k} degenerate in pooled update")
        mu_g[k] = m_step_mu(X, gamma[:, k], ones)
        warm = prev_solutions[k] if prev_solutions is not None else None
        sol = m_step_theta(X, gamma[:, k], ones, mu_g[k], base_lambda,
                           warm_start=warm, kkt_tol=kkt_tol)
        solutions[k] = sol
        theta_g[k] = sol.theta
    return mu_g, theta_g, solutions


def _run_semiparam_restart(X, z, grid_points, weight_rows, n_components,
                           base_lambda, max_iter, tol, rng, kkt_tol):
    """Stage one of the two-stage fit: local proportions, global graphs."""
    N = X.shape[0]
    G = weight_rows.shape[0]
    gamma = rng.dirichlet(np.ones(n_components), size=N)
    mu_g, theta_g, solutions = _global_m_step(X, gamma, base_lambda, None,
                                              kkt_tol)
    pi = np.stack([m_step_pi(gamma, weight_rows[g]) for g in range(G)], axis=1)
    trace = [np.array([
        local_objective(X, weight_rows[g], pi[:, g], mu_g, theta_g,
                        base_lambda) for g in range(G)])]
    converged = False
    n_iter = 0
    for _ in range(max_iter):
        log_lik = _semiparam_log_lik(X, z, grid_points, pi, mu_g, theta_g)
        gamma, _ = responsibilities_from_logs(log_lik)
        mu_g, theta_g, solutions = _global_m_step(X, gamma, base_lambda,
                                                  solutions, kkt_tol)
        pi = np.stack([m_step_pi(gamma, weight_rows[g]) for g in range(G)],
                      axis=1)
        trace.append(np.array([
            local_objective(X, weight_rows[g], pi[:, g], mu_g, theta_g,
                            base_lambda) for g in range(G)]))
        n_iter += 1
        prev_row, new_row = trace[-2], trace[-1]
        rel = np.abs(new_row - prev_row) / np.maximum(np.abs(prev_row), 1e-10)
        if float(rel.mean()) <= tol:
            converged = True
            break
    return pi, mu_g, theta_g, solutions, gamma, np.asarray(trace), converged, n_iter


def fit_semiparametric(X, z, *, n_components, alpha, kernel_spec, grid_points,
                       max_iter=200, tol=1e-5, n_init=5, random_state=None,
                       kkt_tol=1e-9):
    """Two-stage fit for mixtures whose graphs do not vary with the covariate.

    Stage one estimates the per-grid-point mixing proportions with the
    component means/precisions shared across grid points.  Stage two
    freezes the interpolated proportions at the observed covariates and
    refines the pooled means and precisions.
    """
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float)
    grid_points = np.asarray(grid_points, dtype=float)
    N, p = X.shape
    K = n_components
    weight_rows = np.stack(
        [kernels.weights_at(kernel_spec, z, u) for u in grid_points])

    best = None
    for seed_seq in np.random.SeedSequence(random_state).spawn(n_init):
        rng = np.random.default_rng(seed_seq)
        try:
            result = _run_semiparam_restart(X, z, grid_points, weight_rows, K,
                                            alpha, max_iter, tol, rng, kkt_tol)
        except _RestartFailed:
            continue
        if best is None or float(result[5][-1].mean()) > float(best[5][-1].mean()):
            best = result
    if best is None:
        raise AllInitializationsFailed(
            f"all {n_init} restarts hit a degenerate component")
    pi, mu_g, theta_g, solutions, gamma, _, _, stage1_iters = best

    # stage two: proportions frozen at the observed covariates
    logpi = np.empty((N, K))
    uz, inverse = np.unique(z, return_inverse=True)
    with np.errstate(divide="ignore"):
        for i, zval in enumerate(uz):
            logpi[inverse == i] = np.log(interpolate_pi(grid_points, pi, zval))

    def stage2_objective(mu_g, theta_g):
        dens = np.stack([_log_density_rows(X, mu_g[k], theta_g[k])
                         for k in range(K)], axis=1)
        _, mix = responsibilities_from_logs(logpi + dens)
        pen = sum(np.abs(theta_g[k]).sum() - np.abs(np.diag(theta_g[k])).sum()
                  for k in range(K))
        return float(mix.mean()) - alpha * pen

    trace = [stage2_objective(mu_g, theta_g)]
    converged = False
    n_iter = 0
    for _ in range(max_iter):
        dens = np.stack([_log_density_rows(X, mu_g[k], theta_g[k])
                         for k in range(K)], axis=1)
        gamma, _ = responsibilities_from_logs(logpi + dens)
        mu_g, theta_g, solutions = _global_m_step(X, gamma, alpha, solutions,
                                                  kkt_tol)
        trace.append(stage2_objective(mu_g, theta_g))
        n_iter += 1
        rel = abs(trace[-1] - trace[-2]) / max(abs(trace[-2]), 1e-10)
        if rel <= tol:
            converged = True
            break

    G = len(grid_points)
    mu = np.repeat(mu_g[:, np.newaxis], G, axis=1)
    theta = np.repeat(theta_g[:, np.newaxis], G, axis=1)
    sol_grid = [[solutions[k]] * G for k in range(K)]
    return MixtureFit(grid_points=grid_points, pi=pi, mu=mu, theta=theta,
                      gamma=gamma, objective_trace=np.asarray(trace)[:, None],
                      converged=converged, n_iter=stage1_iters + n_iter,
                      solutions=sol_grid)
