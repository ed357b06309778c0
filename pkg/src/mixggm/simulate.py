"""Synthetic-data generators with known ground truth.

Two scenario families are provided: a mixture of an AR-structured graph
and a two-block-diagonal graph whose edge sets only grow along the
covariate, and a mixture of an AR graph and a random sparse graph where
each step both adds and removes edges (constant edge count).  Edge values
follow piecewise-linear ramps so the true precision paths change smoothly
while edge sets change by exactly the scripted events.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .exceptions import NotEnoughEdges

# Minimum eigenvalue enforced on every generated precision matrix.
MIN_EIGENVALUE = 0.01


def mixing_proportions(z):
    """Two-component logistic mixing proportions, vectorized over z."""
    p1 = 1.0 / (1.0 + np.exp(-0.5 * np.asarray(z, dtype=float)))
    return p1, 1.0 - p1


def ar1_covariance(p, rho=0.4):
    """AR(1) covariance ``rho**|i-j|`` and its exact tridiagonal precision."""
    if not abs(rho) < 1:
        raise ValueError("need |rho| < 1")
    idx = np.arange(p)
    sigma = rho ** np.abs(idx[:, None] - idx[None, :])
    theta = np.zeros((p, p))
    c = 1.0 / (1.0 - rho * rho)
    np.fill_diagonal(theta, (1.0 + rho * rho) * c)
    if p >= 1:
        theta[0, 0] = c
        theta[p - 1, p - 1] = c
    for i in range(p - 1):
        theta[i, i + 1] = theta[i + 1, i] = -rho * c
    return sigma, theta


def pd_floor(theta, min_eig=MIN_EIGENVALUE):
    """Uniformly raise the diagonal until the smallest eigenvalue is
    at least ``min_eig``; edge pattern is untouched."""
    w = np.linalg.eigvalsh(theta)
    lift = min_eig - float(w[0])
    if lift > 0:
        theta = theta + lift * np.eye(theta.shape[0])
    return theta


def block_diagonal_precision(p, edges_per_block=None, rng=None,
                             value_range=(-0.2, -0.1), diagonal=0.25):
    """Two-equal-block precision with randomly placed within-block edges.

    Edge counts follow the reference sizes at p in {50, 100} and scale as
    ``ceil(p/2)`` per block otherwise.  The result is floored to be
    positive definite.
    """
    rng = np.random.default_rng(rng)
    if edges_per_block is None:
        edges_per_block = {50: 25, 100: 50}.get(p, int(np.ceil(p / 2)))
    half = p // 2
    blocks = [(0, half), (half, p)]
    theta = np.zeros((p, p))
    np.fill_diagonal(theta, diagonal)
    for lo, hi in blocks:
        cand = [(i, j) for i in range(lo, hi) for j in range(i + 1, hi)]
        take = min(edges_per_block, len(cand))
        chosen = rng.choice(len(cand), size=take, replace=False)
        for c in chosen:
            i, j = cand[c]
            v = rng.uniform(*value_range)
            theta[i, j] = theta[j, i] = v
    return pd_floor(theta)


def random_sparse_precision(p, n_edges=None, rng=None,
                            value_range=(-0.25, -0.22), diagonal=0.25):
    """Random sparse precision: fixed diagonal, negative off-diagonals.

    Edge counts follow the reference sizes at p in {50, 100} and scale as
    ``ceil(1.1 p)`` otherwise.
    """
    rng = np.random.default_rng(rng)
    if n_edges is None:
        n_edges = {50: 55, 100: 100}.get(p, int(np.ceil(1.1 * p)))
    cand = [(i, j) for i in range(p) for j in range(i + 1, p)]
    theta = np.zeros((p, p))
    np.fill_diagonal(theta, diagonal)
    chosen = rng.choice(len(cand), size=min(n_edges, len(cand)), replace=False)
    for c in chosen:
        i, j = cand[c]
        v = rng.uniform(*value_range)
        theta[i, j] = theta[j, i] = v
    return pd_floor(theta)


@dataclass
class EdgeEvent:
    """One scripted edge: appears at grid index ``appear`` (0 = present from
    the start), vanishes at grid index ``vanish`` (None = never)."""

    i: int
    j: int
    value: float
    appear: int = 0
    vanish: int = None


def _edge_profile(event, n_grid):
    """Piecewise-linear value of one edge at every grid index."""
    g = np.arange(n_grid, dtype=float)
    a, v = event.appear, event.vanish
    if a == 0 and v is None:
        vals = np.full(n_grid, event.value)
    elif a == 0:
        vals = event.value * np.clip((v - g) / v, 0.0, None)
    elif v is None:
        vals = event.value * np.clip((g - (a - 1)) / (n_grid - a), 0.0, None)
    else:
        mid = 0.5 * (a - 1 + v)
        up = (g - (a - 1)) / (mid - (a - 1))
        down = (v - g) / (v - mid)
        vals = event.value * np.clip(np.minimum(up, down), 0.0, None)
    # exact zeros outside the presence interval
    vals[g < a] = 0.0
    if v is not None:
        vals[g >= v] = 0.0
    return vals


def evolve_edges(base_theta, events, n_grid):
    """Materialize one precision path from a base matrix and edge events.

    The base matrix contributes the diagonal and any edges not mentioned
    in ``events``; every grid point is floored to positive definiteness
    (diagonal lift only, so edge sets are preserved).
    """
    p = base_theta.shape[0]
    path = np.repeat(base_theta[np.newaxis], n_grid, axis=0).copy()
    for ev in events:
        vals = _edge_profile(ev, n_grid)
        path[:, ev.i, ev.j] = vals
        path[:, ev.j, ev.i] = vals
    for g in range(n_grid):
        path[g] = pd_floor(path[g])
    return path


def _base_events(theta):
    """EdgeEvent list for the edges already present in a base matrix."""
    p = theta.shape[0]
    return [EdgeEvent(i, j, theta[i, j]) for i in range(p)
            for j in range(i + 1, p) if theta[i, j] != 0.0]


def _schedule_events(base_theta, n_grid, rng, add_specs, n_remove):
    """Draw per-step additions/removals; returns the full event list.

    ``add_specs`` is a list of (count per step, candidate positions,
    value range) triples, one per independent candidate pool (e.g. one
    per block).  A pool that runs out simply adds fewer.  Removals are
    drawn from the edges active before the step; removed positions are
    never reused.  Raises NotEnoughEdges when a step asks to remove more
    edges than are active.
    """
    events = _base_events(base_theta)
    used = {(e.i, e.j) for e in events}
    pools = [([pos for pos in cand if pos not in used], n, rng_range)
             for n, cand, rng_range in add_specs]
    for step in range(1, n_grid):
        for pool, n_add, value_range in pools:
            take = min(n_add, len(pool))
            if not take:
                continue
            chosen = rng.choice(len(pool), size=take, replace=False)
            for c in sorted(chosen, reverse=True):
                i, j = pool[c]
                events.append(EdgeEvent(i, j, rng.uniform(*value_range),
                                        appear=step))
                del pool[c]
        if n_remove:
            active = [e for e in events if e.vanish is None and e.appear < step]
            if len(active) < n_remove:
                raise NotEnoughEdges(
                    f"step {step}: asked to remove {n_remove} of "
                    f"{len(active)} active edges")
            chosen = rng.choice(len(active), size=n_remove, replace=False)
            for c in chosen:
                active[c].vanish = step
    return events


@dataclass
class Scenario:
    """A fully materialized generative truth over a covariate grid."""

    name: str
    grid_points: np.ndarray       # (G,)
    pi: np.ndarray                # (K, G)
    mu: np.ndarray                # (K, G, p)
    theta: np.ndarray             # (K, G, p, p)
    n_per_point: int
    seed: int
    params: dict = field(default_factory=dict)

    @property
    def n_components(self):
        return self.pi.shape[0]

    @property
    def n_features(self):
        return self.mu.shape[2]


def _per_step_count(p):
    return {50: 5, 100: 20}.get(p, max(1, round(p / 5)))


def _two_component_frame(p, n_grid):
    grid = np.linspace(0.0, 1.0, n_grid)
    p1, p2 = mixing_proportions(grid)
    pi = np.stack([p1, p2])
    mu = np.zeros((2, n_grid, p))
    return grid, pi, mu


def ar_block_scenario(p=10, n_grid=11, n_per_point=50, seed=0):
    """Growing-edge mixture: AR graph gaining second-off-diagonal edges,
    block-diagonal graph gaining within-block edges."""
    rng = np.random.default_rng(seed)
    grid, pi, mu = _two_component_frame(p, n_grid)
    n_add = _per_step_count(p)

    _, theta1 = ar1_covariance(p)
    ar2_pos = [(i, i + 2) for i in range(p - 2)]
    ev1 = _schedule_events(theta1, n_grid, rng,
                           [(n_add, ar2_pos, (-0.2, -0.1))], 0)
    path1 = evolve_edges(np.diag(np.diag(theta1)), ev1, n_grid)

    theta2 = block_diagonal_precision(p, rng=rng)
    half = p // 2
    specs = [(n_add,
              [(i, j) for i in range(lo, hi) for j in range(i + 1, hi)],
              (-0.2, -0.1))
             for lo, hi in ((0, half), (half, p))]
    ev2 = _schedule_events(theta2, n_grid, rng, specs, 0)
    path2 = evolve_edges(np.diag(np.diag(theta2)), ev2, n_grid)

    theta = np.stack([path1, path2])
    return Scenario(name="ar_block", grid_points=grid, pi=pi, mu=mu,
                    theta=theta, n_per_point=n_per_point, seed=seed,
                    params={"preset": "ar_block", "p": p, "n_grid": n_grid,
                            "n_per_point": n_per_point, "seed": seed})


def ar_random_sparse_scenario(p=10, n_grid=11, n_per_point=50, seed=0):
    """Constant-edge-count mixture: both graphs add and remove the same
    number of edges at every step."""
    rng = np.random.default_rng(seed)
    grid, pi, mu = _two_component_frame(p, n_grid)
    n_step = _per_step_count(p)
    anywhere = [(i, j) for i in range(p) for j in range(i + 1, p)]

    _, theta1 = ar1_covariance(p)
    ev1 = _schedule_events(theta1, n_grid, rng,
                           [(n_step, anywhere, (-0.25, -0.22))], n_step)
    path1 = evolve_edges(np.diag(np.diag(theta1)), ev1, n_grid)

    theta2 = random_sparse_precision(p, rng=rng)
    ev2 = _schedule_events(theta2, n_grid, rng,
                           [(n_step, anywhere, (-0.25, -0.22))], n_step)
    path2 = evolve_edges(np.diag(np.diag(theta2)), ev2, n_grid)

    theta = np.stack([path1, path2])
    return Scenario(name="ar_random_sparse", grid_points=grid, pi=pi, mu=mu,
                    theta=theta, n_per_point=n_per_point, seed=seed,
                    params={"preset": "ar_random_sparse", "p": p,
                            "n_grid": n_grid, "n_per_point": n_per_point,
                            "seed": seed})


PRESETS = {
    "ar_block": ar_block_scenario,
    "ar_random_sparse": ar_random_sparse_scenario,
}


def scenario_from_params(params):
    """Rebuild a scenario from its serialized recipe."""
    params = dict(params)
    preset = params.pop("preset")
    if preset not in PRESETS:
        raise ValueError(f"unknown scenario preset {preset!r}")
    return PRESETS[preset](**params)


def sample(scenario, seed=None):
    """Draw one dataset from a scenario's true model.

    At every grid point ``n_per_point`` observations are drawn: a
    component from the local mixing proportions, then a Gaussian vector
    through the Cholesky factor of that component's covariance.  Returns
    (X, z, labels); labels are for evaluation only.
    """
    rng = np.random.default_rng(scenario.seed if seed is None else seed)
    K = scenario.n_components
    p = scenario.n_features
    G = len(scenario.grid_points)
    n = scenario.n_per_point
    chol = np.empty((K, G, p, p))
    for k in range(K):
        for g in range(G):
            chol[k, g] = linalg.cholesky(linalg.invert_spd(scenario.theta[k, g]))
    X = np.empty((G * n, p))
    z = np.empty(G * n)
    labels = np.empty(G * n, dtype=int)
    row = 0
    for g, u in enumerate(scenario.grid_points):
        comps = rng.choice(K, size=n, p=scenario.pi[:, g])
        noise = rng.standard_normal((n, p))
        for i in range(n):
            k = comps[i]
            X[row] = scenario.mu[k, g] + chol[k, g] @ noise[i]
            z[row] = u
            labels[row] = k
            row += 1
    return X, z, labels
