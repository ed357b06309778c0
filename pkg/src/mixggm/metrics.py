"""Evaluation metrics comparing fitted mixtures against a known truth.

Estimated components are matched to true components by one global
permutation over all grid points jointly; per-grid matching would mask
exactly the label drift the shared E-step is supposed to prevent.  Edge
recovery counts treat an estimated entry as nonzero only when it is
exactly nonzero (the solver produces exact zeros, so any threshold would
just hide solver defects).
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import linalg
from .exceptions import DimensionMismatch


@dataclass
class EvalReport:
    """The six losses plus the label alignment used to compute them.

    ``rase_pi`` is the root of the displayed mean squared proportion
    error ``rase_pi_sq``; both are kept.
    """

    asl: float
    afl: float
    akl: float
    rase_pi: float
    rase_pi_sq: float
    atpr: float
    afpr: float
    alignment: tuple


def _check_shapes(est_theta, true_theta):
    if est_theta.shape != true_theta.shape:
        raise DimensionMismatch(
            f"estimate {est_theta.shape} vs truth {true_theta.shape}")


def align_labels(est_theta, true_theta):
    """Permutation matching estimated components to true components.

    Returns ``perm`` with ``perm[k]`` the estimated component assigned to
    true component ``k``, minimizing the total Frobenius distance summed
    over grid points.  Exhaustive for K <= 6 with ties toward the
    identity; Hungarian assignment for larger K.
    """
    est_theta = np.asarray(est_theta, dtype=float)
    true_theta = np.asarray(true_theta, dtype=float)
    _check_shapes(est_theta, true_theta)
    K = est_theta.shape[0]
    cost = np.zeros((K, K))
    for kt in range(K):
        for ke in range(K):
            diff = est_theta[ke] - true_theta[kt]
            cost[kt, ke] = float(np.sqrt((diff * diff).sum(axis=(1, 2))).sum())
    if K <= 6:
        best_perm = None
        best_cost = np.inf
        for perm in itertools.permutations(range(K)):
            total = sum(cost[kt, perm[kt]] for kt in range(K))
            if total < best_cost:
                best_cost = total
                best_perm = perm
        return best_perm
    rows, cols = linear_sum_assignment(cost)
    return tuple(int(cols[np.where(rows == kt)[0][0]]) for kt in range(K))


def kl_loss(sigma_true, theta_hat):
    """Gaussian KL-style loss ``tr(S T) - log|S T| - p``; zero iff the
    candidate precision is the exact inverse of the true covariance."""
    sigma_true = np.asarray(sigma_true, dtype=float)
    theta_hat = np.asarray(theta_hat, dtype=float)
    p = sigma_true.shape[0]
    tr = float(np.sum(sigma_true * theta_hat))  # both symmetric
    return tr - linalg.log_det(sigma_true) - linalg.log_det(theta_hat) - p


def _edge_rates(est, true):
    """(TPR, FPR) of one estimated pattern against one true pattern."""
    p = est.shape[0]
    iu = np.triu_indices(p, k=1)
    true_edge = true[iu] != 0.0
    est_edge = est[iu] != 0.0
    n_true = int(true_edge.sum())
    n_null = true_edge.size - n_true
    tpr = float((est_edge & true_edge).sum() / n_true) if n_true else 1.0
    fpr = float((est_edge & ~true_edge).sum() / n_null) if n_null else 0.0
    return tpr, fpr


def report(est_theta, true_theta, est_pi, true_pi):
    """Compute all losses after aligning estimated labels to the truth.

    Parameters are (K, G, p, p) precision arrays and (K, G) proportion
    matrices for the estimate and the truth respectively.
    """
    est_theta = np.asarray(est_theta, dtype=float)
    true_theta = np.asarray(true_theta, dtype=float)
    est_pi = np.asarray(est_pi, dtype=float)
    true_pi = np.asarray(true_pi, dtype=float)
    _check_shapes(est_theta, true_theta)
    if est_pi.shape != true_pi.shape or est_pi.shape != est_theta.shape[:2]:
        raise DimensionMismatch("proportion arrays do not match the precisions")

    perm = align_labels(est_theta, true_theta)
    K, G = est_pi.shape
    asl = afl = akl = 0.0
    sq_err = 0.0
    tpr_sum = fpr_sum = 0.0
    for g in range(G):
        for kt in range(K):
            ke = perm[kt]
            diff = est_theta[ke, g] - true_theta[kt, g]
            asl += linalg.spectral_norm(diff)
            afl += float(np.linalg.norm(diff))
            akl += kl_loss(linalg.invert_spd(true_theta[kt, g]),
                           est_theta[ke, g])
            sq_err += float((est_pi[ke, g] - true_pi[kt, g]) ** 2)
            tpr, fpr = _edge_rates(est_theta[ke, g], true_theta[kt, g])
            tpr_sum += tpr
            fpr_sum += fpr
    rase_sq = sq_err / G
    return EvalReport(asl=asl / G, afl=afl / G, akl=akl / G,
                      rase_pi=float(np.sqrt(rase_sq)), rase_pi_sq=rase_sq,
                      atpr=tpr_sum / (G * K), afpr=fpr_sum / (G * K),
                      alignment=perm)
