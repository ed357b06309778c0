"""Smoothing kernels, their analytic constants and per-function degrees of
freedom used by the information criterion.

The Epanechnikov kernel is the default: it has compact support, which is
what the local-likelihood machinery assumes.  The Gaussian kernel is kept
as a fallback for data that are sparse in the covariate (its weights never
vanish entirely).
"""

import functools
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .exceptions import AllWeightsZero

EPANECHNIKOV = "epanechnikov"
GAUSSIAN = "gaussian"
_FAMILIES = (EPANECHNIKOV, GAUSSIAN)

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family plus a bandwidth (same units as the covariate)."""

    family: str = EPANECHNIKOV
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")


@dataclass(frozen=True)
class KernelConstants:
    """Analytic/numeric constants of a kernel needed by the BIC penalty."""

    k0: float
    int_k2: float
    tau_k: float
    df_unit: float


def _base_eval(family, u):
    """Standardized kernel K(u), vectorized over u."""
    u = np.asarray(u, dtype=float)
    if family == EPANECHNIKOV:
        out = 0.75 * (1.0 - u * u)
        return np.where(np.abs(u) <= 1.0, out, 0.0)
    return np.exp(-0.5 * u * u) / _SQRT_2PI


def evaluate(spec, d):
    """Scaled kernel K_h(d) = K(d / h) / h; zero outside compact support."""
    val = _base_eval(spec.family, np.asarray(d, dtype=float) / spec.bandwidth)
    val = val / spec.bandwidth
    return float(val) if np.ndim(d) == 0 else val


def weights_at(spec, zs, z):
    """Kernel weights K_h(z_n - z) for every observation.

    Raises
    ------
    AllWeightsZero
        When no observation receives positive weight (bandwidth too small
        for this target point).
    """
    w = evaluate(spec, np.asarray(zs, dtype=float) - z)
    if not np.any(w > 0):
        raise AllWeightsZero(
            f"no observation within bandwidth {spec.bandwidth} of z={z}"
        )
    return w


@functools.lru_cache(maxsize=None)
def _family_constants(family):
    """(k0, int_k2, tau_k) for a standardized kernel family.

    tau_k is computed by adaptive quadrature of the self-convolution
    integral; the quadrature itself is validated by step-halving in the
    test suite rather than hard-coding a literature value.
    """
    k = lambda u: float(_base_eval(family, u))
    if family == EPANECHNIKOV:
        lo, hi = -1.0, 1.0
    else:
        lo, hi = -12.0, 12.0
    k0 = k(0.0)
    int_k2, _ = quad(lambda u: k(u) ** 2, lo, hi, epsabs=1e-12)

    def self_conv(t):
        # K(u) K(t-u) is supported on u in [lo, hi] intersect [t-hi, t-lo]
        a, b = max(lo, t - hi), min(hi, t - lo)
        if a >= b:
            return 0.0
        val, _ = quad(lambda u: k(u) * k(t - u), a, b, epsabs=1e-11)
        return val

    integrand = lambda t: (k(t) - 0.5 * self_conv(t)) ** 2
    denom, _ = quad(
        integrand, 2 * lo, 2 * hi, epsabs=1e-9, limit=200, points=(lo, 0.0, hi)
    )
    tau_k = (k0 - 0.5 * int_k2) / denom
    return k0, int_k2, tau_k


def constants(spec, support_length):
    """Kernel constants plus the per-function degrees of freedom.

    ``support_length`` is the length of the covariate support; by default
    callers pass ``max(z) - min(z)`` of the observed data.
    """
    if not support_length > 0:
        raise ValueError("support_length must be positive")
    k0, int_k2, tau_k = _family_constants(spec.family)
    df_unit = tau_k / spec.bandwidth * support_length * (k0 - 0.5 * int_k2)
    return KernelConstants(k0=k0, int_k2=int_k2, tau_k=tau_k, df_unit=df_unit)
