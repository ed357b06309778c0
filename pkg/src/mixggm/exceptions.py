"""Exception types raised across the package."""


class MixggmError(Exception):
    """Base class for all package-specific errors."""


class NotPositiveDefinite(MixggmError):
    """Matrix is not numerically positive definite.

    ``pivot`` is the index of the Cholesky pivot that failed, or None when
    the failure was detected some other way.
    """

    def __init__(self, message="matrix is not positive definite", pivot=None):
        super().__init__(message)
        self.pivot = pivot


class NonConvergence(MixggmError):
    """An iterative routine hit its iteration cap without converging."""


class AllWeightsZero(MixggmError):
    """Every kernel weight vanished at a target covariate value."""


class DegenerateScatter(MixggmError):
    """Scatter matrix has a non-positive diagonal entry."""


class DegenerateComponent(MixggmError):
    """A mixture component has (numerically) no responsibility mass."""


class AllInitializationsFailed(MixggmError):
    """Every random restart degenerated in its first iteration."""


class NotEnoughEdges(MixggmError):
    """An edge-evolution schedule asked to remove more edges than exist."""


class DimensionMismatch(MixggmError):
    """Two parameter sets do not share mixture count / grid / dimension."""


class EmptyGrid(MixggmError):
    """A selection grid contains no candidate configurations."""


class ConfigError(MixggmError):
    """A run configuration file is malformed or has unknown keys."""


class DataError(MixggmError):
    """An input data or model file is malformed."""
