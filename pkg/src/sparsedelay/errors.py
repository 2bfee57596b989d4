"""Exception types raised across the package."""


class SparseDelayError(Exception):
    """Base class for all package-specific errors."""


class ZeroVariance(SparseDelayError):
    """A series or overlap segment is constant where a scale is required."""


class LagOutOfRange(SparseDelayError):
    """Requested lag exceeds the admissible range |l| <= n - 1."""


class DegenerateGrid(SparseDelayError):
    """A grid restriction leaves no usable lags."""


class NonConvergence(SparseDelayError):
    """Coordinate descent exhausted its sweep budget without converging."""


class EmptyPath(SparseDelayError):
    """A solution path with no entries was requested or supplied."""


class AllZeroReconstruction(SparseDelayError):
    """The penalized fit is identically zero, so no delay can be read off."""


class InsufficientOverlap(SparseDelayError):
    """Too few paired observations at a lag for the requested statistic."""


class EmptySupport(SparseDelayError):
    """A shifted impulse has no support inside the observation window."""


class TooShort(SparseDelayError):
    """Input series is shorter than the operation requires."""


class NonPositiveAmount(SparseDelayError):
    """An amount model needs strictly positive observations."""


class SeriesFormatError(SparseDelayError):
    """A series file violates the documented schema."""
