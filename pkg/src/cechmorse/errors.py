"""Exception and warning types shared across the package."""


class CechMorseError(Exception):
    """Base class for all package-specific errors."""


class DegenerateError(CechMorseError):
    """Geometric construction is ill-conditioned or undefined.

    Raised when a predicate cannot be decided reliably, e.g. a
    circumsphere of affinely dependent points, or a linear system whose
    conditioning exceeds the inverse of the geometric tolerance.
    """


class MetricRangeError(CechMorseError, ValueError):
    """Scale parameter is outside the valid range for the metric.

    The periodic box metric is only a well-defined flat metric for
    neighborhoods smaller than a quarter of the side length; radii at or
    beyond that bound are refused rather than silently mangled.
    """


class RejectionStallError(CechMorseError, RuntimeError):
    """Rejection sampler acceptance rate fell below the stall threshold."""


class InsufficientDimensionError(CechMorseError, ValueError):
    """Complex was not built to a high enough dimension for the request.

    Rank of the boundary map from dimension k+1 is needed to compute the
    k-th Betti number, so the complex must contain (k+1)-simplices.
    """


class UnsupportedError(CechMorseError, NotImplementedError):
    """Requested combination of parameters is outside the supported domain."""


class ConfigError(CechMorseError, ValueError):
    """Malformed or incomplete configuration input."""


class DegeneracyWarning(UserWarning):
    """A near-degenerate configuration was detected and skipped.

    Emitted when a decision falls inside the tolerance shell where the
    outcome cannot be certified either way, e.g. a cloud point lying on
    the boundary sphere of a candidate critical point.
    """
