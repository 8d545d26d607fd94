"""Exception types shared across the package."""


class KincellError(Exception):
    """Base class for all package-specific errors."""


class IllConditionedCell(KincellError):
    """Dual-basis construction rejected a degenerate cell."""


class HashMismatch(KincellError):
    """Partition content hash disagrees between two artifacts."""


class VersionMismatch(KincellError):
    """Cache file was written by an incompatible format version."""


class CorruptFile(KincellError):
    """Cache file failed a structural integrity check."""


class CostGuard(KincellError):
    """Requested oracle computation exceeds the configured cost limit."""


class NonFiniteState(KincellError):
    """Time integration produced a non-finite state entry."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class CflViolation(KincellError):
    """Requested time step exceeds the CFL stability bound."""


class EigenFailure(KincellError):
    """Drift matrix eigendecomposition failed the realness tolerance."""


class ZeroDensity(KincellError):
    """Macroscopic extraction requested on a (near-)zero density state."""


class ConfigError(KincellError):
    """Run configuration is invalid; message names the offending field."""
