"""Exception hierarchy shared by all modules."""


class ArtifactError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(ArtifactError, ValueError):
    pass


class NotHormander(ArtifactError):
    """Some sample point never reaches full rank within the bracket budget."""

    def __init__(self, point, rank, dim, max_len):
        self.point = tuple(float(c) for c in point)
        self.rank = rank
        super().__init__(
            f"bracket span at {self.point} has rank {rank} < {dim} "
            f"after brackets of length <= {max_len}"
        )


class RIsTooSmall(ArtifactError, ValueError):
    pass


class ExponentOutOfRange(ArtifactError, ValueError):
    pass


class NotPositiveDefinite(ArtifactError):
    pass


class ZeroDirection(ArtifactError, ValueError):
    pass


class NotConverged(ArtifactError):
    def __init__(self, message, best=None, iterations=None):
        super().__init__(message)
        self.best = best
        self.iterations = iterations


class CGDiverged(ArtifactError):
    pass


class RegimeMismatch(ArtifactError):
    pass


class TargetUnreachable(ArtifactError):
    pass


class TooShort(ArtifactError):
    pass


class DidNotBlowUp(ArtifactError):
    pass


class ConfigError(ArtifactError, ValueError):
    pass
