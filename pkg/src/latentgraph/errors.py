"""Exception types raised across the package."""


class LatentGraphError(Exception):
    """Base class; ``code`` is the machine-readable name used by the CLI."""

    code = "LatentGraphError"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class NotPositiveDefinite(LatentGraphError):
    code = "NotPositiveDefinite"


class DimensionMismatch(LatentGraphError, ValueError):
    code = "DimensionMismatch"


class RankDeficient(LatentGraphError):
    code = "RankDeficient"


class BoundsInfeasible(LatentGraphError, ValueError):
    code = "BoundsInfeasible"


class Diverged(LatentGraphError):
    code = "Diverged"


class NonFinite(LatentGraphError):
    code = "NonFinite"


class TooFewCandidates(LatentGraphError, ValueError):
    code = "TooFewCandidates"


class AllGridPointsFailed(LatentGraphError):
    code = "AllGridPointsFailed"


class DegenerateTruth(LatentGraphError, ValueError):
    code = "DegenerateTruth"


class SchemaError(LatentGraphError, ValueError):
    code = "SchemaError"

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field

    def to_dict(self):
        d = super().to_dict()
        d["field"] = self.field
        return d


class FileError(LatentGraphError):
    code = "FileError"
