"""Exception hierarchy shared across the package."""


class RaylocError(Exception):
    """Base class for all package errors."""


class FormatError(RaylocError):
    """A file is missing, truncated, or not in the expected format."""


class ValidationError(RaylocError):
    """An argument violates a documented precondition."""


class ConfigurationError(RaylocError):
    """A run configuration is inconsistent or contains unknown keys."""


class OutOfBoundsError(RaylocError):
    """A world coordinate falls outside the floorplan."""


class OccupiedOriginError(RaylocError):
    """A ray origin lies inside a wall cell."""


class EmptyDomainError(RaylocError):
    """An operation requires at least one valid element and got none."""


class MiningExhaustedError(RaylocError):
    """Sample mining could not find a valid pose within the retry budget."""


class TrainingFailureError(RaylocError):
    """Embedder training diverged (non-finite loss)."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")
