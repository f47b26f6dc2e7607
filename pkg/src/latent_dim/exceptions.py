"""Store the latent-dim exceptions."""

from typing import List, Optional


class LatentDimError(Exception):
    """Base class of all the errors raised by the program."""


class MeshError(LatentDimError):
    """Raised when a discrete domain can't be built or is not valid."""


class DimensionMismatchError(LatentDimError):
    """Raised when the sizes of two operands don't agree."""


class DecompositionError(LatentDimError):
    """Raised when a spectral decomposition fails or gets invalid arguments."""


class SolverError(LatentDimError):
    """Raised when a full order model can't produce a trusted solution."""


class CFLViolationError(SolverError):
    """Raised when a time step breaks the CFL stability condition."""


class SnapshotGenerationError(LatentDimError):
    """Raised when the full order model fails while generating a snapshot."""

    def __init__(self, message: str, index: int) -> None:
        """Store the index of the failing snapshot."""
        super().__init__(message)
        self.index = index


class NetworkError(LatentDimError):
    """Raised when a network is used with incompatible shapes or parameters."""


class StaleCacheError(NetworkError):
    """Raised when backward is called without a matching forward cache."""


class TrainingDivergedError(LatentDimError):
    """Raised when the training loss explodes or stops being finite."""

    def __init__(
        self, message: str, epoch: int, loss: float, latent_dim: Optional[int] = None
    ) -> None:
        """Store the training state at the moment of the failure."""
        super().__init__(message)
        self.epoch = epoch
        self.loss = loss
        self.latent_dim = latent_dim


class ConfigError(LatentDimError):
    """Raised when the study configuration is not valid."""

    def __init__(self, message: str, fields: Optional[List[str]] = None) -> None:
        """Store the dotted names of the wrong fields."""
        super().__init__(message)
        self.fields = fields or []


class SnapshotFormatError(LatentDimError):
    """Raised when a binary file doesn't follow its format."""


class FileContentNotLoadedError(LatentDimError):
    """Raised when trying to access the content of a file that has not been loaded."""


class SlopeFitError(LatentDimError):
    """Raised when a log-log slope can't be fitted to the given data."""


class MissingSnapshotsError(LatentDimError):
    """Raised when a study needs snapshot or checkpoint files that are missing."""
