"""Desk-scale laboratory to study the latent dimension of deep autoencoders."""

from .config import StudyConfig, TrainConfig, build_config, load_config
from .dlrom import DLROM, build_dlrom, dlrom_loss, latent_sweep, train
from .exceptions import (
    CFLViolationError,
    ConfigError,
    DecompositionError,
    DimensionMismatchError,
    LatentDimError,
    MeshError,
    NetworkError,
    SnapshotFormatError,
    SnapshotGenerationError,
    SolverError,
    TrainingDivergedError,
)
from .geometry import FieldVector, StructuredTriMesh, UniformGrid1D, build_unit_square_mesh
from .model import ErrorDecayReport, File, Table1Report
from .reduction import PODBasis, fit_loglog_slope, pod
from .services import generate, load_checkpoints, load_file_repository, sweep, table1

__all__ = [
    "CFLViolationError",
    "ConfigError",
    "DLROM",
    "DecompositionError",
    "DimensionMismatchError",
    "ErrorDecayReport",
    "FieldVector",
    "File",
    "LatentDimError",
    "MeshError",
    "NetworkError",
    "PODBasis",
    "SnapshotFormatError",
    "SnapshotGenerationError",
    "SolverError",
    "StructuredTriMesh",
    "StudyConfig",
    "Table1Report",
    "TrainConfig",
    "TrainingDivergedError",
    "UniformGrid1D",
    "build_config",
    "build_dlrom",
    "build_unit_square_mesh",
    "dlrom_loss",
    "fit_loglog_slope",
    "generate",
    "latent_sweep",
    "load_checkpoints",
    "load_config",
    "load_file_repository",
    "pod",
    "sweep",
    "table1",
    "train",
]
