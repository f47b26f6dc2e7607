"""Store the classes and fixtures used throughout the tests."""

from pathlib import Path
from typing import AnyStr, Callable, Tuple

import numpy as np
import pytest
from pytest_cases import fixture, parametrize_with_cases, unpack_fixture

from latent_dim.adapters.file.abstract import FileRepository
from latent_dim.adapters.file.local_file import LocalFileRepository
from latent_dim.geometry import (
    StructuredTriMesh,
    SymmetricSparseMatrix,
    UniformGrid1D,
    assemble_mass_matrix,
    build_unit_square_mesh,
    build_uniform_grid,
)

from .cases import FileRepositoryCases, FileRepositoryTester

# ------------------------
# - Discretization fixtures -
# ------------------------


@pytest.fixture(name="generator")
def generator_() -> np.random.Generator:
    """Return a seeded random generator."""
    return np.random.default_rng(20240611)


@pytest.fixture(name="mesh")
def mesh_() -> StructuredTriMesh:
    """Return a coarse unit square mesh with 25 nodes."""
    return build_unit_square_mesh(4)


@pytest.fixture(name="mass")
def mass_(mesh: StructuredTriMesh) -> SymmetricSparseMatrix:
    """Return the consistent mass matrix of the coarse mesh."""
    return assemble_mass_matrix(mesh)


@pytest.fixture(name="grid")
def grid_() -> UniformGrid1D:
    """Return a coarse Burgers grid."""
    return build_uniform_grid(5.0, 50)


# ----------------------------
# - File Repository fixtures -
# ----------------------------
@pytest.fixture(name="repo_local_file")
def repo_local_file_(tmp_path: Path) -> LocalFileRepository[AnyStr]:
    """Configure a temporal LocalFileRepository."""
    return LocalFileRepository(workdir=str(tmp_path))


@fixture
@parametrize_with_cases("file_repo_, file_repo_tester_", cases=FileRepositoryCases)
def file_repo_test_fixture(
    file_repo_: FileRepository[AnyStr],
    file_repo_tester_: FileRepositoryTester[AnyStr],
) -> Tuple[FileRepository[AnyStr], FileRepositoryTester[AnyStr]]:
    """Generate the required fixtures to test the file repositories.

    It creates a tuple containing:

    * A configured repository
    * A tester object

    For each file repository type.
    """
    return file_repo_, file_repo_tester_


# W0632: We know they are going to return two objects.
file_repo, file_repo_tester = unpack_fixture(  # noqa: W0632
    "file_repo,file_repo_tester", file_repo_test_fixture
)


# -------------------------
# - Configuration fixtures -
# -------------------------

TINY_DARCY = """\
problem.kind = darcy
mesh.n_div = 4
snapshots.count = 12
snapshots.seed = 3
snapshots.train_fraction = 0.75
random_field.kl_modes = 10
sweep.latent_dims = 1,2
train.epochs = 2
train.batch_size = 4
table1.latent_dim = 2
"""


@pytest.fixture(name="write_config")
def write_config_(tmp_path: Path) -> Callable[[str], Path]:
    """Return a function that writes a config file whose output is in tmp_path."""

    def write(text: str) -> Path:
        path = tmp_path / "study.conf"
        path.write_text(f"{text}output.directory = {tmp_path / 'out'}\n")
        return path

    return write


@pytest.fixture(name="darcy_config_path")
def darcy_config_path_(write_config: Callable[[str], Path]) -> Path:
    """Return the path of a tiny Darcy study configuration."""
    return write_config(TINY_DARCY)
