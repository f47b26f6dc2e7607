"""Define the discrete domains, the finite element assembly and the V_h norm.

Meshes are structured lattices over the unit square split in P1 triangles, 1D
domains are uniform finite volume grids. Matrices are returned as scipy CSR
matrices with sorted indices, assembled in a fixed order so that two calls with the
same input produce the same bits.
"""

import logging
from typing import Any, Dict, Union

import numpy as np
from pydantic import BaseModel, root_validator, validator
from scipy import sparse

from .exceptions import DimensionMismatchError, MeshError

log = logging.getLogger(__name__)

SymmetricSparseMatrix = sparse.csr_matrix

_LOCAL_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


class StructuredTriMesh(BaseModel):
    """Model a structured triangular mesh of the unit square.

    Nodes are numbered row-major: node `j * (n_div + 1) + i` sits at
    `(i / n_div, j / n_div)`.
    """

    n_div: int
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_nodes: np.ndarray

    class Config:
        """Configure the pydantic model."""

        arbitrary_types_allowed = True
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    @classmethod
    def _check_counts(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        """Check the combinatorial invariants of the lattice."""
        n_div = values["n_div"]
        if values["nodes"].shape != ((n_div + 1) ** 2, 2):
            raise ValueError("node array doesn't match the lattice size")
        if values["triangles"].shape != (2 * n_div**2, 3):
            raise ValueError("triangle array doesn't match the lattice size")
        return values

    @property
    def n_nodes(self) -> int:
        """Return the number of degrees of freedom N_h."""
        return len(self.nodes)

    @property
    def h(self) -> float:
        """Return the mesh step size, the diameter of the triangles."""
        return float(np.sqrt(2.0) / self.n_div)

    @property
    def interior_nodes(self) -> np.ndarray:
        """Return the sorted indices of the nodes that are not on the boundary."""
        return np.setdiff1d(np.arange(self.n_nodes), self.boundary_nodes)

    def signed_areas(self) -> np.ndarray:
        """Return the signed area of every triangle."""
        corners = self.nodes[self.triangles]
        first = corners[:, 1] - corners[:, 0]
        second = corners[:, 2] - corners[:, 0]
        return 0.5 * (first[:, 0] * second[:, 1] - first[:, 1] * second[:, 0])

    def barycenters(self) -> np.ndarray:
        """Return the barycenter of every triangle."""
        return self.nodes[self.triangles].mean(axis=1)


class UniformGrid1D(BaseModel):
    """Model a uniform finite volume grid over the segment (0, length)."""

    length: float
    n_cells: int

    class Config:
        """Configure the pydantic model."""

        allow_mutation = False

    @validator("length")
    @classmethod
    def _positive_length(cls, length: float) -> float:
        if length <= 0:
            raise ValueError("the segment length must be positive")
        return length

    @validator("n_cells")
    @classmethod
    def _positive_cells(cls, n_cells: int) -> int:
        if n_cells < 1:
            raise ValueError("the grid needs at least one cell")
        return n_cells

    @property
    def h(self) -> float:
        """Return the cell width."""
        return self.length / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        """Return the cell centers."""
        return (np.arange(self.n_cells) + 0.5) * self.h

    @property
    def n_nodes(self) -> int:
        """Return the number of degrees of freedom, one per cell."""
        return self.n_cells


Domain = Union[StructuredTriMesh, UniformGrid1D]


class FieldVector(BaseModel):
    """Model the coefficient vector of a function of V_h."""

    values: np.ndarray
    domain: Domain

    class Config:
        """Configure the pydantic model."""

        arbitrary_types_allowed = True

    @root_validator(skip_on_failure=True)
    @classmethod
    def _check_length(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        """Check that there is one value per degree of freedom."""
        field = np.asarray(values["values"], dtype=float)
        if field.shape != (values["domain"].n_nodes,):
            raise ValueError(
                f"field of shape {field.shape} doesn't match the "
                f"{values['domain'].n_nodes} degrees of freedom of the domain"
            )
        values["values"] = field
        return values

    def __len__(self) -> int:
        """Return the number of coefficients."""
        return len(self.values)


def build_unit_square_mesh(n_div: int) -> StructuredTriMesh:
    """Build the structured triangular mesh of the unit square.

    Every lattice cell is split into two triangles along its lower-left to
    upper-right diagonal, both counterclockwise oriented.

    Args:
        n_div: number of lattice subdivisions per side.

    Raises:
        MeshError: if n_div is smaller than one.
    """
    if n_div < 1:
        raise MeshError(f"A mesh needs at least one subdivision per side, got {n_div}")
    side = n_div + 1
    coordinates = np.linspace(0.0, 1.0, side)
    x_coords, y_coords = np.meshgrid(coordinates, coordinates)
    nodes = np.column_stack([x_coords.ravel(), y_coords.ravel()])

    rows, columns = np.meshgrid(np.arange(n_div), np.arange(n_div), indexing="ij")
    lower_left = (rows * side + columns).ravel()
    lower_right = lower_left + 1
    upper_left = lower_left + side
    upper_right = upper_left + 1
    triangles = np.empty((2 * n_div**2, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([lower_left, lower_right, upper_right])
    triangles[1::2] = np.column_stack([lower_left, upper_right, upper_left])

    on_boundary = (
        np.isclose(nodes[:, 0], 0.0)
        | np.isclose(nodes[:, 0], 1.0)
        | np.isclose(nodes[:, 1], 0.0)
        | np.isclose(nodes[:, 1], 1.0)
    )
    log.debug(f"Built unit square mesh with {len(nodes)} nodes")
    return StructuredTriMesh(
        n_div=n_div,
        nodes=nodes,
        triangles=triangles,
        boundary_nodes=np.flatnonzero(on_boundary),
    )


def build_uniform_grid(length: float, n_cells: int) -> UniformGrid1D:
    """Build the uniform finite volume grid of (0, length)."""
    try:
        return UniformGrid1D(length=length, n_cells=n_cells)
    except ValueError as error:
        raise MeshError(str(error)) from error


def lattice_points(per_side: int) -> np.ndarray:
    """Return the nodes of a uniform per_side x per_side lattice of the unit square."""
    coordinates = np.linspace(0.0, 1.0, per_side)
    x_coords, y_coords = np.meshgrid(coordinates, coordinates)
    return np.column_stack([x_coords.ravel(), y_coords.ravel()])


def domain_points(domain: Domain) -> np.ndarray:
    """Return the physical location of the degrees of freedom as a 2D array."""
    if isinstance(domain, StructuredTriMesh):
        return domain.nodes
    return domain.centers[:, None]


def _assemble(
    mesh: StructuredTriMesh, local_blocks: np.ndarray
) -> SymmetricSparseMatrix:
    """Scatter per-element 3x3 blocks into a symmetric CSR matrix.

    The coordinate list follows the element order, so duplicated entries are
    always summed in the same sequence.
    """
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    columns = np.tile(mesh.triangles, (1, 3)).ravel()
    matrix = sparse.coo_matrix(
        (local_blocks.ravel(), (rows, columns)), shape=(mesh.n_nodes, mesh.n_nodes)
    ).tocsr()
    matrix = ((matrix + matrix.T) * 0.5).tocsr()
    matrix.sort_indices()
    return matrix


def assemble_mass_matrix(mesh: StructuredTriMesh) -> SymmetricSparseMatrix:
    """Assemble the P1 consistent mass matrix M.

    Each element contributes (A/12)·[[2,1,1],[1,2,1],[1,1,2]], A being its area.
    """
    areas = mesh.signed_areas()
    blocks = areas[:, None, None] * _LOCAL_MASS[None, :, :]
    return _assemble(mesh, blocks)


def grid_mass_matrix(grid: UniformGrid1D) -> SymmetricSparseMatrix:
    """Return the finite volume mass matrix h·I of a uniform grid."""
    return sparse.identity(grid.n_cells, format="csr") * grid.h


def _gradient_blocks(mesh: StructuredTriMesh) -> np.ndarray:
    """Return the per-element P1 stiffness blocks of the Laplacian."""
    corners = mesh.nodes[mesh.triangles]
    areas = mesh.signed_areas()
    # Gradient of the barycentric coordinate of each vertex, rotated edge / 2A.
    opposite_edges = np.roll(corners, -2, axis=1) - np.roll(corners, -1, axis=1)
    gradients = np.stack([-opposite_edges[..., 1], opposite_edges[..., 0]], axis=-1)
    gradients /= 2.0 * areas[:, None, None]
    products = (
        gradients[:, :, None, 0] * gradients[:, None, :, 0]
        + gradients[:, :, None, 1] * gradients[:, None, :, 1]
    )
    return areas[:, None, None] * products


def assemble_stiffness(
    mesh: StructuredTriMesh, element_coefficients: np.ndarray
) -> SymmetricSparseMatrix:
    """Assemble the P1 stiffness matrix of -div(k grad u) with k constant per element.

    Args:
        mesh: discrete domain.
        element_coefficients: value of the diffusion coefficient on each triangle.
    """
    if element_coefficients.shape != (len(mesh.triangles),):
        raise DimensionMismatchError(
            f"Expected {len(mesh.triangles)} element coefficients, "
            f"got {element_coefficients.shape}"
        )
    blocks = element_coefficients[:, None, None] * _gradient_blocks(mesh)
    return _assemble(mesh, blocks)


def assemble_darcy_stiffness(
    mesh: StructuredTriMesh, sigma: FieldVector
) -> SymmetricSparseMatrix:
    """Assemble the P1 stiffness matrix of -div(e^sigma grad u).

    The coefficient of each element is e^sigma evaluated at the barycenter, where
    sigma is the average of its three nodal values.

    Raises:
        DimensionMismatchError: if sigma is not a nodal field of the mesh.
    """
    if len(sigma) != mesh.n_nodes:
        raise DimensionMismatchError(
            f"Log-permeability of length {len(sigma)} on a mesh "
            f"of {mesh.n_nodes} nodes"
        )
    coefficients = np.exp(sigma.values[mesh.triangles].mean(axis=1))
    return assemble_stiffness(mesh, coefficients)


def vh_norm(mass: SymmetricSparseMatrix, field: Union[FieldVector, np.ndarray]) -> float:
    """Return the discrete L2 norm sqrt(v^T M v).

    Raises:
        DimensionMismatchError: if the field and the matrix sizes differ.
    """
    values = field.values if isinstance(field, FieldVector) else np.asarray(field)
    if values.shape != (mass.shape[0],):
        raise DimensionMismatchError(
            f"Field of shape {values.shape} and mass matrix of shape {mass.shape}"
        )
    return float(np.sqrt(max(float(values @ (mass @ values)), 0.0)))


def vh_norms(mass: SymmetricSparseMatrix, fields: np.ndarray) -> np.ndarray:
    """Return the discrete L2 norm of every row of a matrix of fields."""
    if fields.ndim != 2 or fields.shape[1] != mass.shape[0]:
        raise DimensionMismatchError(
            f"Fields of shape {fields.shape} and mass matrix of shape {mass.shape}"
        )
    squared = np.einsum("ij,ij->i", fields, (mass @ fields.T).T)
    return np.sqrt(np.maximum(squared, 0.0))


def export_mesh_text(mesh: StructuredTriMesh) -> str:
    """Dump the mesh as a plain-text listing, one record per line.

    Records are `node <index> <x> <y>`, `triangle <index> <a> <b> <c>` and
    `boundary <node index>`.
    """
    lines = [f"# mesh n_div={mesh.n_div} nodes={mesh.n_nodes}"]
    lines.extend(
        f"node {index} {x_coord:.17g} {y_coord:.17g}"
        for index, (x_coord, y_coord) in enumerate(mesh.nodes)
    )
    lines.extend(
        f"triangle {index} {first} {second} {third}"
        for index, (first, second, third) in enumerate(mesh.triangles)
    )
    lines.extend(f"boundary {node}" for node in mesh.boundary_nodes)
    return "\n".join(lines) + "\n"
