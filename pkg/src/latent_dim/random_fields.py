"""Define covariance kernels, discrete Karhunen-Loeve expansions and field samplers."""

import logging
from typing import Any, Dict, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, root_validator
from scipy import linalg
from scipy.spatial.distance import cdist

from .exceptions import DecompositionError
from .geometry import (
    Domain,
    FieldVector,
    StructuredTriMesh,
    SymmetricSparseMatrix,
    UniformGrid1D,
    domain_points,
)

log = logging.getLogger(__name__)

SeedLike = Union[int, Sequence[int], np.random.SeedSequence]

EIGENVALUE_TOLERANCE = 1e-12


class CovarianceKernel(BaseModel):
    """Model a stationary covariance kernel.

    Only the squared exponential Cov(x, y) = exp(-|x - y|^2 / length_scale^2) is
    available; the default unit length scale is the kernel of the Darcy study.
    """

    kind: Literal["squared_exponential"] = "squared_exponential"
    length_scale: float = 1.0

    def __call__(self, first: np.ndarray, second: np.ndarray) -> np.ndarray:
        """Evaluate the kernel between two point clouds of shape (N, d) and (M, d)."""
        squared = cdist(first, second, metric="sqeuclidean")
        return np.exp(-squared / self.length_scale**2)


class KLBasis(BaseModel):
    """Model a truncated Karhunen-Loeve expansion of a random field.

    Attributes:
        eigenvalues: nonincreasing, nonnegative spectrum.
        modes: N_h x m matrix whose columns are orthonormal in the weighted inner
            product used by the decomposition.
        mean: mean field, zero for centered fields.
        total_energy: trace of the covariance in the V_h inner product.
        weights: diagonal weights of the inner product if lumped, None if the
            consistent mass matrix was used.
    """

    eigenvalues: np.ndarray
    modes: np.ndarray
    mean: FieldVector
    total_energy: float
    weights: Optional[np.ndarray] = None

    class Config:
        """Configure the pydantic model."""

        arbitrary_types_allowed = True

    @root_validator(skip_on_failure=True)
    @classmethod
    def _check_shapes(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        if values["modes"].shape != (len(values["mean"]), len(values["eigenvalues"])):
            raise ValueError("modes don't match the mean field and the eigenvalues")
        return values

    @property
    def size(self) -> int:
        """Return the number of stored modes m."""
        return len(self.eigenvalues)


def assemble_covariance_matrix(kernel: CovarianceKernel, domain: Domain) -> np.ndarray:
    """Evaluate the kernel between every pair of degrees of freedom of the domain."""
    points = domain_points(domain)
    covariance = kernel(points, points)
    # Enforce exact symmetry and the unit diagonal against round off.
    covariance = 0.5 * (covariance + covariance.T)
    np.fill_diagonal(covariance, 1.0)
    return covariance


def _fix_signs(modes: np.ndarray) -> np.ndarray:
    """Make the entry of largest absolute value of every column positive."""
    rows = np.argmax(np.abs(modes), axis=0)
    signs = np.sign(modes[rows, np.arange(modes.shape[1])])
    signs[signs == 0] = 1.0
    return modes * signs


def clamp_spectrum(eigenvalues: np.ndarray) -> np.ndarray:
    """Set to zero the negative eigenvalues caused by round off.

    Raises:
        DecompositionError: if an eigenvalue is more negative than the tolerance
            relative to the largest one.
    """
    if len(eigenvalues) == 0:
        return eigenvalues
    scale = max(float(eigenvalues[0]), 0.0)
    if float(eigenvalues.min()) < -EIGENVALUE_TOLERANCE * scale:
        raise DecompositionError(
            f"Found eigenvalue {eigenvalues.min()}: the operator is not "
            "positive semidefinite"
        )
    return np.clip(eigenvalues, 0.0, None)


def kl_decompose(
    covariance: np.ndarray,
    mass: SymmetricSparseMatrix,
    m: int,
    domain: Domain,
    mass_lumping: bool = True,
) -> KLBasis:
    """Solve the mass weighted covariance eigenproblem.

    With lumping, M is replaced by its row sums w and the symmetric problem
    diag(sqrt w) C diag(sqrt w) is solved, the modes being recovered by dividing by
    sqrt w. Without lumping, the generalized problem M C M phi = lambda M phi is
    solved so that the modes are orthonormal for the consistent mass matrix.

    Args:
        covariance: dense symmetric covariance matrix C.
        mass: mass matrix of the domain.
        m: number of modes to keep.
        domain: domain of the field, used for the mean.
        mass_lumping: whether to use the lumped mass square root transform.

    Raises:
        DecompositionError: if m is out of range, the mass is not positive definite
            or the covariance has significantly negative eigenvalues.
    """
    n_dofs = covariance.shape[0]
    if covariance.shape != (n_dofs, n_dofs) or mass.shape != (n_dofs, n_dofs):
        raise DecompositionError(
            f"Covariance {covariance.shape} and mass {mass.shape} sizes don't agree"
        )
    if not 1 <= m <= n_dofs:
        raise DecompositionError(f"Truncation m={m} outside of [1, {n_dofs}]")

    weights: Optional[np.ndarray] = None
    if mass_lumping:
        weights = np.asarray(mass.sum(axis=1)).ravel()
        if np.any(weights <= 0):
            raise DecompositionError("The lumped mass matrix is not positive definite")
        root = np.sqrt(weights)
        eigenvalues, vectors = linalg.eigh(root[:, None] * covariance * root[None, :])
        eigenvalues, vectors = eigenvalues[::-1], vectors[:, ::-1]
        modes = vectors[:, :m] / root[:, None]
        total_energy = float(np.sum(np.diag(covariance) * weights))
    else:
        dense_mass = mass.toarray()
        weighted = dense_mass @ covariance @ dense_mass
        try:
            eigenvalues, vectors = linalg.eigh(0.5 * (weighted + weighted.T), dense_mass)
        except linalg.LinAlgError as error:
            raise DecompositionError(
                "The mass matrix is not positive definite"
            ) from error
        eigenvalues, vectors = eigenvalues[::-1], vectors[:, ::-1]
        modes = vectors[:, :m]
        total_energy = float(np.sum(covariance * dense_mass))

    eigenvalues = clamp_spectrum(eigenvalues)
    log.debug(f"KL decomposition of size {n_dofs}, keeping {m} modes")
    return KLBasis(
        eigenvalues=eigenvalues[:m].copy(),
        modes=_fix_signs(np.ascontiguousarray(modes)),
        mean=FieldVector(values=np.zeros(n_dofs), domain=domain),
        total_energy=total_energy,
        weights=weights,
    )


def _generator(seed: SeedLike) -> np.random.Generator:
    """Build the random generator owned by one sampling call."""
    return np.random.default_rng(seed)


def sample_fields(
    basis: KLBasis, n_trunc: int, seed: SeedLike, count: int
) -> np.ndarray:
    """Draw `count` realizations mean + sum_{i<=n_trunc} sqrt(lambda_i) eta_i phi_i.

    Returns:
        count x N_h matrix, one realization per row.

    Raises:
        DecompositionError: if n_trunc exceeds the number of stored modes.
    """
    if not 0 <= n_trunc <= basis.size:
        raise DecompositionError(
            f"Can't truncate at {n_trunc} terms a basis with {basis.size} modes"
        )
    coefficients = _generator(seed).standard_normal((count, n_trunc))
    scaled = coefficients * np.sqrt(basis.eigenvalues[:n_trunc])[None, :]
    return basis.mean.values[None, :] + scaled @ basis.modes[:, :n_trunc].T


def sample_field(basis: KLBasis, n_trunc: int, seed: SeedLike) -> FieldVector:
    """Draw one realization of the truncated Karhunen-Loeve expansion."""
    values = sample_fields(basis, n_trunc, seed, count=1)[0]
    return FieldVector(values=values, domain=basis.mean.domain)


def burgers_initial_profile(points: np.ndarray) -> np.ndarray:
    """Return the bump (x - 1)(2 - x) on [1, 2], zero elsewhere."""
    bump = (points - 1.0) * (2.0 - points)
    return np.where((points >= 1.0) & (points <= 2.0), bump, 0.0)


def burgers_ic_from_coefficients(grid: UniformGrid1D, eta: np.ndarray) -> FieldVector:
    """Build the Burgers initial condition from given series coefficients.

    mu(x) = clamp(phi_0(x) + sum_k k^-2 eta_k sin(k pi x / L)) / 2, clamp being the
    projection onto [0, 1].
    """
    points = grid.centers
    frequencies = np.arange(1, len(eta) + 1)
    series = np.sin(np.outer(points, frequencies) * np.pi / grid.length) @ (
        eta / frequencies**2
    )
    values = 0.5 * np.clip(burgers_initial_profile(points) + series, 0.0, 1.0)
    return FieldVector(values=values, domain=grid)


def sample_burgers_ic(
    grid: UniformGrid1D, series_terms: int, seed: SeedLike
) -> FieldVector:
    """Draw a random Burgers initial condition with K = series_terms modes."""
    if series_terms < 1:
        raise DecompositionError("The initial condition series needs at least 1 term")
    eta = _generator(seed).standard_normal(series_terms)
    return burgers_ic_from_coefficients(grid, eta)


def spectral_tail(basis: KLBasis, n: int) -> float:
    """Return total_energy - sum_{i<=n} lambda_i, clamped at zero."""
    if n < 0:
        raise DecompositionError(f"Can't compute the tail after {n} modes")
    captured = float(np.sum(basis.eigenvalues[:n]))
    return max(basis.total_energy - captured, 0.0)


def linf_tail(basis: KLBasis, n: int) -> float:
    """Return the sup norm of sum_{i>n} lambda_i phi_i^2 over the stored modes."""
    modes = basis.modes[:, n:]
    pointwise = (modes**2) @ basis.eigenvalues[n:]
    return float(pointwise.max()) if pointwise.size else 0.0


def mode_sup_norms(basis: KLBasis) -> np.ndarray:
    """Return the L-infinity norm of every mode."""
    return np.abs(basis.modes).max(axis=0)


def pointwise_variance(basis: KLBasis, n_trunc: int) -> np.ndarray:
    """Return sum_{i<=n_trunc} lambda_i phi_i(x)^2 at every degree of freedom."""
    return (basis.modes[:, :n_trunc] ** 2) @ basis.eigenvalues[:n_trunc]


def squared_exponential_basis(
    mesh: StructuredTriMesh,
    mass: SymmetricSparseMatrix,
    m: Optional[int] = None,
    mass_lumping: bool = True,
) -> KLBasis:
    """Decompose the unit length squared exponential field on a mesh."""
    covariance = assemble_covariance_matrix(CovarianceKernel(), mesh)
    return kl_decompose(
        covariance, mass, m or mesh.n_nodes, mesh, mass_lumping=mass_lumping
    )
