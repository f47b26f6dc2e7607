"""Compute mass weighted POD bases, projection errors and decay rates."""

import logging
from typing import Any, Dict, Tuple

import numpy as np
from pydantic import BaseModel, root_validator
from scipy import linalg

from .exceptions import DecompositionError, DimensionMismatchError, SlopeFitError
from .geometry import SymmetricSparseMatrix, vh_norms

log = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-12


class PODBasis(BaseModel):
    """Model an uncentered POD basis of a snapshot matrix.

    Attributes:
        modes: N_h x n matrix V with M-orthonormal columns.
        eigenvalues: whole nonincreasing spectrum of the Gram matrix, so the tails
            after any n can be computed.
        total_energy: mean squared V_h norm of the snapshots.
        rank_limited: True if fewer modes than requested were available.
    """

    modes: np.ndarray
    eigenvalues: np.ndarray
    total_energy: float
    rank_limited: bool = False

    class Config:
        """Configure the pydantic model."""

        arbitrary_types_allowed = True

    @root_validator(skip_on_failure=True)
    @classmethod
    def _check_spectrum(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        eigenvalues = values["eigenvalues"]
        if np.any(eigenvalues < 0) or np.any(np.diff(eigenvalues) > 0):
            raise ValueError("the POD spectrum must be nonnegative and nonincreasing")
        return values

    @property
    def size(self) -> int:
        """Return the number of modes n."""
        return self.modes.shape[1]

    def tail(self, n: int) -> float:
        """Return total_energy - sum_{i<=n} lambda_i, clamped at zero."""
        return max(self.total_energy - float(np.sum(self.eigenvalues[:n])), 0.0)


def pod(outputs: np.ndarray, mass: SymmetricSparseMatrix, n: int) -> PODBasis:
    """Build the POD basis with the method of snapshots.

    The N x N Gram matrix G_ij = u_i^T M u_j / N is diagonalized and its
    eigenvectors are lifted to the snapshot space. Eigenvalues below the rank
    tolerance relative to the largest one are treated as zero; if less than n
    modes survive, the basis is rank limited.

    Args:
        outputs: N x N_h matrix of snapshots, one per row.
        mass: matrix of the V_h inner product.
        n: number of requested modes.

    Raises:
        DecompositionError: if n is out of range.
        DimensionMismatchError: if the snapshots and the mass sizes differ.
    """
    n_snapshots, n_dofs = outputs.shape
    if mass.shape != (n_dofs, n_dofs):
        raise DimensionMismatchError(
            f"Snapshots of width {n_dofs} and mass matrix of shape {mass.shape}"
        )
    if not 1 <= n <= min(n_snapshots, n_dofs):
        raise DecompositionError(
            f"Can't extract {n} modes from {n_snapshots} snapshots of size {n_dofs}"
        )

    weighted = (mass @ outputs.T).T
    gram = outputs @ weighted.T / n_snapshots
    eigenvalues, vectors = linalg.eigh(0.5 * (gram + gram.T))
    eigenvalues, vectors = eigenvalues[::-1], vectors[:, ::-1]
    eigenvalues = np.clip(eigenvalues, 0.0, None)

    threshold = RANK_TOLERANCE * eigenvalues[0]
    rank = int(np.count_nonzero(eigenvalues > threshold)) if eigenvalues[0] > 0 else 0
    kept = min(n, rank)
    rank_limited = kept < n
    if rank_limited:
        log.warning(f"Requested {n} POD modes but the snapshots have rank {rank}")
    eigenvalues[rank:] = 0.0

    modes = outputs.T @ vectors[:, :kept] / np.sqrt(n_snapshots * eigenvalues[:kept])
    if kept:
        # Restore M-orthonormality lost to round off in the lifting.
        cholesky = linalg.cholesky(modes.T @ (mass @ modes), lower=True)
        modes = linalg.solve_triangular(cholesky, modes.T, lower=True).T

    return PODBasis(
        modes=np.ascontiguousarray(modes),
        eigenvalues=eigenvalues,
        total_energy=float(np.trace(gram)),
        rank_limited=rank_limited,
    )


def project(
    basis: PODBasis, fields: np.ndarray, mass: SymmetricSparseMatrix
) -> np.ndarray:
    """Return the reconstructions V V^T M u of every row of `fields`."""
    if fields.ndim != 2 or fields.shape[1] != basis.modes.shape[0]:
        raise DimensionMismatchError(
            f"Fields of shape {fields.shape} for a basis of size {basis.modes.shape}"
        )
    coefficients = (mass @ fields.T).T @ basis.modes
    return coefficients @ basis.modes.T


def projection_errors(
    basis: PODBasis, fields: np.ndarray, mass: SymmetricSparseMatrix
) -> np.ndarray:
    """Return the V_h norm of the projection residual of every row."""
    return vh_norms(mass, fields - project(basis, fields, mass))


def pod_projection_error(
    basis: PODBasis,
    test_outputs: np.ndarray,
    mass: SymmetricSparseMatrix,
    relative: bool = False,
) -> float:
    """Return the mean over the test rows of |u - V V^T M u|.

    With `relative`, each residual is divided by the norm of its sample; samples
    of zero norm are left out of the mean.
    """
    errors = projection_errors(basis, test_outputs, mass)
    if not relative:
        return float(np.mean(errors))
    norms = vh_norms(mass, test_outputs)
    nonzero = norms > 0
    if not np.any(nonzero):
        raise DecompositionError("All the test samples have zero norm")
    return float(np.mean(errors[nonzero] / norms[nonzero]))


def fit_loglog_slope(ns: np.ndarray, values: np.ndarray) -> Tuple[float, float]:
    """Fit log(values) = slope * log(ns) + intercept with least squares.

    Returns:
        The slope, negative for decaying data, and the intercept.

    Raises:
        SlopeFitError: if there are less than two points or nonpositive data.
    """
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.shape != values.shape or len(ns) < 2:
        raise SlopeFitError(
            f"Need at least two paired points, got {ns.shape} and {values.shape}"
        )
    if np.any(ns <= 0) or np.any(values <= 0):
        raise SlopeFitError("Can't fit a log-log slope to nonpositive data")
    slope, intercept = np.polyfit(np.log(ns), np.log(values), deg=1)
    return float(slope), float(intercept)
