"""Test the POD, the projection errors and the slope fits."""

import numpy as np
import pytest

from latent_dim.exceptions import (
    DecompositionError,
    DimensionMismatchError,
    SlopeFitError,
)
from latent_dim.geometry import (
    SymmetricSparseMatrix,
    assemble_mass_matrix,
    build_unit_square_mesh,
    vh_norm,
    vh_norms,
)
from latent_dim.random_fields import kl_decompose
from latent_dim.reduction import (
    PODBasis,
    fit_loglog_slope,
    pod,
    pod_projection_error,
    project,
    projection_errors,
)


@pytest.fixture(name="snapshots")
def snapshots_(mass: SymmetricSparseMatrix, generator: np.random.Generator) -> np.ndarray:
    """Return 40 snapshots with a decaying spectrum."""
    coefficients = generator.standard_normal((40, 8)) * 2.0 ** -np.arange(8)
    directions = generator.standard_normal((8, mass.shape[0]))
    return coefficients @ directions


class TestPOD:
    """Test the method of snapshots."""

    def test_modes_are_mass_orthonormal(
        self, snapshots: np.ndarray, mass: SymmetricSparseMatrix
    ) -> None:
        """
        Given: A snapshot matrix
        When: Extracting 5 POD modes
        Then: V^T M V is the identity
        """
        basis = pod(snapshots, mass, 5)

        result = basis.modes.T @ (mass @ basis.modes)

        assert np.allclose(result, np.eye(5), atol=1e-8)

    def test_spectrum_is_nonnegative_nonincreasing_and_complete(
        self, snapshots: np.ndarray, mass: SymmetricSparseMatrix
    ) -> None:
        """
        Given: A snapshot matrix of rank 8
        When: Extracting 3 POD modes
        Then: The whole spectrum is kept, zero after the rank
        """
        result = pod(snapshots, mass, 3).eigenvalues

        assert len(result) == 40
        assert np.all(result >= 0)
        assert np.all(np.diff(result) <= 0)
        assert np.all(result[8:] == 0)

    def test_spectrum_adds_up_to_the_mean_squared_norm(
        self, snapshots: np.ndarray, mass: SymmetricSparseMatrix
    ) -> None:
        """
        Given: A snapshot matrix
        When: Adding all the POD eigenvalues
        Then: The mean squared V_h norm of the snapshots is found
        """
        basis = pod(snapshots, mass, 3)
        energy = np.mean(np.einsum("ij,ij->i", snapshots, (mass @ snapshots.T).T))

        result = basis.eigenvalues.sum()

        assert result == pytest.approx(energy, rel=1e-10)
        assert basis.total_energy == pytest.approx(energy, rel=1e-12)

    def test_mean_projection_error_matches_the_tail(
        self, snapshots: np.ndarray, mass: SymmetricSparseMatrix
    ) -> None:
        """
        Given: A POD basis of n modes
        When: Projecting the training snapshots
        Then: The mean squared residual equals the eigenvalue tail after n
        """
        basis = pod(snapshots, mass, 4)

        result = np.mean(projection_errors(basis, snapshots, mass) ** 2)

        assert result == pytest.approx(basis.tail(4), rel=1e-8)

    def test_rank_one_snapshots(self, mass: SymmetricSparseMatrix) -> None:
        """
        Given: Four copies of the same snapshot
        When: Asking for two modes
        Then: The basis is rank limited with a single mode of eigenvalue |u|^2
        """
        snapshot = np.linspace(1.0, 2.0, mass.shape[0])
        squared_norm = float(snapshot @ (mass @ snapshot))

        result = pod(np.tile(snapshot, (4, 1)), mass, 2)

        assert result.rank_limited
        assert result.size == 1
        assert result.eigenvalues[0] == pytest.approx(squared_norm, rel=1e-12)
        assert np.all(result.eigenvalues[1:] == 0)

    def test_zero_snapshots_give_an_empty_basis(
        self, mass: SymmetricSparseMatrix
    ) -> None:
        """
        Given: Snapshots that are all zero
        When: Building the POD basis
        Then: No mode survives and the error is the zero norm
        """
        snapshots = np.zeros((3, mass.shape[0]))

        result = pod(snapshots, mass, 2)

        assert result.size == 0
        assert result.rank_limited
        assert pod_projection_error(result, snapshots, mass) == 0.0

    @pytest.mark.parametrize("n", [0, 41])
    def test_number_of_modes_must_fit(
        self, snapshots: np.ndarray, mass: SymmetricSparseMatrix, n: int
    ) -> None:
        """
        Given: A number of modes outside of [1, min(N, N_h)]
        When: Building the POD basis
        Then: A DecompositionError is raised
        """
        with pytest.raises(DecompositionError):
            pod(snapshots, mass, n)

    def test_snapshots_must_match_the_mass(
        self, snapshots: np.ndarray, mass: SymmetricSparseMatrix
    ) -> None:
        """
        Given: Snapshots with one column less than the mass matrix
        When: Building the POD basis
        Then: A DimensionMismatchError is raised
        """
        with pytest.raises(DimensionMismatchError):
            pod(snapshots[:, 1:], mass, 2)

    def test_spectrum_matches_the_karhunen_loeve_one(
        self, generator: np.random.Generator
    ) -> None:
        """
        Given: 5 snapshots on a mesh of 9 nodes and their uncentered covariance
        When: Building the POD basis and the consistent mass KL expansion
        Then: Both spectra agree
        """
        mesh = build_unit_square_mesh(2)
        mass = assemble_mass_matrix(mesh)
        snapshots = generator.standard_normal((5, mesh.n_nodes))
        covariance = snapshots.T @ snapshots / len(snapshots)
        expansion = kl_decompose(covariance, mass, 9, mesh, mass_lumping=False)

        result = pod(snapshots, mass, 5).eigenvalues

        tolerance = 1e-8 * result[0]
        assert np.allclose(result, expansion.eigenvalues[:5], rtol=0, atol=tolerance)
        assert np.allclose(expansion.eigenvalues[5:], 0, rtol=0, atol=tolerance)

    def test_basis_rejects_increasing_spectrum(self) -> None:
        """
        Given: An increasing spectrum
        When: Building a PODBasis
        Then: A validation error is raised
        """
        with pytest.raises(ValueError, match="nonincreasing"):
            PODBasis(
                modes=np.zeros((3, 1)),
                eigenvalues=np.array([1.0, 2.0]),
                total_energy=3.0,
            )


class TestProjection:
    """Test the projection onto the POD space."""

    def test_projection_is_idempotent(
        self, snapshots: np.ndarray, mass: SymmetricSparseMatrix
    ) -> None:
        """
        Given: The projection of the snapshots
        When: Projecting it again
        Then: It doesn't change
        """
        basis = pod(snapshots, mass, 3)
        projected = project(basis, snapshots, mass)

        result = project(basis, projected, mass)

        assert np.allclose(result, projected, atol=1e-10)

    def test_projection_splits_the_squared_norm(
        self, snapshots: np.ndarray, mass: SymmetricSparseMatrix
    ) -> None:
        """
        Given: A POD basis of 3 modes
        When: Projecting the snapshots
        Then: |u|^2 = |V V^T M u|^2 + |u - V V^T M u|^2
        """
        basis = pod(snapshots, mass, 3)
        projected = project(basis, snapshots, mass)
        residuals = snapshots - projected

        result = vh_norms(mass, projected) ** 2 + vh_norms(mass, residuals) ** 2

        assert np.allclose(result, vh_norms(mass, snapshots) ** 2, rtol=1e-10, atol=0)

    def test_orthogonal_field_error_is_its_norm(
        self,
        snapshots: np.ndarray,
        mass: SymmetricSparseMatrix,
        generator: np.random.Generator,
    ) -> None:
        """
        Given: A field w with w^T M V = 0
        When: Measuring its projection error
        Then: It's the norm of w
        """
        basis = pod(snapshots, mass, 3)
        field = generator.standard_normal(mass.shape[0])
        field = field - project(basis, field[None, :], mass)[0]

        result = pod_projection_error(basis, field[None, :], mass)

        assert np.abs(field @ (mass @ basis.modes)).max() < 1e-12
        assert result == pytest.approx(vh_norm(mass, field), rel=1e-12)

    def test_full_rank_basis_reproduces_the_snapshots(
        self, snapshots: np.ndarray, mass: SymmetricSparseMatrix
    ) -> None:
        """
        Given: A basis with as many modes as the snapshot rank
        When: Measuring the projection error
        Then: It's zero up to round off
        """
        basis = pod(snapshots, mass, 8)

        result = pod_projection_error(basis, snapshots, mass)

        assert result < 1e-8

    def test_relative_error_skips_zero_samples(
        self, snapshots: np.ndarray, mass: SymmetricSparseMatrix
    ) -> None:
        """
        Given: A test set with a zero sample
        When: Measuring the relative projection error
        Then: The zero sample is left out of the mean
        """
        basis = pod(snapshots, mass, 2)
        test = np.vstack([snapshots[:3], np.zeros(mass.shape[0])])

        result = pod_projection_error(basis, test, mass, relative=True)

        assert result == pytest.approx(
            pod_projection_error(basis, snapshots[:3], mass, relative=True)
        )

    def test_errors_decrease_with_the_number_of_modes(
        self, snapshots: np.ndarray, mass: SymmetricSparseMatrix
    ) -> None:
        """
        Given: Bases of increasing size
        When: Measuring the projection error
        Then: The error doesn't increase
        """
        result = [
            pod_projection_error(pod(snapshots, mass, n), snapshots, mass)
            for n in range(1, 8)
        ]

        assert all(second <= first + 1e-12 for first, second in zip(result, result[1:]))


class TestSlopes:
    """Test the least squares fit of the decay rates."""

    def test_exact_power_law(self) -> None:
        """
        Given: The values 3 n^-2
        When: Fitting the log-log slope
        Then: The slope -2 and the intercept log 3 are recovered
        """
        ns = np.array([1, 2, 4, 8])

        slope, intercept = fit_loglog_slope(ns, 3.0 * ns**-2.0)

        assert slope == pytest.approx(-2.0, abs=1e-12)
        assert intercept == pytest.approx(np.log(3.0), abs=1e-12)

    def test_two_points_give_the_secant(self) -> None:
        """
        Given: The points (1, 8) and (2, 1)
        When: Fitting the slope
        Then: -3 is returned
        """
        slope, _ = fit_loglog_slope(np.array([1, 2]), np.array([8.0, 1.0]))

        assert slope == pytest.approx(-3.0, abs=1e-12)

    @pytest.mark.parametrize(
        ("ns", "values"),
        [
            pytest.param([1], [1.0], id="single point"),
            pytest.param([1, 2], [1.0, 0.0], id="zero value"),
            pytest.param([0, 2], [1.0, 0.5], id="zero abscissa"),
            pytest.param([1, 2, 3], [1.0, 0.5], id="unpaired"),
        ],
    )
    def test_rejects_unfittable_data(self, ns: list, values: list) -> None:
        """
        Given: Data that has no log-log slope
        When: Fitting it
        Then: A SlopeFitError is raised
        """
        with pytest.raises(SlopeFitError):
            fit_loglog_slope(np.array(ns), np.array(values))
