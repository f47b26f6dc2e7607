"""Define the full order models and the generation of snapshots.

Three problems are available: the stochastic Darcy flow, the cookie problem with
three random parameters and the inviscid Burgers equation with random initial
data. Each of them knows how to draw a random input and how to solve for it, so
`generate_snapshots` can treat them alike.
"""

import abc
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, root_validator
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .exceptions import CFLViolationError, LatentDimError, SnapshotGenerationError, SolverError
from .geometry import (
    FieldVector,
    StructuredTriMesh,
    SymmetricSparseMatrix,
    UniformGrid1D,
    assemble_darcy_stiffness,
    assemble_mass_matrix,
    assemble_stiffness,
    build_uniform_grid,
    grid_mass_matrix,
    vh_norm,
)
from .random_fields import KLBasis, sample_burgers_ic, sample_field, sample_fields

log = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-10


class SnapshotSet(BaseModel):
    """Model a collection of input / output realizations of a full order model.

    The first `n_train` rows form the training split, the rest the test split.
    """

    inputs: np.ndarray
    outputs: np.ndarray
    n_train: int
    seed: int

    class Config:
        """Configure the pydantic model."""

        arbitrary_types_allowed = True

    @root_validator(skip_on_failure=True)
    @classmethod
    def _check_split(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        if len(values["inputs"]) != len(values["outputs"]):
            raise ValueError("inputs and outputs must have the same number of rows")
        if not 0 <= values["n_train"] <= len(values["inputs"]):
            raise ValueError("the training split doesn't fit in the snapshot set")
        return values

    @property
    def n_test(self) -> int:
        """Return the size of the test split."""
        return len(self.inputs) - self.n_train

    @property
    def train_inputs(self) -> np.ndarray:
        """Return the inputs of the training split."""
        return self.inputs[: self.n_train]

    @property
    def train_outputs(self) -> np.ndarray:
        """Return the outputs of the training split."""
        return self.outputs[: self.n_train]

    @property
    def test_inputs(self) -> np.ndarray:
        """Return the inputs of the test split."""
        return self.inputs[self.n_train :]

    @property
    def test_outputs(self) -> np.ndarray:
        """Return the outputs of the test split."""
        return self.outputs[self.n_train :]


class FullOrderModel(BaseModel, abc.ABC):
    """Define the interface of the full order models used to build snapshots."""

    class Config:
        """Configure the pydantic model."""

        arbitrary_types_allowed = True

    @abc.abstractmethod
    def sample_input(self, seed: np.random.SeedSequence) -> np.ndarray:
        """Draw a random input with a generator owned by this call."""
        raise NotImplementedError

    @abc.abstractmethod
    def solve_input(self, values: np.ndarray) -> np.ndarray:
        """Run the full order model on an input and return the output values."""
        raise NotImplementedError

    @property
    @abc.abstractmethod
    def input_mass(self) -> SymmetricSparseMatrix:
        """Return the matrix that induces the norm of the input space."""
        raise NotImplementedError

    @property
    @abc.abstractmethod
    def output_mass(self) -> SymmetricSparseMatrix:
        """Return the matrix that induces the norm of the output space."""
        raise NotImplementedError


def solve_diffusion(
    mesh: StructuredTriMesh,
    stiffness: SymmetricSparseMatrix,
    load: np.ndarray,
    boundary_value: float,
) -> np.ndarray:
    """Solve the stiffness system with a constant Dirichlet condition.

    The boundary rows and columns are eliminated symmetrically, the boundary values
    being moved to the right hand side, so the interior system stays SPD.

    Raises:
        SolverError: if the relative residual of the interior system is above
            the tolerance.
    """
    interior = mesh.interior_nodes
    boundary = mesh.boundary_nodes
    solution = np.zeros(mesh.n_nodes)
    solution[boundary] = boundary_value

    interior_matrix = stiffness[interior][:, interior].tocsc()
    right_hand_side = load[interior] - stiffness[interior][:, boundary] @ solution[boundary]
    interior_values = spsolve(interior_matrix, right_hand_side)

    residual = np.linalg.norm(interior_matrix @ interior_values - right_hand_side)
    scale = max(np.linalg.norm(right_hand_side), np.finfo(float).tiny)
    if not np.all(np.isfinite(interior_values)) or residual > RESIDUAL_TOLERANCE * scale:
        raise SolverError(
            f"Linear solve did not converge, relative residual {residual / scale:.3e}"
        )
    solution[interior] = interior_values
    return solution


class DarcyProblem(FullOrderModel):
    """Model -div(e^sigma grad u) = 10 in the unit square with u = 0 on the boundary.

    Attributes:
        basis: Karhunen-Loeve expansion of the log-permeability, needed only to
            draw random inputs.
        n_trunc: number of expansion terms used by the sampler.
    """

    mesh: StructuredTriMesh
    forcing: float = Field(10.0, const=True)
    boundary_value: float = Field(0.0, const=True)
    basis: Optional[KLBasis] = None
    n_trunc: Optional[int] = None
    mass: Optional[SymmetricSparseMatrix] = None

    @root_validator(skip_on_failure=True)
    @classmethod
    def _assemble_mass(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        if values.get("mass") is None:
            values["mass"] = assemble_mass_matrix(values["mesh"])
        return values

    @property
    def input_mass(self) -> SymmetricSparseMatrix:
        """Return the mass matrix of the log-permeability space."""
        return self.mass

    @property
    def output_mass(self) -> SymmetricSparseMatrix:
        """Return the mass matrix of the solution space."""
        return self.mass

    def sample_input(self, seed: np.random.SeedSequence) -> np.ndarray:
        """Draw a log-permeability from the Karhunen-Loeve sampler."""
        if self.basis is None:
            raise SolverError("The Darcy problem needs a KL basis to sample inputs")
        n_trunc = self.basis.size if self.n_trunc is None else self.n_trunc
        return sample_field(self.basis, n_trunc, seed).values

    def solve_input(self, values: np.ndarray) -> np.ndarray:
        """Solve the problem for a nodal log-permeability."""
        return solve_darcy(self, FieldVector(values=values, domain=self.mesh)).values


def solve_darcy(problem: DarcyProblem, sigma: FieldVector) -> FieldVector:
    """Solve the Darcy problem for the log-permeability sigma.

    Raises:
        DimensionMismatchError: if sigma is not a nodal field of the problem mesh.
        SolverError: if the linear solve fails.
    """
    stiffness = assemble_darcy_stiffness(problem.mesh, sigma)
    load = problem.mass @ np.full(problem.mesh.n_nodes, problem.forcing)
    values = solve_diffusion(problem.mesh, stiffness, load, problem.boundary_value)
    return FieldVector(values=values, domain=problem.mesh)


class CookieProblem(FullOrderModel):
    """Model -div(sigma_mu grad u) = f_mu with u = 0.1 on the boundary.

    sigma_mu = 1/2 + mu_1 on the inclusion (a disk) and 1/2 elsewhere; f_mu is a
    Gaussian bump of width epsilon centered at (mu_2, mu_3).
    """

    mesh: StructuredTriMesh
    epsilon: float = 0.01
    boundary_value: float = 0.1
    disk_center: Tuple[float, float] = (0.5, 0.5)
    disk_radius: float = 0.2
    permeability_range: Tuple[float, float] = (1.0, 4.0)
    source_range: Tuple[float, float] = (0.1, 0.9)
    mass: Optional[SymmetricSparseMatrix] = None

    @root_validator(skip_on_failure=True)
    @classmethod
    def _check_and_assemble(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        if values["epsilon"] <= 0:
            raise ValueError("the source width epsilon must be positive")
        if values.get("mass") is None:
            values["mass"] = assemble_mass_matrix(values["mesh"])
        return values

    @property
    def input_mass(self) -> SymmetricSparseMatrix:
        """Return the Euclidean inner product of the parameter space."""
        return sparse.identity(3, format="csr")

    @property
    def output_mass(self) -> SymmetricSparseMatrix:
        """Return the mass matrix of the solution space."""
        return self.mass

    def inclusion(self) -> np.ndarray:
        """Return the indicator of the inclusion evaluated at the barycenters."""
        offsets = self.mesh.barycenters() - np.array(self.disk_center)
        return (np.hypot(offsets[:, 0], offsets[:, 1]) <= self.disk_radius).astype(float)

    def source(self, mu: np.ndarray) -> np.ndarray:
        """Interpolate the Gaussian source of center (mu_2, mu_3) at the nodes."""
        squared = np.sum((self.mesh.nodes - mu[1:3]) ** 2, axis=1)
        return np.exp(-squared / (2 * self.epsilon**2)) / (2 * np.pi * self.epsilon**2)

    def sample_input(self, seed: np.random.SeedSequence) -> np.ndarray:
        """Draw the three parameters uniformly in the parameter box."""
        generator = np.random.default_rng(seed)
        low = np.array([self.permeability_range[0], *[self.source_range[0]] * 2])
        high = np.array([self.permeability_range[1], *[self.source_range[1]] * 2])
        return generator.uniform(low, high)

    def solve_input(self, values: np.ndarray) -> np.ndarray:
        """Solve the problem for a parameter vector."""
        return solve_cookie(self, values).values


def solve_cookie(problem: CookieProblem, mu: np.ndarray) -> FieldVector:
    """Solve the cookie problem for the parameters mu = (mu_1, mu_2, mu_3).

    Raises:
        SolverError: if the parameters are outside of the parameter box or the
            linear solve fails.
    """
    mu = np.asarray(mu, dtype=float)
    low, high = problem.permeability_range
    source_low, source_high = problem.source_range
    if (
        mu.shape != (3,)
        or not low <= mu[0] <= high
        or not np.all((mu[1:] >= source_low) & (mu[1:] <= source_high))
    ):
        raise SolverError(f"Cookie parameters {mu} outside of the parameter box")

    coefficients = 0.5 + mu[0] * problem.inclusion()
    stiffness = assemble_stiffness(problem.mesh, coefficients)
    load = problem.mass @ problem.source(mu)
    values = solve_diffusion(problem.mesh, stiffness, load, problem.boundary_value)
    return FieldVector(values=values, domain=problem.mesh)


def godunov_flux(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Return the exact Godunov flux of f(v) = v^2 / 4 at the cell interfaces.

    For the convex flux the Riemann fan gives min f over [left, right] when
    left <= right and max f over [right, left] otherwise.
    """
    flux_left = 0.25 * left**2
    flux_right = 0.25 * right**2
    rarefaction = np.where(
        (left <= 0.0) & (right >= 0.0), 0.0, np.minimum(flux_left, flux_right)
    )
    return np.where(left <= right, rarefaction, np.maximum(flux_left, flux_right))


class BurgersProblem(FullOrderModel):
    """Model v_t + (v^2 / 4)_x = 0 on (0, L) with stationary inflow on the left.

    The left ghost cell keeps the initial value of the first cell, the right
    boundary is a zero gradient outflow.
    """

    grid: UniformGrid1D = Field(default_factory=lambda: build_uniform_grid(5.0, 500))
    dt: float = 0.01
    final_time: float = 2.0
    series_terms: int = 200

    @property
    def n_steps(self) -> int:
        """Return the number of time steps to reach the final time."""
        return int(round(self.final_time / self.dt))

    @property
    def input_mass(self) -> SymmetricSparseMatrix:
        """Return the finite volume mass matrix."""
        return grid_mass_matrix(self.grid)

    @property
    def output_mass(self) -> SymmetricSparseMatrix:
        """Return the finite volume mass matrix."""
        return grid_mass_matrix(self.grid)

    def cfl(self, values: np.ndarray, inflow: float) -> float:
        """Return dt * max|v| / (2 h), including the inflow state."""
        speed = max(float(np.max(np.abs(values))), abs(inflow))
        return self.dt * speed / (2 * self.grid.h)

    def step(self, values: np.ndarray, inflow: float) -> Tuple[np.ndarray, float, float]:
        """Advance the cell averages by one Godunov step.

        Returns:
            The new cell averages, the flux entering through the left boundary and
            the flux leaving through the right one.

        Raises:
            CFLViolationError: if the CFL number is above one.
        """
        cfl = self.cfl(values, inflow)
        if cfl > 1.0:
            raise CFLViolationError(
                f"CFL number {cfl:.3f} > 1 with dt={self.dt} and h={self.grid.h}"
            )
        extended = np.concatenate([[inflow], values, [values[-1]]])
        fluxes = godunov_flux(extended[:-1], extended[1:])
        updated = values - self.dt / self.grid.h * (fluxes[1:] - fluxes[:-1])
        return updated, float(fluxes[0]), float(fluxes[-1])

    def sample_input(self, seed: np.random.SeedSequence) -> np.ndarray:
        """Draw a random clamped initial condition."""
        return sample_burgers_ic(self.grid, self.series_terms, seed).values

    def solve_input(self, values: np.ndarray) -> np.ndarray:
        """Evolve an initial condition up to the final time."""
        return solve_burgers(self, FieldVector(values=values, domain=self.grid)).values


def solve_burgers(problem: BurgersProblem, initial: FieldVector) -> FieldVector:
    """Evolve the cell averaged initial condition up to the final time.

    Raises:
        CFLViolationError: if a step breaks the CFL condition.
    """
    values = initial.values.copy()
    inflow = float(values[0])
    for step in range(problem.n_steps):
        try:
            values, _, _ = problem.step(values, inflow)
        except CFLViolationError as error:
            raise CFLViolationError(f"Step {step}: {error}") from error
    return FieldVector(values=values, domain=problem.grid)


def snapshot_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Return the seed of a snapshot, a function of the global seed and its index."""
    return np.random.SeedSequence([seed, index])


def _solve_range(
    problem: FullOrderModel, seed: int, indices: List[int]
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Generate the snapshots of a range of indices."""
    pairs = []
    for index in indices:
        try:
            values = problem.sample_input(snapshot_seed(seed, index))
            pairs.append((values, problem.solve_input(values)))
        except LatentDimError as error:
            raise SnapshotGenerationError(
                f"Snapshot {index} failed: {error}", index=index
            ) from error
    return pairs


def generate_snapshots(
    problem: FullOrderModel,
    count: int,
    seed: int,
    train_fraction: float = 0.9,
    jobs: int = 1,
) -> SnapshotSet:
    """Sample and solve `count` realizations of the full order model.

    Every snapshot depends only on (seed, index), so the result doesn't depend on
    the number of workers.

    Raises:
        SnapshotGenerationError: if the model fails, with the failing index.
    """
    if count < 2:
        raise SnapshotGenerationError(f"Need at least two snapshots, got {count}", -1)
    chunks = [list(chunk) for chunk in np.array_split(np.arange(count), max(jobs, 1))]
    chunks = [[int(index) for index in chunk] for chunk in chunks if len(chunk)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            results = list(
                executor.map(_solve_range, [problem] * len(chunks), [seed] * len(chunks), chunks)
            )
    else:
        results = [_solve_range(problem, seed, chunk) for chunk in chunks]
    pairs = [pair for chunk_pairs in results for pair in chunk_pairs]
    log.info(f"Generated {count} snapshots with seed {seed}")
    return SnapshotSet(
        inputs=np.stack([pair[0] for pair in pairs]),
        outputs=np.stack([pair[1] for pair in pairs]),
        n_train=int(round(train_fraction * count)),
        seed=seed,
    )


def darcy_perturbation_ratios(
    problem: DarcyProblem, pairs: int, seed: int
) -> np.ndarray:
    """Measure how the Darcy solution reacts to perturbations of sigma.

    For random pairs (sigma, sigma') drawn from the problem sampler returns
    |u - u'| / (|sigma - sigma'|_inf * exp(3 |sigma|_inf + 3 |sigma'|_inf)), which
    the stability estimate of the operator bounds by a constant times the norm
    of the forcing.
    """
    if problem.basis is None:
        raise SolverError("The Darcy problem needs a KL basis to sample inputs")
    n_trunc = problem.basis.size if problem.n_trunc is None else problem.n_trunc
    inputs = sample_fields(problem.basis, n_trunc, seed, count=2 * pairs)
    ratios = np.empty(pairs)
    for index in range(pairs):
        sigma, other = inputs[2 * index], inputs[2 * index + 1]
        difference = problem.solve_input(sigma) - problem.solve_input(other)
        sup_sigma = float(np.max(np.abs(sigma)))
        sup_other = float(np.max(np.abs(other)))
        ratios[index] = vh_norm(problem.mass, difference) / (
            float(np.max(np.abs(sigma - other))) * np.exp(3 * sup_sigma + 3 * sup_other)
        )
    return ratios
