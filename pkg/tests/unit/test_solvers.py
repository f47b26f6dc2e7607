"""Test the full order models and the snapshot generation."""

import numpy as np
import pytest

from latent_dim.exceptions import (
    CFLViolationError,
    SnapshotGenerationError,
    SolverError,
)
from latent_dim.geometry import (
    FieldVector,
    StructuredTriMesh,
    assemble_mass_matrix,
    assemble_stiffness,
    build_unit_square_mesh,
    build_uniform_grid,
    vh_norm,
)
from latent_dim.random_fields import burgers_initial_profile, squared_exponential_basis
from latent_dim.solvers import (
    BurgersProblem,
    CookieProblem,
    DarcyProblem,
    SnapshotSet,
    darcy_perturbation_ratios,
    generate_snapshots,
    godunov_flux,
    solve_burgers,
    solve_cookie,
    solve_darcy,
    solve_diffusion,
)


@pytest.fixture(name="darcy")
def darcy_(mesh: StructuredTriMesh) -> DarcyProblem:
    """Return a Darcy problem on the coarse mesh with a 10 mode sampler."""
    problem = DarcyProblem(mesh=mesh)
    basis = squared_exponential_basis(mesh, problem.mass, m=10)
    return DarcyProblem(mesh=mesh, mass=problem.mass, basis=basis, n_trunc=10)


def _zero_field(mesh: StructuredTriMesh, value: float = 0.0) -> FieldVector:
    return FieldVector(values=np.full(mesh.n_nodes, value), domain=mesh)


class TestDarcy:
    """Test the finite element solver of the Darcy problem."""

    def test_center_value_of_the_poisson_problem(self) -> None:
        """
        Given: A zero log-permeability on a 50x50 mesh
        When: Solving the Darcy problem
        Then: The center value matches the Fourier series of -lap u = 10
        """
        mesh = build_unit_square_mesh(50)

        result = solve_darcy(DarcyProblem(mesh=mesh), _zero_field(mesh))

        assert result.values[25 * 51 + 25] == pytest.approx(0.73671, abs=2e-3)

    def test_boundary_values_are_exactly_zero(self, darcy: DarcyProblem) -> None:
        """
        Given: A random log-permeability
        When: Solving the Darcy problem
        Then: The boundary entries are exactly zero
        """
        sigma = darcy.sample_input(np.random.SeedSequence([1, 0]))

        result = darcy.solve_input(sigma)

        assert np.all(result[darcy.mesh.boundary_nodes] == 0.0)

    def test_constant_permeability_scales_the_solution(
        self, darcy: DarcyProblem
    ) -> None:
        """
        Given: The log-permeabilities 0 and 1
        When: Solving both problems
        Then: The second solution is e^-1 times the first one
        """
        reference = solve_darcy(darcy, _zero_field(darcy.mesh))

        result = solve_darcy(darcy, _zero_field(darcy.mesh, 1.0))

        assert np.allclose(result.values, np.exp(-1.0) * reference.values, rtol=1e-10)

    def test_maximum_principle(self, darcy: DarcyProblem) -> None:
        """
        Given: Several random log-permeabilities
        When: Solving the Darcy problem with the positive forcing
        Then: No solution value is negative
        """
        for index in range(5):
            sigma = darcy.sample_input(np.random.SeedSequence([2, index]))

            result = darcy.solve_input(sigma)

            assert result.min() >= -1e-10

    def test_manufactured_solution_converges_with_second_order(self) -> None:
        """
        Given: The exact solution sin(pi x) sin(pi y) of -lap u = 2 pi^2 u
        When: Solving on three meshes halving the step size
        Then: The L2 error is divided by at least 3.6 at each refinement
        """
        errors = []
        for n_div in (10, 20, 40):
            mesh = build_unit_square_mesh(n_div)
            mass = assemble_mass_matrix(mesh)
            exact = np.sin(np.pi * mesh.nodes[:, 0]) * np.sin(np.pi * mesh.nodes[:, 1])
            stiffness = assemble_stiffness(mesh, np.ones(len(mesh.triangles)))
            solution = solve_diffusion(
                mesh, stiffness, mass @ (2 * np.pi**2 * exact), 0.0
            )
            errors.append(vh_norm(mass, solution - exact))

        result = [errors[0] / errors[1], errors[1] / errors[2]]

        assert min(result) >= 3.6

    def test_solution_is_stable_with_respect_to_the_permeability(
        self, darcy: DarcyProblem
    ) -> None:
        """
        Given: Random pairs of log-permeabilities
        When: Measuring how much the solution moves relative to the perturbation
        Then: The ratio is bounded by the forcing over twice the Poincare constant
        """
        result = darcy_perturbation_ratios(darcy, pairs=200, seed=4)

        assert result.shape == (200,)
        assert np.all(np.isfinite(result))
        assert np.all(result > 0)
        assert result.max() <= 10 / (2 * np.pi**2)

    def test_sampling_needs_a_basis(self, mesh: StructuredTriMesh) -> None:
        """
        Given: A Darcy problem without KL basis
        When: Drawing an input
        Then: A SolverError is raised
        """
        with pytest.raises(SolverError, match="KL basis"):
            DarcyProblem(mesh=mesh).sample_input(np.random.SeedSequence(0))

    def test_forcing_is_fixed(self, mesh: StructuredTriMesh) -> None:
        """
        Given: A forcing different from 10
        When: Building the Darcy problem
        Then: A validation error is raised
        """
        with pytest.raises(ValueError):
            DarcyProblem(mesh=mesh, forcing=1.0)


class TestCookie:
    """Test the finite element solver of the cookie problem."""

    @pytest.fixture(name="cookie")
    def cookie_(self) -> CookieProblem:
        """Return a cookie problem on a 42x42 mesh."""
        return CookieProblem(mesh=build_unit_square_mesh(42))

    def test_boundary_values_are_exactly_the_dirichlet_data(
        self, cookie: CookieProblem
    ) -> None:
        """
        Given: A parameter inside the box
        When: Solving the cookie problem
        Then: The boundary entries are exactly 0.1
        """
        result = solve_cookie(cookie, np.array([2.0, 0.3, 0.6]))

        assert np.all(result.values[cookie.mesh.boundary_nodes] == 0.1)

    def test_source_integrates_to_one(self, cookie: CookieProblem) -> None:
        """
        Given: A source centered a quarter cell away from a node
        When: Integrating its nodal interpolant
        Then: The unit mass of the Gaussian is recovered within 10%
        """
        offset = 0.25 / cookie.mesh.n_div
        source = cookie.source(np.array([1.0, 0.5 + offset, 0.5 + offset]))

        result = np.ones(cookie.mesh.n_nodes) @ (cookie.mass @ source)

        assert result == pytest.approx(1.0, rel=0.1)

    def test_swapping_the_source_coordinates_mirrors_the_solution(
        self, cookie: CookieProblem
    ) -> None:
        """
        Given: Two parameters whose source centers are mirrored by the diagonal
        When: Solving both problems
        Then: The solutions are mirror images of each other
        """
        side = cookie.mesh.n_div + 1
        reference = solve_cookie(cookie, np.array([3.0, 0.2, 0.7])).values

        result = solve_cookie(cookie, np.array([3.0, 0.7, 0.2])).values

        mirrored = reference.reshape(side, side).T.ravel()
        assert np.allclose(result, mirrored, rtol=0, atol=1e-10)

    def test_inclusion_is_a_disk(self, cookie: CookieProblem) -> None:
        """
        Given: The default inclusion
        When: Measuring the area of the marked triangles
        Then: It's close to the area of a disk of radius 0.2
        """
        areas = cookie.mesh.signed_areas()

        result = float(areas @ cookie.inclusion())

        assert result == pytest.approx(np.pi * 0.2**2, rel=0.05)

    @pytest.mark.parametrize(
        "mu",
        [
            pytest.param([0.5, 0.5, 0.5], id="low permeability"),
            pytest.param([2.0, 0.05, 0.5], id="source outside"),
            pytest.param([2.0, 0.5], id="missing parameter"),
        ],
    )
    def test_rejects_parameters_outside_the_box(
        self, cookie: CookieProblem, mu: list
    ) -> None:
        """
        Given: A parameter outside of [1, 4] x [0.1, 0.9]^2
        When: Solving the cookie problem
        Then: A SolverError is raised
        """
        with pytest.raises(SolverError, match="parameter box"):
            solve_cookie(cookie, np.array(mu))

    def test_sampled_parameters_are_inside_the_box(self, cookie: CookieProblem) -> None:
        """
        Given: A cookie problem
        When: Drawing parameters
        Then: They lie in the parameter box
        """
        result = np.array(
            [cookie.sample_input(np.random.SeedSequence([0, index])) for index in range(50)]
        )

        assert np.all((result[:, 0] >= 1.0) & (result[:, 0] <= 4.0))
        assert np.all((result[:, 1:] >= 0.1) & (result[:, 1:] <= 0.9))

    def test_epsilon_must_be_positive(self, mesh: StructuredTriMesh) -> None:
        """
        Given: A zero source width
        When: Building the cookie problem
        Then: A validation error is raised
        """
        with pytest.raises(ValueError, match="epsilon"):
            CookieProblem(mesh=mesh, epsilon=0.0)


class TestBurgers:
    """Test the Godunov scheme of the inviscid Burgers equation."""

    @pytest.fixture(name="burgers")
    def burgers_(self) -> BurgersProblem:
        """Return the default Burgers problem, 500 cells over (0, 5) up to T = 2."""
        return BurgersProblem()

    @pytest.mark.parametrize(
        ("left", "right", "expected"),
        [
            pytest.param(1.0, 0.0, 0.25, id="shock"),
            pytest.param(0.0, 1.0, 0.0, id="rarefaction"),
            pytest.param(-1.0, 1.0, 0.0, id="transonic rarefaction"),
            pytest.param(0.5, 0.5, 0.0625, id="constant"),
        ],
    )
    def test_godunov_flux(self, left: float, right: float, expected: float) -> None:
        """
        Given: A Riemann problem
        When: Computing the Godunov flux of v^2 / 4
        Then: The flux of the exact interface state is returned
        """
        result = godunov_flux(np.array([left]), np.array([right]))

        assert result[0] == pytest.approx(expected)

    def test_constant_initial_condition_is_stationary(
        self, burgers: BurgersProblem
    ) -> None:
        """
        Given: A constant initial condition
        When: Evolving it
        Then: It stays the same
        """
        initial = FieldVector(values=np.full(500, 0.3), domain=burgers.grid)

        result = solve_burgers(burgers, initial)

        assert np.array_equal(result.values, initial.values)

    def test_riemann_shock_moves_at_the_rankine_hugoniot_speed(
        self, burgers: BurgersProblem
    ) -> None:
        """
        Given: The initial condition 1 for x < 1 and 0 after
        When: Evolving it up to T = 2
        Then: The shock sits at x = 1.5 within two cells
        """
        centers = burgers.grid.centers
        initial = FieldVector(values=np.where(centers < 1.0, 1.0, 0.0), domain=burgers.grid)

        result = solve_burgers(burgers, initial)

        shock = centers[np.argmax(result.values < 0.5)]
        assert abs(shock - 1.5) <= 2 * burgers.grid.h

    def test_mass_changes_only_through_the_boundaries(
        self, burgers: BurgersProblem
    ) -> None:
        """
        Given: A random initial condition
        When: Advancing it step by step
        Then: The mass changes by dt times the net boundary flux at every step
        """
        values = burgers.sample_input(np.random.SeedSequence([3, 0]))
        inflow = float(values[0])

        for _ in range(50):
            updated, flux_in, flux_out = burgers.step(values, inflow)

            change = burgers.grid.h * (updated.sum() - values.sum())
            assert change == pytest.approx(burgers.dt * (flux_in - flux_out), abs=1e-12)
            values = updated

    @pytest.mark.parametrize("initial_kind", ["bump", "riemann"])
    def test_total_variation_does_not_increase(
        self, burgers: BurgersProblem, initial_kind: str
    ) -> None:
        """
        Given: An initial condition that is constant near the inflow
        When: Advancing it step by step
        Then: The total variation never grows
        """
        centers = burgers.grid.centers
        if initial_kind == "bump":
            values = 0.5 * burgers_initial_profile(centers)
        else:
            values = np.where(centers < 1.0, 1.0, 0.0)
        inflow = float(values[0])
        variation = np.abs(np.diff(values)).sum()

        for _ in range(burgers.n_steps):
            values, _, _ = burgers.step(values, inflow)

            result = np.abs(np.diff(values)).sum()
            assert result <= variation + 1e-12
            variation = result

    def test_large_time_step_breaks_the_cfl_condition(self) -> None:
        """
        Given: A time step much larger than the cell width
        When: Evolving an initial condition
        Then: A CFLViolationError is raised
        """
        problem = BurgersProblem(grid=build_uniform_grid(5.0, 500), dt=1.0)
        initial = FieldVector(values=np.full(500, 0.5), domain=problem.grid)

        with pytest.raises(CFLViolationError, match="CFL number"):
            solve_burgers(problem, initial)

    def test_default_problem_takes_two_hundred_steps(
        self, burgers: BurgersProblem
    ) -> None:
        """
        Given: The default Burgers problem
        When: Counting its time steps
        Then: There are T / dt = 200 of them
        """
        result = burgers.n_steps

        assert result == 200
        assert burgers.cfl(np.full(500, 0.5), 0.5) == pytest.approx(0.25)


class TestSnapshotGeneration:
    """Test the generation of input and output pairs."""

    def test_snapshot_shapes_and_split(self, darcy: DarcyProblem) -> None:
        """
        Given: A Darcy problem
        When: Generating 10 snapshots with the default split
        Then: There are 9 training and 1 test rows of nodal fields
        """
        result = generate_snapshots(darcy, 10, seed=5)

        assert result.inputs.shape == result.outputs.shape == (10, darcy.mesh.n_nodes)
        assert (result.n_train, result.n_test) == (9, 1)
        assert np.array_equal(result.test_outputs, result.outputs[9:])

    def test_generation_is_deterministic(self, darcy: DarcyProblem) -> None:
        """
        Given: A Darcy problem and a seed
        When: Generating the snapshots twice
        Then: The values are bit for bit equal
        """
        first = generate_snapshots(darcy, 4, seed=6)

        result = generate_snapshots(darcy, 4, seed=6)

        assert result.inputs.tobytes() == first.inputs.tobytes()
        assert result.outputs.tobytes() == first.outputs.tobytes()

    def test_workers_dont_change_the_result(self, darcy: DarcyProblem) -> None:
        """
        Given: A Darcy problem and a seed
        When: Generating the snapshots with one and two workers
        Then: The values are bit for bit equal
        """
        first = generate_snapshots(darcy, 5, seed=7, jobs=1)

        result = generate_snapshots(darcy, 5, seed=7, jobs=2)

        assert result.inputs.tobytes() == first.inputs.tobytes()
        assert result.outputs.tobytes() == first.outputs.tobytes()

    def test_snapshot_only_depends_on_its_index(self, darcy: DarcyProblem) -> None:
        """
        Given: Two snapshot sets of different sizes with the same seed
        When: Comparing their common rows
        Then: They are equal
        """
        short = generate_snapshots(darcy, 3, seed=8)

        result = generate_snapshots(darcy, 6, seed=8)

        assert np.array_equal(result.inputs[:3], short.inputs)

    def test_burgers_snapshots_have_one_value_per_cell(self) -> None:
        """
        Given: A coarse Burgers problem
        When: Generating snapshots
        Then: Inputs and outputs have one value per cell
        """
        problem = BurgersProblem(grid=build_uniform_grid(5.0, 50), dt=0.05)

        result = generate_snapshots(problem, 4, seed=9, train_fraction=0.5)

        assert result.inputs.shape == result.outputs.shape == (4, 50)
        assert result.n_train == 2

    def test_failures_report_the_snapshot_index(self, mesh: StructuredTriMesh) -> None:
        """
        Given: A Darcy problem that can't draw inputs
        When: Generating snapshots
        Then: A SnapshotGenerationError with the failing index is raised
        """
        with pytest.raises(SnapshotGenerationError, match="Snapshot 0") as error:
            generate_snapshots(DarcyProblem(mesh=mesh), 3, seed=1)

        assert error.value.index == 0

    def test_needs_two_snapshots(self, darcy: DarcyProblem) -> None:
        """
        Given: A Darcy problem
        When: Asking for a single snapshot
        Then: A SnapshotGenerationError is raised
        """
        with pytest.raises(SnapshotGenerationError, match="at least two"):
            generate_snapshots(darcy, 1, seed=1)

    def test_snapshot_set_checks_the_split(self) -> None:
        """
        Given: A training split larger than the set
        When: Building the snapshot set
        Then: A validation error is raised
        """
        with pytest.raises(ValueError, match="training split"):
            SnapshotSet(inputs=np.zeros((2, 3)), outputs=np.zeros((2, 3)), n_train=3, seed=0)
