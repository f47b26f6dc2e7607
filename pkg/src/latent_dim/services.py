"""Define all the orchestration functionality required by the program to work.

Functions that connect the numerical modules with the artifact repositories to run
the generate, sweep, table1, gradcheck and selftest commands.
"""

import logging
from typing import TYPE_CHECKING, AnyStr, Dict, List, Tuple, Union

import numpy as np
from pydantic import BaseModel

from .adapters.file.local_file import LocalFileRepository
from .adapters.formats import (
    SnapshotMatrix,
    decode_snapshots,
    encode_snapshots,
    format_csv,
    format_split,
    parse_split,
)
from .config import StudyConfig, TrainConfig
from .dlrom import (
    DLROM,
    Architecture,
    SweepData,
    active_networks,
    build_dlrom,
    compute_test_error,
    dlrom_loss,
    latent_sweep,
    train,
    truncate_basis,
)
from .exceptions import (
    ConfigError,
    LatentDimError,
    MissingSnapshotsError,
    SnapshotFormatError,
)
from .geometry import (
    FieldVector,
    assemble_mass_matrix,
    assemble_stiffness,
    build_unit_square_mesh,
    build_uniform_grid,
    domain_points,
    grid_mass_matrix,
    lattice_points,
)
from .model import CheckpointManifest, CheckResult, ErrorDecayReport, File, Table1Report
from .neural import (
    Activation,
    AdamState,
    Network,
    adam_step,
    backward,
    build_dense_layer,
    build_mesh_informed_layer,
    finite_difference_check,
    flatten_gradients,
    forward,
    network_from_bytes,
    network_to_bytes,
    predict,
)
from .random_fields import (
    CovarianceKernel,
    KLBasis,
    assemble_covariance_matrix,
    kl_decompose,
    linf_tail,
    mode_sup_norms,
)
from .reduction import fit_loglog_slope, pod
from .solvers import (
    BurgersProblem,
    CookieProblem,
    DarcyProblem,
    FullOrderModel,
    SnapshotSet,
    generate_snapshots,
    solve_burgers,
    solve_darcy,
)

if TYPE_CHECKING:
    from .adapters.file.abstract import FileRepository

log = logging.getLogger(__name__)

SNAPSHOT_DIR = "snapshots"
SWEEP_DIR = "sweep"
TABLE1_DIR = "table1"


def load_file_repository(url: str = "local:.") -> "FileRepository[AnyStr]":
    """Load the FileRepository object that matches the url protocol.

    Args:
        url: Url to connect to the storage backend.

    Returns:
        File Repository that understands the url protocol.

    Raises:
        ConfigError: if the url protocol is not known or the directory is not
            writable.
    """
    if url.startswith("local:"):
        try:
            return LocalFileRepository(workdir=url.split(":", 1)[1])
        except OSError as error:
            raise ConfigError(
                f"Can't use {url} as output directory: {error}", fields=["output.directory"]
            ) from error

    raise ConfigError(f"File Repository URL: {url} not recognized.")


def study_repository(config: StudyConfig) -> "FileRepository[AnyStr]":
    """Return the repository of the study output directory."""
    return load_file_repository(f"local:{config.output.directory}")


def build_problem(config: StudyConfig) -> FullOrderModel:
    """Build the full order model described by the configuration."""
    kind = config.problem.kind
    if kind == "burgers":
        return BurgersProblem(
            grid=build_uniform_grid(config.burgers.length, config.burgers.n_cells),
            dt=config.burgers.dt,
            final_time=config.burgers.final_time,
            series_terms=config.burgers.series_terms,
        )
    mesh = build_unit_square_mesh(config.mesh.n_div)
    if kind == "cookie":
        return CookieProblem(
            mesh=mesh,
            epsilon=config.cookie.epsilon,
            boundary_value=config.cookie.boundary_value,
            disk_center=(config.cookie.disk_center_x, config.cookie.disk_center_y),
            disk_radius=config.cookie.disk_radius,
        )
    darcy = DarcyProblem(mesh=mesh)
    field = config.random_field
    covariance = assemble_covariance_matrix(
        CovarianceKernel(length_scale=field.length_scale), mesh
    )
    kl_modes = min(field.kl_modes or mesh.n_nodes, mesh.n_nodes)
    basis = kl_decompose(
        covariance, darcy.mass, kl_modes, mesh, mass_lumping=field.mass_lumping
    )
    n_trunc = kl_modes if field.n_trunc is None else min(field.n_trunc, kl_modes)
    return DarcyProblem(mesh=mesh, mass=darcy.mass, basis=basis, n_trunc=n_trunc)


def build_architecture(config: StudyConfig, problem: FullOrderModel) -> Architecture:
    """Describe the degrees of freedom of the networks of the problem."""
    if isinstance(problem, BurgersProblem):
        centers = problem.grid.centers[:, None]
        return Architecture(
            kind="burgers",
            output_points=centers,
            input_points=centers,
            input_width=len(centers),
            length=problem.grid.length,
        )
    nodes = domain_points(problem.mesh)
    if isinstance(problem, CookieProblem):
        return Architecture(kind="cookie", output_points=nodes, input_width=3)
    return Architecture(
        kind="darcy", output_points=nodes, input_points=nodes, input_width=len(nodes)
    )


class GenerateResult(BaseModel):
    """Summarize the snapshot files written by the generate command."""

    rows: int
    input_cols: int
    output_cols: int
    n_train: int
    checksums: Dict[str, str]


def _snapshot_path(name: str) -> str:
    return f"{SNAPSHOT_DIR}/{name}"


def generate(config: StudyConfig, jobs: int = 1) -> GenerateResult:
    """Generate the snapshots of the study and store them.

    Raises:
        SnapshotGenerationError: if the full order model fails on a snapshot.
    """
    repository = study_repository(config)
    problem = build_problem(config)
    snapshots = generate_snapshots(
        problem,
        config.snapshots.count,
        config.snapshots.seed,
        train_fraction=config.snapshots.train_fraction,
        jobs=jobs,
    )
    digest = config.config_digest()
    checksums = {}
    for name, values in (("inputs.ldsn", snapshots.inputs), ("outputs.ldsn", snapshots.outputs)):
        matrix = SnapshotMatrix(values=values, seed=snapshots.seed, config_digest=digest)
        file_ = repository.save(
            File.from_content(_snapshot_path(name), encode_snapshots(matrix))
        )
        checksums[name] = file_.checksum
        log.info(f"Wrote {file_.path} with checksum {file_.checksum}")
    repository.save(
        File.from_content(
            _snapshot_path("split.txt"),
            format_split(
                snapshots.n_train,
                snapshots.n_test,
                config.config_hash(),
                snapshots.seed,
            ),
        )
    )
    return GenerateResult(
        rows=len(snapshots.inputs),
        input_cols=snapshots.inputs.shape[1],
        output_cols=snapshots.outputs.shape[1],
        n_train=snapshots.n_train,
        checksums=checksums,
    )


def load_snapshots(config: StudyConfig) -> SnapshotSet:
    """Read the snapshots written by `generate`.

    Raises:
        MissingSnapshotsError: if the files don't exist.
        SnapshotFormatError: if a file is corrupted.
    """
    repository = study_repository(config)
    matrices = []
    for name in ("inputs.ldsn", "outputs.ldsn"):
        path = _snapshot_path(name)
        if not repository.exists(path):
            raise MissingSnapshotsError(
                f"Snapshot file {path} not found in {repository.workdir}, "
                "run `latent-dim generate` first"
            )
        file_ = repository.load(File(path=path, is_bytes=True))
        matrices.append(decode_snapshots(file_.content))
    split = repository.load(File(path=_snapshot_path("split.txt")))
    n_train, n_test = parse_split(split.content)
    if n_train + n_test != len(matrices[0].values):
        raise SnapshotFormatError(
            f"The split {n_train}/{n_test} doesn't match the "
            f"{len(matrices[0].values)} snapshots"
        )

    if matrices[0].config_digest != config.config_digest():
        log.warning("The snapshots were generated with a different configuration")
    return SnapshotSet(
        inputs=matrices[0].values,
        outputs=matrices[1].values,
        n_train=n_train,
        seed=matrices[0].seed,
    )


class InputSpectrum(BaseModel):
    """Store the spectral description of the input law used by the sweep.

    Attributes:
        basis: expansion of the input, None for parameter vectors.
    """

    eigenvalues: np.ndarray
    energy: float
    basis: Union[KLBasis, None] = None

    class Config:
        """Configure the pydantic model."""

        arbitrary_types_allowed = True


def input_spectrum(problem: FullOrderModel, snapshots: SnapshotSet) -> InputSpectrum:
    """Describe the law of the inputs.

    The Darcy log-permeability uses its exact Karhunen-Loeve expansion restricted to
    the sampled terms. Other inputs use the POD of the training inputs, which
    approximates the uncentered covariance operator.
    """
    if isinstance(problem, DarcyProblem) and problem.basis is not None:
        n_trunc = problem.basis.size if problem.n_trunc is None else problem.n_trunc
        eigenvalues = problem.basis.eigenvalues[:n_trunc]
        basis = problem.basis.copy(
            update={
                "eigenvalues": eigenvalues,
                "modes": problem.basis.modes[:, :n_trunc],
                "total_energy": float(np.sum(eigenvalues)),
            }
        )
        return InputSpectrum(
            eigenvalues=eigenvalues, energy=float(np.sum(eigenvalues)), basis=basis
        )

    inputs = snapshots.train_inputs
    input_basis = pod(
        inputs, problem.input_mass, min(len(inputs), inputs.shape[1])
    )
    basis = None
    if isinstance(problem, BurgersProblem):
        size = input_basis.size
        basis = KLBasis(
            eigenvalues=input_basis.eigenvalues[:size],
            modes=input_basis.modes,
            mean=FieldVector(values=np.zeros(inputs.shape[1]), domain=problem.grid),
            total_energy=input_basis.total_energy,
        )
    return InputSpectrum(
        eigenvalues=input_basis.eigenvalues,
        energy=input_basis.total_energy,
        basis=basis,
    )


def _save_text(repository: "FileRepository[AnyStr]", path: str, text: str) -> None:
    file_ = repository.save(File.from_content(path, text))
    log.info(f"Wrote {file_.path} with checksum {file_.checksum}")


def sweep(config: StudyConfig) -> ErrorDecayReport:
    """Run the latent dimension sweep and store its tables.

    Raises:
        MissingSnapshotsError: if the snapshots have not been generated.
        TrainingDivergedError: with the latent dimension that failed.
    """
    repository = study_repository(config)
    snapshots = load_snapshots(config)
    problem = build_problem(config)
    spectrum = input_spectrum(problem, snapshots)
    widths = config.cookie.widths if config.problem.kind == "cookie" else [None]
    data = SweepData(
        architecture=build_architecture(config, problem),
        snapshots=snapshots,
        output_mass=problem.output_mass,
        input_eigenvalues=spectrum.eigenvalues,
        input_energy=spectrum.energy,
        widths=widths,
    )
    config_hash = config.config_hash()
    seed = config.snapshots.seed
    report = latent_sweep(
        data,
        config.sweep.latent_dims,
        config.train,
        config_hash,
        pod_reference_dims=config.sweep.pod_reference_dims,
    )

    _save_text(
        repository,
        f"{SWEEP_DIR}/report.csv",
        format_csv(
            ["n", "e_ae", "e_pod", "sqrt_tail_mu", "sqrt_tail_u"],
            [
                (row.n, row.e_ae, row.e_pod, row.sqrt_tail_mu, row.sqrt_tail_u)
                for row in report.rows
            ],
            config_hash,
            seed,
        ),
    )
    _save_text(
        repository,
        f"{SWEEP_DIR}/slopes.csv",
        format_csv(
            ["beta_ae", "beta_pod", "beta_mu", "beta_u"],
            [
                (
                    report.slopes.beta_ae,
                    report.slopes.beta_pod,
                    report.slopes.beta_mu,
                    report.slopes.beta_u,
                )
            ],
            config_hash,
            seed,
        ),
    )

    if report.pod_reference:
        _save_text(
            repository,
            f"{SWEEP_DIR}/pod_reference.csv",
            format_csv(
                ["n", "e_pod"], sorted(report.pod_reference.items()), config_hash, seed
            ),
        )

    output_eigenvalues = pod(snapshots.train_outputs, problem.output_mass, 1).eigenvalues
    size = max(len(spectrum.eigenvalues), len(output_eigenvalues))
    _save_text(
        repository,
        f"{SWEEP_DIR}/spectrum.csv",
        format_csv(
            ["i", "lambda_mu", "lambda_u"],
            [
                (
                    index + 1,
                    _entry(spectrum.eigenvalues, index),
                    _entry(output_eigenvalues, index),
                )
                for index in range(size)
            ],
            config_hash,
            seed,
        ),
    )
    if spectrum.basis is not None:
        _save_text(
            repository,
            f"{SWEEP_DIR}/eigenfunction_norms.csv",
            format_csv(
                ["i", "linf_norm_phi_i"],
                [
                    (index + 1, norm)
                    for index, norm in enumerate(mode_sup_norms(spectrum.basis))
                ],
                config_hash,
                seed,
            ),
        )
        _save_text(
            repository,
            f"{SWEEP_DIR}/linf_tail.csv",
            format_csv(
                ["n", "linf_tail"],
                [(n, linf_tail(spectrum.basis, n)) for n in config.sweep.latent_dims],
                config_hash,
                seed,
            ),
        )
    _save_text(repository, f"{SWEEP_DIR}/report.json", report.json(indent=2))
    return report


def _entry(values: np.ndarray, index: int) -> Union[float, None]:
    return float(values[index]) if index < len(values) else None


def _save_checkpoints(
    repository: "FileRepository[AnyStr]", model: DLROM, config_hash: str
) -> CheckpointManifest:
    files = {}
    checksums = {}
    for name, network in model.networks().items():
        path = f"{TABLE1_DIR}/checkpoints/{name}.ldlm"
        file_ = repository.save(File.from_content(path, network_to_bytes(network)))
        files[name] = f"{name}.ldlm"
        checksums[name] = file_.checksum
    manifest = CheckpointManifest(
        latent_dim=model.latent_dim,
        config_hash=config_hash,
        files=files,
        checksums=checksums,
    )
    _save_text(
        repository, f"{TABLE1_DIR}/checkpoints/manifest.json", manifest.json(indent=2)
    )
    return manifest


def load_checkpoints(config: StudyConfig) -> DLROM:
    """Read the DL-ROM stored by `table1`.

    Raises:
        MissingSnapshotsError: if the checkpoint manifest doesn't exist.
        SnapshotFormatError: if a checkpoint doesn't match its manifest checksum.
    """
    repository = study_repository(config)
    path = f"{TABLE1_DIR}/checkpoints/manifest.json"
    if not repository.exists(path):
        raise MissingSnapshotsError(
            f"Checkpoint manifest {path} not found in {repository.workdir}, "
            "run `latent-dim table1` first"
        )
    manifest = CheckpointManifest.parse_raw(repository.load(File(path=path)).content)
    if manifest.config_hash != config.config_hash():
        log.warning("The checkpoints were trained with a different configuration")

    networks = {}
    for name in ("encoder", "decoder", "reduced_map"):
        if name not in manifest.files:
            raise SnapshotFormatError(f"The checkpoint manifest misses the {name}")
        file_ = repository.load(
            File(path=f"{TABLE1_DIR}/checkpoints/{manifest.files[name]}", is_bytes=True)
        )
        if file_.checksum != manifest.checksums.get(name):
            raise SnapshotFormatError(
                f"The {name} checkpoint doesn't match its manifest checksum"
            )
        networks[name] = network_from_bytes(file_.content)
    log.debug(f"Loaded the checkpoints of latent dimension {manifest.latent_dim}")
    return DLROM(
        encoder=networks["encoder"],
        decoder=networks["decoder"],
        reduced_map=networks["reduced_map"],
        latent_dim=manifest.latent_dim,
    )


def table1(config: StudyConfig) -> Table1Report:
    """Train the full DL-ROM and compare its relative errors with the POD ones.

    Raises:
        MissingSnapshotsError: if the snapshots have not been generated.
        TrainingDivergedError: if the training explodes.
    """
    repository = study_repository(config)
    snapshots = load_snapshots(config)
    problem = build_problem(config)
    mass = problem.output_mass
    n = config.table1.latent_dim
    max_modes = min(n, snapshots.n_train, snapshots.outputs.shape[1])
    basis = pod(snapshots.train_outputs, mass, max_modes)
    if basis.rank_limited or max_modes < n:
        log.warning(f"The POD basis has less than {n} modes")

    width = config.cookie.widths[-1] if config.problem.kind == "cookie" else None
    model = build_dlrom(build_architecture(config, problem), n, config.train.seed, width)
    result = train(model, snapshots, mass, config.train)
    errors = {
        "pod": compute_test_error(
            "pod_projection",
            snapshots.test_outputs,
            mass,
            basis=truncate_basis(basis, n),
            relative=True,
        ),
        "ae": compute_test_error(
            "ae_reconstruction",
            snapshots.test_outputs,
            mass,
            model=result.model,
            relative=True,
        ),
        "dlrom": compute_test_error(
            "rom_prediction",
            snapshots.test_outputs,
            mass,
            model=result.model,
            inputs=snapshots.test_inputs,
            relative=True,
        ),
    }
    config_hash = config.config_hash()
    report = Table1Report(
        problem=config.problem.kind,
        n=n,
        pod_percent=100 * errors["pod"],
        ae_percent=100 * errors["ae"],
        dlrom_percent=100 * errors["dlrom"],
        rank_limited=basis.rank_limited or max_modes < n,
        config_hash=config_hash,
        seed=config.snapshots.seed,
    )
    _save_text(
        repository,
        f"{TABLE1_DIR}/table1.csv",
        format_csv(
            ["problem", "n", "pod_percent", "ae_percent", "dlrom_percent"],
            [
                (
                    report.problem,
                    report.n,
                    report.pod_percent,
                    report.ae_percent,
                    report.dlrom_percent,
                )
            ],
            config_hash,
            report.seed,
        ),
    )
    _save_text(repository, f"{TABLE1_DIR}/table1.json", report.json(indent=2))
    _save_checkpoints(repository, result.model, config_hash)
    return report


GRADIENT_TOLERANCE = 1e-6
ACTIVATIONS = (
    Activation(kind="leaky_relu", alpha=0.1),
    Activation(kind="tanh"),
    Activation(kind="soft_clamp"),
    Activation(kind="identity"),
)


def _network_gradient_error(network: Network, generator: np.random.Generator) -> float:
    """Compare backward with finite differences on a random linear functional."""
    batch = generator.uniform(-2.0, 2.0, size=(4, network.n_in))
    weights = generator.standard_normal((len(batch), network.n_out))

    def loss() -> float:
        return float(np.sum(predict(network, batch) * weights))

    _, cache = forward(network, batch)
    gradients, _ = backward(network, cache, weights)
    return finite_difference_check(
        loss, network.parameters(), flatten_gradients(gradients), network.masks()
    )


def _tiny_dlrom(generator: np.random.Generator) -> DLROM:
    activation = Activation(kind="leaky_relu", alpha=0.1)
    return DLROM(
        encoder=Network(
            layers=[
                build_dense_layer(4, 5, activation, generator),
                build_dense_layer(5, 2, Activation(kind="tanh"), generator),
            ]
        ),
        decoder=Network(
            layers=[
                build_dense_layer(2, 5, activation, generator),
                build_dense_layer(5, 4, Activation(kind="identity"), generator),
            ]
        ),
        reduced_map=Network(
            layers=[
                build_dense_layer(3, 4, Activation(kind="tanh"), generator),
                build_dense_layer(4, 2, activation, generator),
            ]
        ),
        latent_dim=2,
    )


def _loss_gradient_error(
    config: TrainConfig, generator: np.random.Generator
) -> float:
    """Compare the three term loss gradients with finite differences."""
    model = _tiny_dlrom(generator)
    mass = assemble_mass_matrix(build_unit_square_mesh(1))
    inputs = generator.uniform(-2.0, 2.0, size=(5, 3))
    outputs = generator.uniform(-2.0, 2.0, size=(5, 4))
    networks = model.networks()
    names = active_networks(config)
    evaluation = dlrom_loss(model, inputs, outputs, mass, config)

    def loss() -> float:
        return dlrom_loss(model, inputs, outputs, mass, config).total

    return finite_difference_check(
        loss,
        [array for name in names for array in networks[name].parameters()],
        [array for name in names for array in evaluation.gradients[name]],
        [mask for name in names for mask in networks[name].masks()],
    )


def run_gradcheck(seed: int = 0) -> List[CheckResult]:
    """Check every activation, both layer kinds and the loss against finite differences."""
    generator = np.random.default_rng(seed)
    errors: List[Tuple[str, float]] = []
    coarse, fine = lattice_points(2), lattice_points(3)
    for activation in ACTIVATIONS:
        network = Network(
            layers=[
                build_dense_layer(5, 9, activation, generator),
                build_mesh_informed_layer(fine, coarse, 0.6, activation, generator),
                build_dense_layer(4, 3, activation, generator),
            ]
        )
        errors.append(
            (f"network {activation.kind}", _network_gradient_error(network, generator))
        )
    mixed = Network(
        layers=[
            build_dense_layer(5, 9, ACTIVATIONS[1], generator),
            build_mesh_informed_layer(fine, coarse, 0.6, ACTIVATIONS[0], generator),
            build_dense_layer(4, 3, ACTIVATIONS[2], generator),
        ]
    )
    errors.append(("network mixed", _network_gradient_error(mixed, generator)))
    for name, config in (
        ("loss absolute", TrainConfig(alpha1=0.2, alpha2=0.2, alpha3=1 / 16)),
        (
            "loss relative",
            TrainConfig(alpha1=1.0, alpha2=1.0, alpha3=1 / 16, rel_first_term=True),
        ),
    ):
        errors.append((name, _loss_gradient_error(config, generator)))

    results = [
        CheckResult(
            name=name,
            passed=error < GRADIENT_TOLERANCE,
            detail=f"relative error {error:.3e}",
        )
        for name, error in errors
    ]
    for result in results:
        log.info(f"gradcheck {result.name}: {result.detail}")
    return results


def _check(name: str, passed: bool, detail: str) -> CheckResult:
    return CheckResult(name=name, passed=bool(passed), detail=detail)


def _mesh_checks() -> List[CheckResult]:
    mesh = build_unit_square_mesh(2)
    mass = assemble_mass_matrix(mesh)
    stiffness = assemble_stiffness(mesh, np.ones(len(mesh.triangles)))
    row_sums = np.abs(np.asarray(stiffness.sum(axis=1))).max()
    return [
        _check(
            "mesh counts",
            (mesh.n_nodes, len(mesh.triangles), len(mesh.boundary_nodes)) == (9, 8, 8),
            f"{mesh.n_nodes} nodes, {len(mesh.triangles)} triangles",
        ),
        _check("mass total", abs(mass.sum() - 1.0) < 1e-14, f"sum {mass.sum():.17g}"),
        _check("stiffness kernel", row_sums < 1e-12, f"max row sum {row_sums:.3e}"),
    ]


def _darcy_checks() -> List[CheckResult]:
    mesh = build_unit_square_mesh(50)
    problem = DarcyProblem(mesh=mesh)
    solution = solve_darcy(problem, FieldVector(values=np.zeros(mesh.n_nodes), domain=mesh))
    center = solution.values[25 * 51 + 25]
    return [
        _check(
            "darcy center value",
            abs(center - 0.73671) < 2e-3,
            f"u(0.5, 0.5) = {center:.6f}",
        )
    ]


def _burgers_checks() -> List[CheckResult]:
    problem = BurgersProblem()
    initial = np.where(problem.grid.centers < 1.0, 1.0, 0.0)
    final = solve_burgers(problem, FieldVector(values=initial, domain=problem.grid))
    shock = problem.grid.centers[np.argmax(final.values < 0.5)]
    return [
        _check(
            "burgers shock position",
            abs(shock - 1.5) <= 2 * problem.grid.h,
            f"shock at x = {shock:.4f}",
        )
    ]


def _reduction_checks() -> List[CheckResult]:
    grid = build_uniform_grid(1.0, 6)
    mass = grid_mass_matrix(grid)
    snapshot = np.linspace(1.0, 2.0, 6)
    basis = pod(np.tile(snapshot, (4, 1)), mass, 1)
    squared_norm = float(snapshot @ (mass @ snapshot))
    slope, _ = fit_loglog_slope(np.array([1, 2]), np.array([8.0, 1.0]))
    return [
        _check(
            "pod rank one",
            abs(basis.eigenvalues[0] - squared_norm) < 1e-12 * squared_norm
            and np.all(basis.eigenvalues[1:] == 0),
            f"lambda_1 = {basis.eigenvalues[0]:.17g}",
        ),
        _check("two point slope", abs(slope + 3.0) < 1e-12, f"slope {slope:.17g}"),
    ]


def _neural_checks() -> List[CheckResult]:
    clamped = Activation(kind="soft_clamp")(np.array([-1.0, 0.25, 1.0]))
    leaky = Activation(kind="leaky_relu", alpha=0.1)(np.array([-1.0, 0.0, 2.0]))
    gradient = np.array([0.3, -2.0])
    parameters = [np.zeros(2)]
    adam_step(AdamState(lr=1e-3), parameters, [gradient])
    return [
        _check(
            "soft clamp values",
            np.allclose(clamped, [-0.1, 0.25, 0.55], rtol=0, atol=1e-15),
            f"{clamped}",
        ),
        _check(
            "leaky relu values",
            np.allclose(leaky, [-0.1, 0.0, 2.0], rtol=0, atol=1e-15),
            f"{leaky}",
        ),
        _check(
            "adam first step",
            np.allclose(parameters[0], -1e-3 * np.sign(gradient), rtol=1e-6),
            f"{parameters[0]}",
        ),
    ]


def run_selftest() -> List[CheckResult]:
    """Run the quick oracle checks of the numerical modules."""
    checks = [
        _mesh_checks,
        _darcy_checks,
        _burgers_checks,
        _reduction_checks,
        _neural_checks,
    ]
    results: List[CheckResult] = []
    for check in checks:
        try:
            results.extend(check())
        except LatentDimError as error:
            results.append(_check(getattr(check, "__name__", "check"), False, str(error)))
    for result in results:
        log.info(f"selftest {result.name}: {'ok' if result.passed else 'FAILED'}")
    return results
