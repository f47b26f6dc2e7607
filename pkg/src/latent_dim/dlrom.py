"""Assemble, train and evaluate deep learning reduced order models.

A DL-ROM is made of an encoder Psi' and a decoder Psi trained as an autoencoder
of the outputs, and a reduced map phi that sends the inputs to the latent space,
so that Psi(phi(mu)) approximates the full order solution.
"""

import logging
from datetime import datetime
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, root_validator

from .config import ProblemKind, TrainConfig
from .exceptions import DimensionMismatchError, NetworkError, TrainingDivergedError
from .geometry import SymmetricSparseMatrix, lattice_points, vh_norms
from .model import ErrorDecayReport, ErrorDecayRow, Slopes
from .neural import (
    Activation,
    AdamState,
    AffineLayer,
    Network,
    adam_step,
    backward,
    build_dense_layer,
    build_mesh_informed_layer,
    flatten_gradients,
    forward,
    predict,
)
from .reduction import PODBasis, fit_loglog_slope, pod, projection_errors
from .solvers import SnapshotSet

log = logging.getLogger(__name__)

ErrorMode = Literal["ae_reconstruction", "rom_prediction", "pod_projection"]

DIVERGENCE_THRESHOLD = 1e6
NETWORK_NAMES = ("encoder", "decoder", "reduced_map")

# Widths of the full scale architectures and the meshes they were designed for.
DARCY_REFERENCE_DOFS = 2601
DARCY_HIDDEN_WIDTH = 500
DARCY_LATTICES = (26, 13)
DARCY_SUPPORTS = (0.125, 0.25)
BURGERS_REFERENCE_CELLS = 500
BURGERS_HIDDEN_WIDTH = 200
BURGERS_GRIDS = (250, 125)
BURGERS_SUPPORTS = (0.25, 0.5)

LEAKY = Activation(kind="leaky_relu", alpha=0.1)


class DLROM(BaseModel):
    """Model the encoder, decoder and reduced map triple."""

    encoder: Network
    decoder: Network
    reduced_map: Network
    latent_dim: int

    @root_validator(skip_on_failure=True)
    @classmethod
    def _check_widths(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        latent = values["latent_dim"]
        encoder, decoder = values["encoder"], values["decoder"]
        if not encoder.n_out == decoder.n_in == values["reduced_map"].n_out == latent:
            raise ValueError(f"the networks don't share the latent dimension {latent}")
        if decoder.n_out != encoder.n_in:
            raise ValueError("the decoder must map back to the encoder input space")
        return values

    def networks(self) -> Dict[str, Network]:
        """Return the three networks by name."""
        return {
            "encoder": self.encoder,
            "decoder": self.decoder,
            "reduced_map": self.reduced_map,
        }

    def clone(self) -> "DLROM":
        """Return an independent copy of the model."""
        return DLROM(
            encoder=self.encoder.clone(),
            decoder=self.decoder.clone(),
            reduced_map=self.reduced_map.clone(),
            latent_dim=self.latent_dim,
        )

    def reconstruct(self, outputs: np.ndarray) -> np.ndarray:
        """Return Psi(Psi'(u)) for every row."""
        return predict(self.decoder, predict(self.encoder, outputs))

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        """Return Psi(phi(mu)) for every row."""
        return predict(self.decoder, predict(self.reduced_map, inputs))


class Architecture(BaseModel):
    """Describe the degrees of freedom the networks are built on.

    Attributes:
        kind: problem the architecture family belongs to.
        output_points: coordinates of the output degrees of freedom.
        input_points: coordinates of the input degrees of freedom, None when the
            input is a parameter vector.
        length: length of the interval of one dimensional problems.
    """

    kind: ProblemKind
    output_points: np.ndarray
    input_points: Optional[np.ndarray] = None
    input_width: int
    length: float = 1.0

    class Config:
        """Configure the pydantic model."""

        arbitrary_types_allowed = True

    @property
    def output_width(self) -> int:
        """Return the number of output degrees of freedom."""
        return len(self.output_points)


def _scaled(width: int, dofs: int, reference: int) -> int:
    return max(2, int(round(width * dofs / reference)))


def _interval_centers(length: float, count: int) -> np.ndarray:
    return (np.arange(count) + 0.5) * length / count


def build_autoencoder(
    architecture: Architecture, n: int, seed: Any, width: Optional[int] = None
) -> Tuple[Network, Network]:
    """Build the encoder and decoder of latent dimension n.

    Only the innermost widths depend on n, so the autoencoders of a sweep are
    nested. Hidden widths are rescaled with the number of degrees of freedom.

    Returns:
        The encoder and the decoder.
    """
    if n < 1:
        raise NetworkError(f"The latent dimension must be positive, got {n}")
    generator = np.random.default_rng(np.random.SeedSequence([int(seed), n, 0]))
    dofs = architecture.output_width
    if architecture.kind == "burgers":
        hidden = _scaled(BURGERS_HIDDEN_WIDTH, dofs, BURGERS_REFERENCE_CELLS)
        encoder = [build_dense_layer(dofs, n, LEAKY, generator)]
        decoder = [
            build_dense_layer(n, hidden, LEAKY, generator),
            build_dense_layer(hidden, dofs, Activation(kind="soft_clamp"), generator),
        ]
    else:
        if architecture.kind == "cookie":
            hidden = width or 100
        else:
            hidden = _scaled(DARCY_HIDDEN_WIDTH, dofs, DARCY_REFERENCE_DOFS)
        encoder = [
            build_dense_layer(dofs, hidden, LEAKY, generator),
            build_dense_layer(hidden, n, LEAKY, generator),
        ]
        decoder = [
            build_dense_layer(n, hidden, LEAKY, generator),
            build_dense_layer(hidden, dofs, Activation(kind="identity"), generator),
        ]
    return Network(layers=encoder), Network(layers=decoder)


def build_reduced_map(
    architecture: Architecture, n: int, seed: Any, width: Optional[int] = None
) -> Network:
    """Build the network phi from the inputs to the latent space.

    Fields defined on a mesh go through two mesh-informed layers on coarser
    uniform lattices before a dense layer; parameter vectors go through a small
    dense network.
    """
    generator = np.random.default_rng(np.random.SeedSequence([int(seed), n, 1]))
    layers: List[AffineLayer] = []
    if architecture.kind == "cookie" or architecture.input_points is None:
        hidden = width or 100
        layers = [
            build_dense_layer(architecture.input_width, hidden, LEAKY, generator),
            build_dense_layer(hidden, n, LEAKY, generator),
        ]
        return Network(layers=layers)

    points = architecture.input_points
    if architecture.kind == "darcy":
        side = int(round(np.sqrt(len(points))))
        reference_side = int(round(np.sqrt(DARCY_REFERENCE_DOFS)))
        hidden_points = [
            lattice_points(max(2, int(round(lattice * side / reference_side))))
            for lattice in DARCY_LATTICES
        ]
        supports = DARCY_SUPPORTS
        activations = [Activation(kind="tanh"), LEAKY]
    else:
        hidden_points = [
            _interval_centers(
                architecture.length,
                _scaled(cells, len(points), BURGERS_REFERENCE_CELLS),
            )[:, None]
            for cells in BURGERS_GRIDS
        ]
        supports = BURGERS_SUPPORTS
        activations = [LEAKY, LEAKY]

    for target, support, activation in zip(hidden_points, supports, activations):
        layers.append(
            build_mesh_informed_layer(points, target, support, activation, generator)
        )
        points = target
    layers.append(build_dense_layer(len(points), n, LEAKY, generator))
    return Network(layers=layers)


def build_dlrom(
    architecture: Architecture, n: int, seed: Any, width: Optional[int] = None
) -> DLROM:
    """Build a freshly initialized DL-ROM of latent dimension n."""
    encoder, decoder = build_autoencoder(architecture, n, seed, width)
    return DLROM(
        encoder=encoder,
        decoder=decoder,
        reduced_map=build_reduced_map(architecture, n, seed, width),
        latent_dim=n,
    )


class LossEvaluation(BaseModel):
    """Store the value of the loss on a batch and its gradients.

    Attributes:
        total: weighted sum of the three terms.
        terms: unweighted value of each term.
        gradients: parameter gradients of the networks that take part in the loss,
            in the order of `Network.parameters`.
        skipped: samples left out of the relative term because of their zero norm.
    """

    total: float
    terms: Tuple[float, float, float]
    gradients: Dict[str, List[np.ndarray]]
    skipped: int = 0

    class Config:
        """Configure the pydantic model."""

        arbitrary_types_allowed = True


def active_networks(config: TrainConfig) -> List[str]:
    """Return the names of the networks the loss weights depend on."""
    active = []
    if config.alpha2 > 0 or config.alpha3 > 0:
        active.append("encoder")
    if config.alpha1 > 0 or config.alpha2 > 0:
        active.append("decoder")
    if config.alpha1 > 0 or config.alpha3 > 0:
        active.append("reduced_map")
    return active


def _squared_norms(errors: np.ndarray, mass: SymmetricSparseMatrix) -> np.ndarray:
    weighted = (mass @ errors.T).T
    return np.einsum("ij,ij->i", errors, weighted), weighted


def dlrom_loss(
    model: DLROM,
    inputs: np.ndarray,
    outputs: np.ndarray,
    mass: SymmetricSparseMatrix,
    config: TrainConfig,
) -> LossEvaluation:
    """Evaluate the three term loss on a batch and backpropagate it.

    The loss is the batch mean of
    alpha1 |u - Psi(phi(mu))|^2 + alpha2 |u - Psi(Psi'(u))|^2 + alpha3 |Psi'(u) - phi(mu)|^2,
    the first two norms being the V_h norm and the last one the Euclidean norm. With
    `rel_first_term`, the first term is |u - Psi(phi(mu))| / |u| instead and the
    samples with zero norm are skipped.

    Raises:
        DimensionMismatchError: if the batch doesn't fit the model.
    """
    batch = len(outputs)
    if len(inputs) != batch or batch == 0:
        raise DimensionMismatchError(
            f"Batch of {len(inputs)} inputs and {batch} outputs"
        )
    if outputs.shape[1] != model.decoder.n_out or mass.shape[0] != outputs.shape[1]:
        raise DimensionMismatchError(
            f"Outputs of width {outputs.shape[1]}, decoder of width "
            f"{model.decoder.n_out} and mass of shape {mass.shape}"
        )

    alpha1, alpha2, alpha3 = config.alpha1, config.alpha2, config.alpha3
    active = active_networks(config)
    terms = [0.0, 0.0, 0.0]
    skipped = 0

    if "reduced_map" in active:
        z_map, map_cache = forward(model.reduced_map, inputs)
    if "encoder" in active:
        z_enc, encoder_cache = forward(model.encoder, outputs)

    latent_gradient_map = np.zeros((batch, model.latent_dim))
    latent_gradient_enc = np.zeros((batch, model.latent_dim))

    if "decoder" in active:
        decoder_inputs = []
        if alpha1 > 0:
            decoder_inputs.append(z_map)
        if alpha2 > 0:
            decoder_inputs.append(z_enc)
        reconstructions, decoder_cache = forward(model.decoder, np.vstack(decoder_inputs))
        upstream = []
        offset = 0
        if alpha1 > 0:
            errors = outputs - reconstructions[:batch]
            squared, weighted = _squared_norms(errors, mass)
            if config.rel_first_term:
                norms = vh_norms(mass, outputs)
                valid = norms > 0
                skipped = int(batch - valid.sum())
                if skipped:
                    log.warning(
                        f"Skipping {skipped} samples of zero norm in the relative term"
                    )
                distances = np.sqrt(np.maximum(squared, 0.0))
                gradient = np.zeros_like(errors)
                count = int(valid.sum())
                if count:
                    terms[0] = float(np.mean(distances[valid] / norms[valid]))
                    scale = np.zeros(batch)
                    usable = valid & (distances > 0)
                    scale[usable] = 1.0 / (
                        distances[usable] * norms[usable] * count
                    )
                    gradient = -weighted * scale[:, None]
            else:
                terms[0] = float(np.mean(squared))
                gradient = -2.0 * weighted / batch
            upstream.append(alpha1 * gradient)
            offset = batch
        if alpha2 > 0:
            errors = outputs - reconstructions[offset:]
            squared, weighted = _squared_norms(errors, mass)
            terms[1] = float(np.mean(squared))
            upstream.append(alpha2 * (-2.0 * weighted / batch))
        decoder_gradients, latent_gradient = backward(
            model.decoder, decoder_cache, np.vstack(upstream)
        )
        if alpha1 > 0:
            latent_gradient_map += latent_gradient[:batch]
        if alpha2 > 0:
            latent_gradient_enc += latent_gradient[offset:]

    if alpha3 > 0:
        difference = z_enc - z_map
        terms[2] = float(np.mean(np.sum(difference**2, axis=1)))
        latent_gradient_enc += alpha3 * 2.0 * difference / batch
        latent_gradient_map -= alpha3 * 2.0 * difference / batch

    gradients: Dict[str, List[np.ndarray]] = {}
    if "encoder" in active:
        gradients["encoder"] = flatten_gradients(
            backward(model.encoder, encoder_cache, latent_gradient_enc)[0]
        )
    if "decoder" in active:
        gradients["decoder"] = flatten_gradients(decoder_gradients)
    if "reduced_map" in active:
        gradients["reduced_map"] = flatten_gradients(
            backward(model.reduced_map, map_cache, latent_gradient_map)[0]
        )

    total = alpha1 * terms[0] + alpha2 * terms[1] + alpha3 * terms[2]
    return LossEvaluation(
        total=total, terms=tuple(terms), gradients=gradients, skipped=skipped
    )


class TrainingResult(BaseModel):
    """Store a trained model and its loss history."""

    model: DLROM
    losses: List[float]


def train(
    model: DLROM,
    snapshots: SnapshotSet,
    mass: SymmetricSparseMatrix,
    config: TrainConfig,
) -> TrainingResult:
    """Train the networks of the model at once with mini-batch Adam.

    The given model is left untouched, an owned copy is trained. The shuffling
    depends only on `config.seed`.

    Returns:
        The trained model and the mean batch loss of every epoch.

    Raises:
        TrainingDivergedError: if a batch loss is not finite or goes above 1e6.
    """
    if snapshots.n_train == 0:
        raise DimensionMismatchError("The snapshot set has no training samples")
    trained = model.clone()
    networks = trained.networks()
    names = active_networks(config)
    parameters = [array for name in names for array in networks[name].parameters()]
    masks = [mask for name in names for mask in networks[name].masks()]
    state = AdamState.for_parameters(
        parameters,
        lr=config.lr,
        beta1=config.beta1,
        beta2=config.beta2,
        epsilon=config.epsilon,
        weight_decay=config.weight_decay,
    )

    inputs, outputs = snapshots.train_inputs, snapshots.train_outputs
    generator = np.random.default_rng(config.seed)
    losses: List[float] = []
    for epoch in range(config.epochs):
        order = generator.permutation(snapshots.n_train)
        epoch_loss = 0.0
        for start in range(0, snapshots.n_train, config.batch_size):
            indices = order[start : start + config.batch_size]
            evaluation = dlrom_loss(trained, inputs[indices], outputs[indices], mass, config)
            if not np.isfinite(evaluation.total) or evaluation.total > DIVERGENCE_THRESHOLD:
                raise TrainingDivergedError(
                    f"Training diverged at epoch {epoch} with loss {evaluation.total}",
                    epoch=epoch,
                    loss=evaluation.total,
                    latent_dim=trained.latent_dim,
                )
            epoch_loss += evaluation.total * len(indices)
            gradients = [
                array for name in names for array in evaluation.gradients[name]
            ]
            adam_step(state, parameters, gradients, masks)
            for name in names:
                networks[name].mark_updated()
        losses.append(epoch_loss / snapshots.n_train)
        log.debug(f"Epoch {epoch}: loss {losses[-1]:.6e}")
    return TrainingResult(model=trained, losses=losses)


def per_sample_errors(
    reference: np.ndarray,
    approximation: np.ndarray,
    mass: SymmetricSparseMatrix,
    relative: bool = False,
) -> np.ndarray:
    """Return |u - u_hat| for every row, divided by |u| if relative.

    Rows of zero norm are dropped from the relative errors.
    """
    errors = vh_norms(mass, reference - approximation)
    if not relative:
        return errors
    norms = vh_norms(mass, reference)
    return errors[norms > 0] / norms[norms > 0]


def compute_test_error(
    mode: ErrorMode,
    outputs: np.ndarray,
    mass: SymmetricSparseMatrix,
    model: Optional[DLROM] = None,
    inputs: Optional[np.ndarray] = None,
    basis: Optional[PODBasis] = None,
    relative: bool = False,
) -> float:
    """Return the Monte Carlo estimate of the mean error over the test samples.

    The approximation is Psi(Psi'(u)) in `ae_reconstruction` mode, Psi(phi(mu))
    in `rom_prediction` mode and V V^T M u in `pod_projection` mode.

    Raises:
        DimensionMismatchError: if the test split is empty or the arguments of the
            mode are missing.
    """
    if len(outputs) == 0:
        raise DimensionMismatchError("The test split is empty")
    if mode == "pod_projection":
        if basis is None:
            raise DimensionMismatchError("The POD mode needs a basis")
        errors = projection_errors(basis, outputs, mass)
        if relative:
            norms = vh_norms(mass, outputs)
            errors = errors[norms > 0] / norms[norms > 0]
        return float(np.mean(errors))
    if model is None:
        raise DimensionMismatchError(f"The {mode} mode needs a model")
    if mode == "ae_reconstruction":
        approximation = model.reconstruct(outputs)
    else:
        if inputs is None or len(inputs) != len(outputs):
            raise DimensionMismatchError("The ROM prediction needs the test inputs")
        approximation = model.predict(inputs)
    return float(np.mean(per_sample_errors(outputs, approximation, mass, relative)))


class SweepData(BaseModel):
    """Gather what a latent dimension sweep needs besides the training config.

    Attributes:
        input_eigenvalues: nonincreasing spectrum of the input covariance.
        input_energy: second moment of the inputs, so that the input tail after n
            modes is input_energy - sum_{i<=n} input_eigenvalues.
        widths: candidate hidden widths, the best autoencoder of each n is kept.
    """

    architecture: Architecture
    snapshots: SnapshotSet
    output_mass: SymmetricSparseMatrix
    input_eigenvalues: np.ndarray
    input_energy: float
    widths: List[Optional[int]] = [None]

    class Config:
        """Configure the pydantic model."""

        arbitrary_types_allowed = True

    def input_tail(self, n: int) -> float:
        """Return the input tail after n modes, clamped at zero."""
        return max(self.input_energy - float(np.sum(self.input_eigenvalues[:n])), 0.0)


def truncate_basis(basis: PODBasis, n: int) -> PODBasis:
    """Return the basis made of the first n modes."""
    kept = min(n, basis.size)
    return PODBasis(
        modes=basis.modes[:, :kept],
        eigenvalues=basis.eigenvalues,
        total_energy=basis.total_energy,
        rank_limited=basis.rank_limited or kept < n,
    )


def fit_slopes(rows: List[ErrorDecayRow]) -> Slopes:
    """Fit the decay rate of every column over its positive values."""
    slopes: Dict[str, Optional[float]] = {}
    for column, slope in (
        ("e_ae", "beta_ae"),
        ("e_pod", "beta_pod"),
        ("sqrt_tail_mu", "beta_mu"),
        ("sqrt_tail_u", "beta_u"),
    ):
        points = [(row.n, getattr(row, column)) for row in rows if getattr(row, column) > 0]
        if len(points) >= 2:
            ns, values = zip(*points)
            slopes[slope] = fit_loglog_slope(np.array(ns), np.array(values))[0]
        else:
            slopes[slope] = None
    return Slopes(**slopes)


def latent_sweep(
    data: SweepData,
    ns: List[int],
    config: TrainConfig,
    config_hash: str = "",
    pod_reference_dims: Optional[List[int]] = None,
) -> ErrorDecayReport:
    """Measure the error decay of nested autoencoders against the POD tails.

    Every latent dimension gets a fresh autoencoder trained alone, without the
    reduced map terms, and is compared with the POD projection of the same size.
    The POD errors of `pod_reference_dims` are measured without any training.

    Raises:
        TrainingDivergedError: annotated with the failing latent dimension.
    """
    if not ns or any(second <= first for first, second in zip(ns, ns[1:])):
        raise DimensionMismatchError(f"The latent dimensions {ns} must be ascending")
    started_at = datetime.now()
    snapshots = data.snapshots
    autoencoder_config = config.copy(
        update={"alpha1": 0.0, "alpha2": 1.0, "alpha3": 0.0, "rel_first_term": False}
    )
    references = pod_reference_dims or []
    max_modes = min(
        max(ns + references), snapshots.n_train, snapshots.outputs.shape[1]
    )
    basis = pod(snapshots.train_outputs, data.output_mass, max_modes)

    rows = []
    for n in ns:
        errors = []
        for width in data.widths:
            model = build_dlrom(data.architecture, n, config.seed, width)
            try:
                result = train(model, snapshots, data.output_mass, autoencoder_config)
            except TrainingDivergedError as error:
                raise TrainingDivergedError(
                    f"Latent dimension {n}: {error}",
                    epoch=error.epoch,
                    loss=error.loss,
                    latent_dim=n,
                ) from error
            errors.append(
                compute_test_error(
                    "ae_reconstruction",
                    snapshots.test_outputs,
                    data.output_mass,
                    model=result.model,
                )
            )
        truncated = truncate_basis(basis, n)
        row = ErrorDecayRow(
            n=n,
            e_ae=min(errors),
            e_pod=compute_test_error(
                "pod_projection", snapshots.test_outputs, data.output_mass, basis=truncated
            ),
            sqrt_tail_mu=float(np.sqrt(data.input_tail(n))),
            sqrt_tail_u=float(np.sqrt(basis.tail(n))),
        )
        log.info(
            f"n={n}: autoencoder error {row.e_ae:.4e}, POD error {row.e_pod:.4e}"
        )
        rows.append(row)

    pod_reference = {
        n: compute_test_error(
            "pod_projection",
            snapshots.test_outputs,
            data.output_mass,
            basis=truncate_basis(basis, n),
        )
        for n in references
    }
    for n, error in pod_reference.items():
        log.info(f"n={n}: reference POD error {error:.4e}")

    return ErrorDecayReport(
        problem=data.architecture.kind,
        rows=rows,
        slopes=fit_slopes(rows),
        pod_reference=pod_reference,
        config_hash=config_hash,
        seed=snapshots.seed,
        started_at=started_at,
        finished_at=datetime.now(),
    )
