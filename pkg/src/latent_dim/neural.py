"""Define a minimal feed-forward network with exact backpropagation and Adam.

Layers are either dense or mesh-informed: the weight matrix of a mesh-informed
layer is restricted by a binary mask that only connects the degrees of freedom
that are closer than a support radius.
"""

import logging
import struct
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, PrivateAttr, root_validator, validator
from scipy.spatial.distance import cdist

from .exceptions import NetworkError, SnapshotFormatError, StaleCacheError

log = logging.getLogger(__name__)

ActivationKind = Literal["leaky_relu", "tanh", "soft_clamp", "identity"]

NETWORK_MAGIC = b"LDLM"
NETWORK_FORMAT_VERSION = 1
_ACTIVATION_TAGS: Dict[str, int] = {
    "leaky_relu": 0,
    "tanh": 1,
    "soft_clamp": 2,
    "identity": 3,
}
SOFT_CLAMP_SLOPE = 0.1


def _leaky_relu(values: np.ndarray, alpha: float) -> np.ndarray:
    return np.where(values > 0, values, alpha * values)


def _leaky_relu_slope(values: np.ndarray, alpha: float) -> np.ndarray:
    return np.where(values > 0, 1.0, alpha)


class Activation(BaseModel):
    """Model a pointwise activation function.

    soft_clamp is rho(0.5 - rho(0.5 - x)) with rho the 0.1-leaky ReLU: the
    identity on [0, 0.5] with leaky tails on both sides.
    """

    kind: ActivationKind = "leaky_relu"
    alpha: float = 0.1

    @validator("alpha")
    @classmethod
    def _check_slope(cls, alpha: float) -> float:
        if not abs(alpha) < 1:
            raise ValueError("the leaky ReLU slope must satisfy |alpha| < 1")
        return alpha

    def __call__(self, values: np.ndarray) -> np.ndarray:
        """Apply the activation elementwise."""
        if self.kind == "leaky_relu":
            return _leaky_relu(values, self.alpha)
        if self.kind == "tanh":
            return np.tanh(values)
        if self.kind == "soft_clamp":
            inner = _leaky_relu(0.5 - values, SOFT_CLAMP_SLOPE)
            return _leaky_relu(0.5 - inner, SOFT_CLAMP_SLOPE)
        return values.copy()

    def derivative(self, values: np.ndarray) -> np.ndarray:
        """Return the derivative of the activation at the pre-activations."""
        if self.kind == "leaky_relu":
            return _leaky_relu_slope(values, self.alpha)
        if self.kind == "tanh":
            return 1.0 - np.tanh(values) ** 2
        if self.kind == "soft_clamp":
            inner = _leaky_relu(0.5 - values, SOFT_CLAMP_SLOPE)
            return _leaky_relu_slope(
                0.5 - inner, SOFT_CLAMP_SLOPE
            ) * _leaky_relu_slope(0.5 - values, SOFT_CLAMP_SLOPE)
        return np.ones_like(values)


class AffineLayer(BaseModel):
    """Model the layer x -> activation(W x + b).

    If the mask is set, the entries of W outside of it are kept exactly at zero.
    """

    weights: np.ndarray
    bias: np.ndarray
    mask: Optional[np.ndarray] = None
    activation: Activation = Field(default_factory=Activation)

    class Config:
        """Configure the pydantic model."""

        arbitrary_types_allowed = True

    @root_validator(skip_on_failure=True)
    @classmethod
    def _check_shapes(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        weights, bias, mask = values["weights"], values["bias"], values.get("mask")
        if weights.ndim != 2 or bias.shape != (weights.shape[0],):
            raise ValueError("the bias must have one entry per row of the weights")
        if mask is not None:
            if mask.shape != weights.shape:
                raise ValueError("the mask must have the shape of the weights")
            values["mask"] = mask.astype(bool)
            weights[~values["mask"]] = 0.0
        return values

    @property
    def n_in(self) -> int:
        """Return the input width."""
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        """Return the output width."""
        return self.weights.shape[0]

    def apply_mask(self) -> None:
        """Reset to zero the weights outside of the mask."""
        if self.mask is not None:
            self.weights[~self.mask] = 0.0


class ForwardCache(BaseModel):
    """Store what a forward pass needs to keep for the backward pass."""

    inputs: List[np.ndarray]
    pre_activations: List[np.ndarray]
    network_id: int
    generation: int

    class Config:
        """Configure the pydantic model."""

        arbitrary_types_allowed = True


class LayerGradient(BaseModel):
    """Store the gradient of the loss with respect to a layer parameters."""

    weights: np.ndarray
    bias: np.ndarray

    class Config:
        """Configure the pydantic model."""

        arbitrary_types_allowed = True


class Network(BaseModel):
    """Model a composition of affine layers."""

    layers: List[AffineLayer]
    _generation: int = PrivateAttr(default=0)

    @root_validator(skip_on_failure=True)
    @classmethod
    def _check_chain(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        layers = values["layers"]
        if not layers:
            raise ValueError("a network needs at least one layer")
        for previous, current in zip(layers, layers[1:]):
            if previous.n_out != current.n_in:
                raise ValueError(
                    f"layer widths don't chain: {previous.n_out} -> {current.n_in}"
                )
        return values

    @property
    def n_in(self) -> int:
        """Return the input width."""
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        """Return the output width."""
        return self.layers[-1].n_out

    @property
    def generation(self) -> int:
        """Return the number of parameter updates seen by the network."""
        return self._generation

    def mark_updated(self) -> None:
        """Invalidate the caches of the previous forward passes."""
        self._generation += 1

    def parameters(self) -> List[np.ndarray]:
        """Return the parameter arrays in layer order, weights before bias."""
        return [array for layer in self.layers for array in (layer.weights, layer.bias)]

    def masks(self) -> List[Optional[np.ndarray]]:
        """Return the mask of every parameter array, None when unconstrained."""
        return [mask for layer in self.layers for mask in (layer.mask, None)]

    def clone(self) -> "Network":
        """Return an independent copy of the network."""
        return Network(
            layers=[
                AffineLayer(
                    weights=layer.weights.copy(),
                    bias=layer.bias.copy(),
                    mask=None if layer.mask is None else layer.mask.copy(),
                    activation=layer.activation.copy(),
                )
                for layer in self.layers
            ]
        )


def build_support_mask(
    coords_out: np.ndarray, coords_in: np.ndarray, support: float
) -> np.ndarray:
    """Connect the output and input points closer than the support radius.

    Args:
        coords_out: positions of the output degrees of freedom, (N_out, d) or (N_out,).
        coords_in: positions of the input degrees of freedom, (N_in, d) or (N_in,).
        support: Euclidean radius of the connections.
    """
    if support < 0:
        raise NetworkError(f"The support radius must be nonnegative, got {support}")
    points_out = np.asarray(coords_out, dtype=float).reshape(len(coords_out), -1)
    points_in = np.asarray(coords_in, dtype=float).reshape(len(coords_in), -1)
    return cdist(points_out, points_in) <= support


def _he_uniform(
    generator: np.random.Generator, shape: Tuple[int, int], fan_in: np.ndarray
) -> np.ndarray:
    limits = np.sqrt(6.0 / np.maximum(fan_in, 1))
    return generator.uniform(-1.0, 1.0, size=shape) * limits[:, None]


def build_dense_layer(
    n_in: int, n_out: int, activation: Activation, seed: Any
) -> AffineLayer:
    """Initialize a dense layer with He uniform weights and zero bias."""
    if n_in < 1 or n_out < 1:
        raise NetworkError(f"Can't build a layer of shape {n_out} x {n_in}")
    generator = np.random.default_rng(seed)
    weights = _he_uniform(generator, (n_out, n_in), np.full(n_out, n_in))
    return AffineLayer(weights=weights, bias=np.zeros(n_out), activation=activation)


def build_mesh_informed_layer(
    coords_in: np.ndarray,
    coords_out: np.ndarray,
    support: float,
    activation: Activation,
    seed: Any,
) -> AffineLayer:
    """Initialize a sparse layer between two point clouds.

    The He scaling uses the number of connections of every output node.
    """
    mask = build_support_mask(coords_out, coords_in, support)
    generator = np.random.default_rng(seed)
    weights = _he_uniform(generator, mask.shape, mask.sum(axis=1))
    log.debug(
        f"Mesh-informed layer {mask.shape[1]} -> {mask.shape[0]} "
        f"with density {mask.mean():.3f}"
    )
    return AffineLayer(
        weights=weights, bias=np.zeros(mask.shape[0]), mask=mask, activation=activation
    )


def forward(network: Network, batch: np.ndarray) -> Tuple[np.ndarray, ForwardCache]:
    """Evaluate the network on a B x n_in batch.

    Raises:
        NetworkError: if the batch width doesn't match the network input.
    """
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    if batch.shape[1] != network.n_in:
        raise NetworkError(
            f"Batch of width {batch.shape[1]} for a network of input {network.n_in}"
        )
    inputs: List[np.ndarray] = []
    pre_activations: List[np.ndarray] = []
    values = batch
    for layer in network.layers:
        inputs.append(values)
        pre_activation = values @ layer.weights.T + layer.bias
        pre_activations.append(pre_activation)
        values = layer.activation(pre_activation)
    return values, ForwardCache(
        inputs=inputs,
        pre_activations=pre_activations,
        network_id=id(network),
        generation=network.generation,
    )


def predict(network: Network, batch: np.ndarray) -> np.ndarray:
    """Evaluate the network without keeping the cache."""
    return forward(network, batch)[0]


def backward(
    network: Network, cache: Optional[ForwardCache], upstream: np.ndarray
) -> Tuple[List[LayerGradient], np.ndarray]:
    """Propagate the gradient of a scalar loss with respect to the outputs.

    Returns:
        The gradient of every layer and the gradient with respect to the inputs.

    Raises:
        StaleCacheError: if the cache is missing, belongs to another network or
            the parameters changed since the forward pass.
    """
    if cache is None:
        raise StaleCacheError("Call forward before backward")
    if cache.network_id != id(network) or cache.generation != network.generation:
        raise StaleCacheError("The forward cache doesn't match the network state")
    if upstream.shape != cache.pre_activations[-1].shape:
        raise NetworkError(
            f"Upstream gradient of shape {upstream.shape}, expected "
            f"{cache.pre_activations[-1].shape}"
        )

    gradients: List[LayerGradient] = []
    delta = upstream
    for layer, inputs, pre_activation in zip(
        reversed(network.layers),
        reversed(cache.inputs),
        reversed(cache.pre_activations),
    ):
        delta = delta * layer.activation.derivative(pre_activation)
        weights_gradient = delta.T @ inputs
        if layer.mask is not None:
            weights_gradient[~layer.mask] = 0.0
        gradients.append(
            LayerGradient(weights=weights_gradient, bias=delta.sum(axis=0))
        )
        delta = delta @ layer.weights
    gradients.reverse()
    return gradients, delta


def flatten_gradients(gradients: Sequence[LayerGradient]) -> List[np.ndarray]:
    """Return the gradient arrays in the order of `Network.parameters`."""
    return [array for gradient in gradients for array in (gradient.weights, gradient.bias)]


class AdamState(BaseModel):
    """Store the Adam hyperparameters and moment estimates.

    The weight decay is decoupled: parameters are shrunk by lr * weight_decay
    before the Adam update.
    """

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    first_moments: List[np.ndarray] = Field(default_factory=list)
    second_moments: List[np.ndarray] = Field(default_factory=list)

    class Config:
        """Configure the pydantic model."""

        arbitrary_types_allowed = True

    @classmethod
    def for_parameters(cls, parameters: Sequence[np.ndarray], **kwargs: Any) -> "AdamState":
        """Build a state with zero moments shaped like the parameters."""
        return cls(
            first_moments=[np.zeros_like(array) for array in parameters],
            second_moments=[np.zeros_like(array) for array in parameters],
            **kwargs,
        )


def adam_step(
    state: AdamState,
    parameters: Sequence[np.ndarray],
    gradients: Sequence[np.ndarray],
    masks: Optional[Sequence[Optional[np.ndarray]]] = None,
) -> Sequence[np.ndarray]:
    """Update the parameters in place with one bias corrected Adam step.

    Raises:
        NetworkError: if parameters, gradients and moments don't agree.
    """
    if not state.first_moments:
        state.first_moments = [np.zeros_like(array) for array in parameters]
        state.second_moments = [np.zeros_like(array) for array in parameters]
    if len(parameters) != len(gradients) or len(parameters) != len(state.first_moments):
        raise NetworkError("Parameters, gradients and moments have different lengths")
    masks = masks or [None] * len(parameters)

    state.step += 1
    first_correction = 1.0 - state.beta1**state.step
    second_correction = 1.0 - state.beta2**state.step
    for parameter, gradient, first, second, mask in zip(
        parameters, gradients, state.first_moments, state.second_moments, masks
    ):
        if parameter.shape != gradient.shape or parameter.shape != first.shape:
            raise NetworkError(
                f"Parameter of shape {parameter.shape} with gradient {gradient.shape}"
            )
        first *= state.beta1
        first += (1.0 - state.beta1) * gradient
        second *= state.beta2
        second += (1.0 - state.beta2) * gradient**2
        if state.weight_decay:
            parameter *= 1.0 - state.lr * state.weight_decay
        parameter -= (
            state.lr
            * (first / first_correction)
            / (np.sqrt(second / second_correction) + state.epsilon)
        )
        if mask is not None:
            parameter[~mask] = 0.0
    return parameters


def finite_difference_check(
    loss: Callable[[], float],
    parameters: Sequence[np.ndarray],
    gradients: Sequence[np.ndarray],
    masks: Optional[Sequence[Optional[np.ndarray]]] = None,
    step: float = 1e-5,
) -> float:
    """Compare analytic gradients with central finite differences.

    `loss` is evaluated after perturbing the parameter arrays in place, entries
    outside of a mask are skipped.

    Returns:
        The largest relative error |g_fd - g| / max(|g_fd|, |g|) over the
        parameter arrays, in Euclidean norm.
    """
    masks = masks or [None] * len(parameters)
    worst = 0.0
    for parameter, gradient, mask in zip(parameters, gradients, masks):
        estimate = np.zeros_like(parameter)
        for index in np.ndindex(parameter.shape):
            if mask is not None and not mask[index]:
                continue
            original = parameter[index]
            parameter[index] = original + step
            upper = loss()
            parameter[index] = original - step
            lower = loss()
            parameter[index] = original
            estimate[index] = (upper - lower) / (2 * step)
        scale = max(np.linalg.norm(estimate), np.linalg.norm(gradient))
        if scale > 0:
            worst = max(worst, float(np.linalg.norm(estimate - gradient) / scale))
    return worst


def network_to_bytes(network: Network) -> bytes:
    """Encode the network in the LDLM checkpoint format.

    After the magic, the u32 version and the u32 layer count, every layer stores
    its u32 widths (in, out), the u8 activation tag, the f64 leaky slope, the u8
    mask flag, the bit packed mask rows if present and the row-major weights and
    bias. Everything is little endian.
    """
    chunks = [NETWORK_MAGIC, struct.pack("<II", NETWORK_FORMAT_VERSION, len(network.layers))]
    for layer in network.layers:
        has_mask = layer.mask is not None
        chunks.append(
            struct.pack(
                "<IIBdB",
                layer.n_in,
                layer.n_out,
                _ACTIVATION_TAGS[layer.activation.kind],
                layer.activation.alpha,
                int(has_mask),
            )
        )
        if layer.mask is not None:
            chunks.append(np.packbits(layer.mask, axis=1).tobytes())
        chunks.append(layer.weights.astype("<f8").tobytes())
        chunks.append(layer.bias.astype("<f8").tobytes())
    return b"".join(chunks)


def _read(data: bytes, offset: int, size: int) -> Tuple[bytes, int]:
    if offset + size > len(data):
        raise SnapshotFormatError("Truncated network checkpoint")
    return data[offset : offset + size], offset + size


def network_from_bytes(data: bytes) -> Network:
    """Decode a network stored in the LDLM checkpoint format.

    Raises:
        SnapshotFormatError: if the data is not a valid checkpoint.
    """
    if data[:4] != NETWORK_MAGIC:
        raise SnapshotFormatError("Not a network checkpoint, wrong magic bytes")
    header, offset = _read(data, 4, 8)
    version, n_layers = struct.unpack("<II", header)
    if version != NETWORK_FORMAT_VERSION:
        raise SnapshotFormatError(f"Unsupported network format version {version}")
    kinds = {tag: kind for kind, tag in _ACTIVATION_TAGS.items()}
    layers = []
    layer_header_size = struct.calcsize("<IIBdB")
    for _ in range(n_layers):
        chunk, offset = _read(data, offset, layer_header_size)
        n_in, n_out, tag, alpha, has_mask = struct.unpack("<IIBdB", chunk)
        if tag not in kinds:
            raise SnapshotFormatError(f"Unknown activation tag {tag}")
        mask = None
        if has_mask:
            row_bytes = (n_in + 7) // 8
            chunk, offset = _read(data, offset, n_out * row_bytes)
            packed = np.frombuffer(chunk, dtype=np.uint8).reshape(n_out, row_bytes)
            mask = np.unpackbits(packed, axis=1, count=n_in).astype(bool)
        chunk, offset = _read(data, offset, 8 * n_in * n_out)
        weights = np.frombuffer(chunk, dtype="<f8").reshape(n_out, n_in).astype(float)
        chunk, offset = _read(data, offset, 8 * n_out)
        bias = np.frombuffer(chunk, dtype="<f8").astype(float)
        layers.append(
            AffineLayer(
                weights=weights,
                bias=bias,
                mask=mask,
                activation=Activation(kind=kinds[tag], alpha=alpha),
            )
        )
    if offset != len(data):
        raise SnapshotFormatError("Trailing bytes after the last layer")
    return Network(layers=layers)
