"""
Minimal sequential neural-network engine

Float64 numpy implementation of the layers needed by both the image
classifier and the Q-networks: dense, valid-padding conv2d, batchnorm and
flatten, with relu / leaky relu / softmax activations, mse and cross-entropy
losses, and plain SGD with per-layer L2 decay.
"""

import copy
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ConfigurationError, NumericError

logger = logging.getLogger(__name__)

LAYER_KINDS = ("dense", "conv2d", "batchnorm", "flatten")
ACTIVATIONS = ("none", "relu", "leaky_relu", "softmax")
LOSSES = ("mse", "cross_entropy")

CE_CLAMP = 1e-12


def he_uniform_init(shape: Sequence[int], fan_in: int, rng: np.random.Generator) -> np.ndarray:
    """
    He-uniform initializer

    Args:
        shape: Shape of the tensor to create
        fan_in: Number of inputs feeding each unit
        rng: Random generator

    Returns:
        Samples uniform in [-sqrt(6 / fan_in), +sqrt(6 / fan_in)]
    """
    if fan_in < 1:
        raise ConfigurationError(f"fan_in must be >= 1, got {fan_in}")
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=tuple(shape)).astype(np.float64)


def softmax(v: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """
    Temperature softmax over the last axis, shifted by the max for stability

    Args:
        v: Scores, 1-D or batched 2-D
        temperature: Positive temperature (greed parameter)

    Returns:
        Probability rows summing to 1
    """
    if temperature <= 0:
        raise ConfigurationError(f"softmax temperature must be > 0, got {temperature}")
    z = np.asarray(v, dtype=np.float64) / temperature
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def conv_output_size(size: int, kernel: int, stride: int) -> int:
    """Spatial output size of a valid-padding convolution"""
    return (size - kernel) // stride + 1


@dataclass
class Layer:
    """One layer of a sequential network; W/b are gamma/beta for batchnorm"""
    kind: str
    W: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    activation: str = "none"
    alpha: float = 0.3
    stride: int = 1
    l2: float = 0.0
    momentum: float = 0.99
    eps: float = 1e-5
    running_mean: Optional[np.ndarray] = None
    running_var: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigurationError(f"Unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"Unknown activation {self.activation!r}")
        if self.activation == "leaky_relu" and not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(f"leaky_relu slope must be in (0, 1), got {self.alpha}")
        if self.l2 < 0:
            raise ConfigurationError(f"l2 must be non-negative, got {self.l2}")
        if self.kind == "dense":
            if self.W is None or self.W.ndim != 2 or self.b is None or self.b.shape != (self.W.shape[0],):
                raise ConfigurationError(f"dense layer {self.name!r} needs W [out, in] and b [out]")
        elif self.kind == "conv2d":
            if self.W is None or self.W.ndim != 4 or self.W.shape[2] != self.W.shape[3]:
                raise ConfigurationError(f"conv2d layer {self.name!r} needs W [filters, in_channels, k, k]")
            if self.b is None or self.b.shape != (self.W.shape[0],):
                raise ConfigurationError(f"conv2d layer {self.name!r} needs b [filters]")
            if self.stride < 1:
                raise ConfigurationError(f"conv2d stride must be >= 1, got {self.stride}")
        elif self.kind == "batchnorm":
            if self.W is None or self.W.ndim != 1 or self.b is None or self.b.shape != self.W.shape:
                raise ConfigurationError(f"batchnorm layer {self.name!r} needs gamma [d] and beta [d]")
            if self.running_mean is None:
                self.running_mean = np.zeros_like(self.W)
            if self.running_var is None:
                self.running_var = np.ones_like(self.W)

    @property
    def has_params(self) -> bool:
        return self.W is not None

    @property
    def kernel_size(self) -> int:
        return int(self.W.shape[2]) if self.kind == "conv2d" else 0

    def output_shape(self, input_shape: Tuple[int, ...]) -> Tuple[int, ...]:
        """Per-sample output shape for a per-sample input shape"""
        if self.kind == "dense":
            if len(input_shape) != 1 or input_shape[0] != self.W.shape[1]:
                raise ConfigurationError(
                    f"dense layer {self.name!r} expects input ({self.W.shape[1]},), got {input_shape}")
            return (self.W.shape[0],)
        if self.kind == "conv2d":
            k = self.kernel_size
            if len(input_shape) != 3 or input_shape[0] != self.W.shape[1]:
                raise ConfigurationError(
                    f"conv2d layer {self.name!r} expects {self.W.shape[1]} input channels, got {input_shape}")
            if input_shape[1] < k or input_shape[2] < k:
                raise ConfigurationError(
                    f"conv2d layer {self.name!r} kernel {k} larger than input {input_shape[1:]}")
            return (self.W.shape[0],
                    conv_output_size(input_shape[1], k, self.stride),
                    conv_output_size(input_shape[2], k, self.stride))
        if self.kind == "batchnorm":
            if len(input_shape) != 1 or input_shape[0] != self.W.shape[0]:
                raise ConfigurationError(
                    f"batchnorm layer {self.name!r} expects input ({self.W.shape[0]},), got {input_shape}")
            return input_shape
        return (int(np.prod(input_shape)),)


@dataclass
class Network:
    """Ordered list of layers with exactly one loss"""
    layers: List[Layer]
    loss: str = "mse"

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ConfigurationError(f"Unknown loss {self.loss!r}")

    def output_shape(self, input_shape: Tuple[int, ...]) -> Tuple[int, ...]:
        """Walk the layers to check that adjacent shapes compose"""
        shape = tuple(input_shape)
        for layer in self.layers:
            shape = layer.output_shape(shape)
        return shape

    def parameters(self) -> List[Tuple[str, np.ndarray]]:
        """Trainable tensors in layer order as (name, array)"""
        params = []
        for layer in self.layers:
            if layer.has_params:
                params.append((f"{layer.name}.W", layer.W))
                params.append((f"{layer.name}.b", layer.b))
        return params

    def state_tensors(self) -> Dict[str, np.ndarray]:
        """All tensors needed to restore the network, running stats included"""
        tensors = dict(self.parameters())
        for layer in self.layers:
            if layer.kind == "batchnorm":
                tensors[f"{layer.name}.running_mean"] = layer.running_mean
                tensors[f"{layer.name}.running_var"] = layer.running_var
        return tensors

    def load_state_tensors(self, tensors: Dict[str, np.ndarray]) -> None:
        """Copy tensors into this network, checking names and shapes"""
        expected = self.state_tensors()
        missing = sorted(set(expected) - set(tensors))
        if missing:
            raise ConfigurationError(f"Checkpoint is missing tensors: {missing}")
        for layer in self.layers:
            for attr in ("W", "b", "running_mean", "running_var"):
                key = f"{layer.name}.{attr}"
                if key not in expected:
                    continue
                value = np.asarray(tensors[key], dtype=np.float64)
                if value.shape != expected[key].shape:
                    raise ConfigurationError(
                        f"Shape mismatch for {key}: checkpoint {value.shape} vs network {expected[key].shape}")
                setattr(layer, attr, value.copy())

    def clone(self) -> "Network":
        return copy.deepcopy(self)

    @property
    def n_parameters(self) -> int:
        return int(sum(p.size for _, p in self.parameters()))


@dataclass
class GradientSet:
    """d(loss)/d(param) for every layer; None entries for parameterless layers"""
    weights: List[Optional[np.ndarray]] = field(default_factory=list)
    biases: List[Optional[np.ndarray]] = field(default_factory=list)
    loss: float = 0.0


def _check_finite(array: np.ndarray, what: str, layer: Optional[Layer] = None) -> None:
    if not np.all(np.isfinite(array)):
        diagnostics = {"where": what}
        if layer is not None:
            diagnostics["layer"] = layer.name or layer.kind
        raise NumericError("Non-finite values encountered", diagnostics)


def _activate(layer: Layer, z: np.ndarray) -> np.ndarray:
    if layer.activation == "relu":
        return np.maximum(z, 0.0)
    if layer.activation == "leaky_relu":
        return np.where(z > 0, z, layer.alpha * z)
    if layer.activation == "softmax":
        return softmax(z, 1.0)
    return z


def _activation_backward(layer: Layer, z: np.ndarray, a: np.ndarray, grad: np.ndarray) -> np.ndarray:
    if layer.activation == "relu":
        return grad * (z > 0)
    if layer.activation == "leaky_relu":
        return grad * np.where(z > 0, 1.0, layer.alpha)
    if layer.activation == "softmax":
        return a * (grad - np.sum(grad * a, axis=-1, keepdims=True))
    return grad


def _conv_windows(x: np.ndarray, k: int, stride: int) -> np.ndarray:
    """[N, C, H, W] -> [N, C, Ho, Wo, k, k] view of receptive fields"""
    return sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]


def _layer_forward(layer: Layer, x: np.ndarray, training: bool) -> Tuple[np.ndarray, tuple]:
    layer.output_shape(tuple(x.shape[1:]))

    if layer.kind == "dense":
        z = x @ layer.W.T + layer.b
        cache = (x,)
    elif layer.kind == "conv2d":
        windows = _conv_windows(x, layer.kernel_size, layer.stride)
        z = np.tensordot(windows, layer.W, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        z = z + layer.b[None, :, None, None]
        cache = (x, windows)
    elif layer.kind == "batchnorm":
        if training:
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            layer.running_mean = layer.momentum * layer.running_mean + (1.0 - layer.momentum) * mean
            layer.running_var = layer.momentum * layer.running_var + (1.0 - layer.momentum) * var
        else:
            mean, var = layer.running_mean, layer.running_var
        std = np.sqrt(var + layer.eps)
        x_hat = (x - mean) / std
        z = layer.W * x_hat + layer.b
        cache = (x_hat, std, training)
    else:
        z = x.reshape(x.shape[0], -1)
        cache = (x.shape,)

    a = _activate(layer, z)
    return a, (cache, z, a)


def _layer_backward(layer: Layer, cache: tuple, grad: np.ndarray) -> Tuple[np.ndarray, Optional[np.ndarray], Optional[np.ndarray]]:
    inner, z, a = cache
    g = _activation_backward(layer, z, a, grad)

    if layer.kind == "dense":
        (x,) = inner
        return g @ layer.W, g.T @ x, g.sum(axis=0)

    if layer.kind == "conv2d":
        x, windows = inner
        k, s = layer.kernel_size, layer.stride
        dW = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))
        db = g.sum(axis=(0, 2, 3))
        dx = np.zeros_like(x)
        ho, wo = g.shape[2], g.shape[3]
        for i in range(k):
            for j in range(k):
                contrib = np.tensordot(g, layer.W[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
                dx[:, :, i:i + s * (ho - 1) + 1:s, j:j + s * (wo - 1) + 1:s] += contrib
        return dx, dW, db

    if layer.kind == "batchnorm":
        x_hat, std, training = inner
        dgamma = np.sum(g * x_hat, axis=0)
        dbeta = np.sum(g, axis=0)
        dx_hat = g * layer.W
        if training:
            n = g.shape[0]
            dx = (n * dx_hat - dx_hat.sum(axis=0) - x_hat * np.sum(dx_hat * x_hat, axis=0)) / (n * std)
        else:
            dx = dx_hat / std
        return dx, dgamma, dbeta

    (shape,) = inner
    return g.reshape(shape), None, None


def _forward_with_caches(net: Network, batch: np.ndarray, training: bool) -> Tuple[np.ndarray, List[tuple]]:
    x = np.asarray(batch, dtype=np.float64)
    caches = []
    for layer in net.layers:
        x, cache = _layer_forward(layer, x, training)
        caches.append(cache)
    _check_finite(x, "forward output")
    return x, caches


def forward(net: Network, batch: np.ndarray, training: bool = False) -> np.ndarray:
    """
    Run a batch through the network

    Args:
        net: Network to evaluate
        batch: Input with the batch size as leading dimension
        training: Batchnorm uses batch statistics (and updates running stats) when True

    Returns:
        Activations of the final layer
    """
    output, _ = _forward_with_caches(net, batch, training)
    return output


def compute_loss(net: Network, prediction: np.ndarray, target: np.ndarray,
                 mask: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
    """
    Loss and its gradient with respect to the prediction

    mse is 1/(2N) * sum ||mask * (y - t)||^2; cross-entropy is the mean over
    the batch of -sum t * log(clamp(p)).
    """
    if prediction.shape != target.shape:
        raise ConfigurationError(f"Target shape {target.shape} does not match output shape {prediction.shape}")
    n = prediction.shape[0]
    if net.loss == "mse":
        diff = prediction - target
        if mask is not None:
            diff = diff * mask
        return 0.5 * float(np.sum(diff ** 2)) / n, diff / n

    clamped = np.clip(prediction, CE_CLAMP, 1.0)
    loss = -float(np.sum(target * np.log(clamped))) / n
    grad = np.where(prediction > CE_CLAMP, -target / (n * clamped), 0.0)
    return loss, grad


def backward(net: Network, batch: np.ndarray, target: np.ndarray,
             mask: Optional[np.ndarray] = None, training: bool = True) -> GradientSet:
    """
    Gradients of the loss with respect to every W and b

    Args:
        net: Network to differentiate
        batch: Input batch
        target: Target with the same shape as the network output
        mask: Optional 0/1 mask over outputs (mse only) so that only selected outputs contribute
        training: Batchnorm mode for the forward pass

    Returns:
        GradientSet with one (dW, db) entry per layer and the batch loss
    """
    prediction, caches = _forward_with_caches(net, batch, training)
    loss, grad = compute_loss(net, prediction, np.asarray(target, dtype=np.float64), mask)

    weights: List[Optional[np.ndarray]] = [None] * len(net.layers)
    biases: List[Optional[np.ndarray]] = [None] * len(net.layers)
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        grad, dW, db = _layer_backward(layer, caches[idx], grad)
        weights[idx], biases[idx] = dW, db

    return GradientSet(weights=weights, biases=biases, loss=loss)


def sgd_step(net: Network, grads: GradientSet, lr: float) -> Network:
    """
    One SGD update: param <- param - lr * (grad + l2 * param)

    Batchnorm running statistics are not touched. The network is updated in
    place and returned; on a non-finite update nothing is changed.
    """
    if lr <= 0:
        raise ConfigurationError(f"learning rate must be > 0, got {lr}")

    updates = []
    for idx, layer in enumerate(net.layers):
        if not layer.has_params:
            continue
        new_W = layer.W - lr * (grads.weights[idx] + layer.l2 * layer.W)
        new_b = layer.b - lr * (grads.biases[idx] + layer.l2 * layer.b)
        _check_finite(new_W, "sgd update", layer)
        _check_finite(new_b, "sgd update", layer)
        updates.append((layer, new_W, new_b))

    for layer, new_W, new_b in updates:
        layer.W, layer.b = new_W, new_b
    return net


def dense_layer(in_dim: int, out_dim: int, rng: np.random.Generator, activation: str = "none",
                alpha: float = 0.3, l2: float = 0.0, name: str = "") -> Layer:
    """He-uniform dense layer with zero bias"""
    return Layer(kind="dense",
                 W=he_uniform_init((out_dim, in_dim), in_dim, rng),
                 b=np.zeros(out_dim),
                 activation=activation, alpha=alpha, l2=l2, name=name)


def conv2d_layer(in_channels: int, filters: int, kernel: int, stride: int, rng: np.random.Generator,
                 activation: str = "relu", l2: float = 0.0, name: str = "") -> Layer:
    """He-uniform valid-padding conv layer with zero bias"""
    fan_in = in_channels * kernel * kernel
    return Layer(kind="conv2d",
                 W=he_uniform_init((filters, in_channels, kernel, kernel), fan_in, rng),
                 b=np.zeros(filters),
                 activation=activation, stride=stride, l2=l2, name=name)


def batchnorm_layer(dim: int, momentum: float = 0.99, eps: float = 1e-5, name: str = "") -> Layer:
    return Layer(kind="batchnorm", W=np.ones(dim), b=np.zeros(dim), momentum=momentum, eps=eps, name=name)


def flatten_layer(name: str = "flatten") -> Layer:
    return Layer(kind="flatten", name=name)
