"""Network configuration, weight initialization, and whole-network
forward/backward passes.

A network is a flat tuple of layer configs ending in Softmax. Parameters
live outside the config as a list of per-layer dicts (empty for layers
without state), so the same config can be instantiated in float32 for
training or float64 for gradient checking.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ..activations import (
    MIN_LEARNABLE_ALPHA,
    ActivationSpec,
    DomainError,
)
from . import layers

__all__ = [
    "Conv",
    "MaxPool",
    "Dense",
    "Dropout",
    "Activation",
    "Softmax",
    "NetworkConfig",
    "build_architecture1",
    "build_architecture2",
    "layer_shapes",
    "init_weights",
    "forward",
    "backward",
]


@dataclass(frozen=True)
class Conv:
    kernel_h: int
    kernel_w: int
    out_channels: int
    stride: int = 1
    padding: str = "same"

    def __post_init__(self):
        if min(self.kernel_h, self.kernel_w, self.out_channels, self.stride) < 1:
            raise DomainError("conv extents and stride must be >= 1")
        if self.padding not in ("same", "valid"):
            raise DomainError(f"padding must be 'same' or 'valid', got {self.padding!r}")


@dataclass(frozen=True)
class MaxPool:
    size: int
    stride: int

    def __post_init__(self):
        if min(self.size, self.stride) < 1:
            raise DomainError("pool size and stride must be >= 1")


@dataclass(frozen=True)
class Dense:
    units: int

    def __post_init__(self):
        if self.units < 1:
            raise DomainError("dense units must be >= 1")


@dataclass(frozen=True)
class Dropout:
    pkeep: float

    def __post_init__(self):
        if not 0.0 < self.pkeep <= 1.0:
            raise DomainError(f"pkeep must lie in (0, 1], got {self.pkeep}")


@dataclass(frozen=True)
class Activation:
    spec: ActivationSpec
    learnable_alpha: bool = False


@dataclass(frozen=True)
class Softmax:
    pass


@dataclass(frozen=True)
class NetworkConfig:
    layers: tuple
    input_shape: tuple = (28, 28, 1)

    def __post_init__(self):
        if not self.layers or not isinstance(self.layers[-1], Softmax):
            raise DomainError("network must end with a Softmax layer")
        if any(isinstance(l, Softmax) for l in self.layers[:-1]):
            raise DomainError("Softmax may only appear as the final layer")


def build_architecture1(
    activation: ActivationSpec,
    pkeep: float,
    learnable_alpha: bool = False,
) -> NetworkConfig:
    """Three stride-reducing convolutions into a 200-unit hidden layer.

    28x28x1 -> conv 6x6x6 (stride 1) -> conv 5x5x12 (stride 2)
    -> conv 4x4x24 (stride 2) -> flatten (7*7*24 = 1176) -> dense 200
    -> dropout -> dense 10 -> softmax, with the chosen activation after
    each conv and after the hidden dense layer. The 1176-wide flattened
    conv output is what the published description calls its fully
    connected layer; strides and padding are this implementation's
    reading, chosen so that the sizes come out consistent.
    """
    act = Activation(activation, learnable_alpha)
    return NetworkConfig(
        layers=(
            Conv(6, 6, 6, stride=1, padding="same"),
            act,
            Conv(5, 5, 12, stride=2, padding="same"),
            act,
            Conv(4, 4, 24, stride=2, padding="same"),
            act,
            Dense(200),
            act,
            Dropout(pkeep),
            Dense(10),
            Softmax(),
        ),
        input_shape=(28, 28, 1),
    )


def build_architecture2(
    activation: ActivationSpec,
    pkeep_conv: float = 0.7,
    pkeep_fc: float = 0.4,
    learnable_alpha: bool = False,
) -> NetworkConfig:
    """Two 3x3x64 conv pairs with 2x2 max-pooling into a 512-unit hidden
    layer; dropout after each pool (pkeep_conv) and after the hidden dense
    layer (pkeep_fc)."""
    act = Activation(activation, learnable_alpha)
    return NetworkConfig(
        layers=(
            Conv(3, 3, 64), act,
            Conv(3, 3, 64), act,
            MaxPool(2, 2),
            Dropout(pkeep_conv),
            Conv(3, 3, 64), act,
            Conv(3, 3, 64), act,
            MaxPool(2, 2),
            Dropout(pkeep_conv),
            Dense(512), act,
            Dropout(pkeep_fc),
            Dense(10),
            Softmax(),
        ),
        input_shape=(28, 28, 1),
    )


def layer_shapes(config: NetworkConfig):
    """Per-layer output shapes (without the batch dimension)."""
    shape = tuple(config.input_shape)
    shapes = []
    for layer in config.layers:
        if isinstance(layer, Conv):
            h, w, _ = shape
            if layer.padding == "same":
                oh, _, _ = layers.same_padding(h, layer.kernel_h, layer.stride)
                ow, _, _ = layers.same_padding(w, layer.kernel_w, layer.stride)
            else:
                oh = (h - layer.kernel_h) // layer.stride + 1
                ow = (w - layer.kernel_w) // layer.stride + 1
            shape = (oh, ow, layer.out_channels)
        elif isinstance(layer, MaxPool):
            h, w, c = shape
            shape = (
                (h - layer.size) // layer.stride + 1,
                (w - layer.size) // layer.stride + 1,
                c,
            )
        elif isinstance(layer, Dense):
            shape = (layer.units,)
        # Activation, Dropout, Softmax keep the shape
        shapes.append(shape)
    return shapes


def _truncated_normal(rng, shape, std: float, clip_sigmas: float = 2.0):
    """Normal(0, std) with resampling outside +-clip_sigmas standard
    deviations (the initializer convention of the framework era this
    architecture comes from)."""
    out = rng.standard_normal(shape) * std
    bound = clip_sigmas * std
    bad = np.abs(out) > bound
    while np.any(bad):
        out[bad] = rng.standard_normal(int(bad.sum())) * std
        bad = np.abs(out) > bound
    return out


def init_weights(config: NetworkConfig, seed: int, dtype=np.float32):
    """Deterministic parameter set: truncated normal(0, 0.1) weights,
    biases at 0.1, learnable alphas at their spec value."""
    rng = np.random.default_rng(seed)
    params = []
    in_shape = tuple(config.input_shape)
    for layer, out_shape in zip(config.layers, layer_shapes(config)):
        if isinstance(layer, Conv):
            w = _truncated_normal(
                rng, (layer.kernel_h, layer.kernel_w, in_shape[-1], layer.out_channels), 0.1
            )
            params.append(
                {
                    "w": w.astype(dtype),
                    "b": np.full(layer.out_channels, 0.1, dtype=dtype),
                }
            )
        elif isinstance(layer, Dense):
            fan_in = int(np.prod(in_shape))
            w = _truncated_normal(rng, (fan_in, layer.units), 0.1)
            params.append(
                {
                    "w": w.astype(dtype),
                    "b": np.full(layer.units, 0.1, dtype=dtype),
                }
            )
        elif isinstance(layer, Activation) and layer.learnable_alpha:
            params.append({"alpha": np.array([layer.spec.alpha], dtype=dtype)})
        else:
            params.append({})
        in_shape = out_shape
    return params


def _effective_spec(layer: Activation, layer_params) -> ActivationSpec:
    if layer.learnable_alpha:
        return dataclasses.replace(layer.spec, alpha=float(layer_params["alpha"][0]))
    return layer.spec


def forward(config: NetworkConfig, params, batch, mode: str = "train", rng=None):
    """Run the network up to the logits. Returns (logits, cache); the cache
    holds what each layer's backward needs. Dropout fires only in train
    mode and then requires an rng."""
    if mode not in ("train", "eval"):
        raise DomainError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(batch)
    expect = (x.shape[0], *config.input_shape)
    if x.shape != expect:
        raise DomainError(f"batch shape {x.shape} does not match expected {expect}")
    dtype = params[0]["w"].dtype if params and "w" in params[0] else np.float32
    x = x.astype(dtype, copy=False)

    cache = []
    for layer, p in zip(config.layers, params):
        if isinstance(layer, Conv):
            x, c = layers.conv2d_forward(x, p["w"], p["b"], layer.stride, layer.padding)
            cache.append(c)
        elif isinstance(layer, MaxPool):
            x, c = layers.maxpool_forward(x, layer.size, layer.stride)
            cache.append(c)
        elif isinstance(layer, Dense):
            x, c = layers.dense_forward(x, p["w"], p["b"])
            cache.append(c)
        elif isinstance(layer, Dropout):
            train = mode == "train"
            if train and layer.pkeep < 1.0 and rng is None:
                raise DomainError("dropout in train mode requires an rng")
            x, mask = layers.dropout_forward(x, layer.pkeep, train, rng)
            cache.append(mask)
        elif isinstance(layer, Activation):
            spec = _effective_spec(layer, p)
            x, c = layers.activation_forward(spec, x)
            cache.append((spec, c))
        elif isinstance(layer, Softmax):
            cache.append(x)  # logits, for the loss gradient
        else:
            raise DomainError(f"unknown layer config {layer!r}")
    return x, cache


def backward(config: NetworkConfig, params, cache, labels, dlogits=None):
    """Gradients for every parameter given a forward cache.

    If dlogits is not supplied it is derived from softmax cross-entropy
    against the integer labels (the network's training loss).
    """
    if dlogits is None:
        _, dlogits = layers.softmax_cross_entropy(cache[-1], np.asarray(labels))
    grads = [dict() for _ in params]
    dy = dlogits
    for i in range(len(config.layers) - 1, -1, -1):
        layer = config.layers[i]
        if isinstance(layer, Softmax):
            continue
        if isinstance(layer, Conv):
            dy, dw, db = layers.conv2d_backward(dy, params[i]["w"], cache[i])
            grads[i] = {"w": dw, "b": db}
        elif isinstance(layer, MaxPool):
            dy = layers.maxpool_backward(dy, cache[i])
        elif isinstance(layer, Dense):
            dy, dw, db = layers.dense_backward(dy, params[i]["w"], cache[i])
            grads[i] = {"w": dw, "b": db}
        elif isinstance(layer, Dropout):
            dy = layers.dropout_backward(dy, cache[i], layer.pkeep)
        elif isinstance(layer, Activation):
            spec, x_in = cache[i]
            if layer.learnable_alpha:
                g = layers.activation_alpha_grad(spec, dy, x_in)
                grads[i] = {"alpha": np.array([g], dtype=params[i]["alpha"].dtype)}
            dy = layers.activation_backward(spec, dy, x_in)
    return grads


def loss_and_gradients(config: NetworkConfig, params, batch, labels, rng=None,
                       mode: str = "train"):
    """One supervised step: forward, softmax cross-entropy, full backward.
    Returns (loss, gradients, logits)."""
    logits, cache = forward(config, params, batch, mode=mode, rng=rng)
    loss, dlogits = layers.softmax_cross_entropy(logits, np.asarray(labels))
    grads = backward(config, params, cache, labels, dlogits=dlogits)
    return loss, grads, logits


def clamp_alphas(config: NetworkConfig, params) -> None:
    """Keep every learnable alpha at or above the stability floor."""
    for layer, p in zip(config.layers, params):
        if isinstance(layer, Activation) and layer.learnable_alpha:
            floor = p["alpha"].dtype.type(MIN_LEARNABLE_ALPHA)
            if float(floor) < MIN_LEARNABLE_ALPHA:
                # dtype rounding landed below the floor; take the next value up
                floor = np.nextafter(floor, p["alpha"].dtype.type(np.inf))
            np.maximum(p["alpha"], floor, out=p["alpha"])
