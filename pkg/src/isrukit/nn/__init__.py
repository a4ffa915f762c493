"""Minimal CNN trainer: layers, architectures, MNIST loading, Adam loop."""

from .mnist import (
    Dataset,
    IdxFormatError,
    MNIST_FILES,
    load_idx,
    load_mnist,
    load_mnist_dir,
    resolve_mnist_paths,
)
from .model import (
    Activation,
    Conv,
    Dense,
    Dropout,
    MaxPool,
    NetworkConfig,
    Softmax,
    backward,
    build_architecture1,
    build_architecture2,
    clamp_alphas,
    forward,
    init_weights,
    layer_shapes,
    loss_and_gradients,
)
from .training import (
    AdamState,
    EpochStats,
    OptimizerConfig,
    REPORTED_XENT_SCALE,
    TrainReport,
    TrainingDiverged,
    cross_entropy_metric,
    evaluate,
    learning_rate_at,
    train,
)

__all__ = [
    "Dataset",
    "IdxFormatError",
    "MNIST_FILES",
    "load_idx",
    "load_mnist",
    "load_mnist_dir",
    "resolve_mnist_paths",
    "Activation",
    "Conv",
    "Dense",
    "Dropout",
    "MaxPool",
    "NetworkConfig",
    "Softmax",
    "backward",
    "build_architecture1",
    "build_architecture2",
    "clamp_alphas",
    "forward",
    "init_weights",
    "layer_shapes",
    "loss_and_gradients",
    "AdamState",
    "EpochStats",
    "OptimizerConfig",
    "REPORTED_XENT_SCALE",
    "TrainReport",
    "TrainingDiverged",
    "cross_entropy_metric",
    "evaluate",
    "learning_rate_at",
    "train",
]
