"""Adam training loop with exponential learning-rate decay.

The learning rate is interpolated geometrically from lr_start to lr_end
across the whole run: lr(t) = lr_start * (lr_end/lr_start)**(t/T) with T
the total step count. Training is single-threaded and fully deterministic
for a given seed (shuffling, dropout and initialization draw from
independent seeded streams).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..activations import DomainError
from . import model
from .mnist import Dataset

__all__ = [
    "OptimizerConfig",
    "AdamState",
    "EpochStats",
    "TrainReport",
    "TrainingDiverged",
    "REPORTED_XENT_SCALE",
    "learning_rate_at",
    "cross_entropy_metric",
    "evaluate",
    "train",
]

# The published accuracy table reports cross-entropy in the 2-3 range for
# nets whose mean per-sample loss is ~0.025; that magnitude convention is
# the classic tutorial's "mean * 100". Both the raw mean and this scaled
# value are reported.
REPORTED_XENT_SCALE = 100.0


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass(frozen=True)
class OptimizerConfig:
    lr_start: float = 0.003
    lr_end: float = 0.0001
    batch_size: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.lr_end <= self.lr_start:
            raise DomainError(
                f"need 0 < lr_end <= lr_start, got {self.lr_end} / {self.lr_start}"
            )
        if self.batch_size < 1:
            raise DomainError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise DomainError("betas must lie in [0, 1)")


class AdamState:
    """First/second moment slots mirroring the parameter structure."""

    def __init__(self, params):
        self.m = [{k: np.zeros_like(v) for k, v in p.items()} for p in params]
        self.v = [{k: np.zeros_like(v) for k, v in p.items()} for p in params]
        self.t = 0

    def step(self, params, grads, lr: float, cfg: OptimizerConfig):
        self.t += 1
        b1, b2 = cfg.beta1, cfg.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            for key in p:
                gk = g[key]
                m[key] = b1 * m[key] + (1.0 - b1) * gk
                v[key] = b2 * v[key] + (1.0 - b2) * (gk * gk)
                m_hat = m[key] / bc1
                v_hat = v[key] / bc2
                p[key] -= (lr * m_hat / (np.sqrt(v_hat) + cfg.epsilon)).astype(p[key].dtype)


def learning_rate_at(step: int, total_steps: int, lr_start: float, lr_end: float) -> float:
    """Geometric interpolation from lr_start (step 0) toward lr_end (step T)."""
    if total_steps <= 0:
        return lr_start
    frac = step / total_steps
    return lr_start * (lr_end / lr_start) ** frac


def cross_entropy_metric(logits, labels):
    """(raw mean cross-entropy, value on the reported scale) for a whole
    evaluation set."""
    from .layers import softmax_cross_entropy

    raw, _ = softmax_cross_entropy(np.asarray(logits), np.asarray(labels))
    return raw, raw * REPORTED_XENT_SCALE


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    test_accuracy: float
    test_xent: float
    test_xent_scaled: float
    alphas: tuple


@dataclass(frozen=True)
class TrainReport:
    epochs: tuple
    final_alphas: tuple
    seed: int
    wall_time_s: float
    initial_test_accuracy: float
    alpha_layer_count: int = field(default=0)

    def to_csv(self) -> str:
        header = ["epoch", "train_loss", "test_accuracy", "test_xent"]
        header += [f"alpha_layer_{i}" for i in range(self.alpha_layer_count)]
        lines = [",".join(header)]
        for e in self.epochs:
            row = [
                str(e.epoch),
                f"{e.train_loss:.6f}",
                f"{e.test_accuracy:.2f}",
                f"{e.test_xent:.6f}",
            ]
            row += [f"{a:.6f}" for a in e.alphas]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def _alpha_values(config, params):
    vals = []
    for layer, p in zip(config.layers, params):
        if isinstance(layer, model.Activation) and layer.learnable_alpha:
            vals.append(float(p["alpha"][0]))
    return tuple(vals)


def evaluate(config, params, ds: Dataset, batch_size: int = 100):
    """(accuracy %, raw mean cross-entropy, scaled cross-entropy) over ds."""
    n = len(ds)
    correct = 0
    all_logits = np.empty((n, 10), dtype=np.float64)
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        logits, _ = model.forward(config, params, ds.images[start:stop], mode="eval")
        all_logits[start:stop] = logits
        correct += int(np.sum(logits.argmax(axis=1) == ds.labels[start:stop]))
    raw, scaled = cross_entropy_metric(all_logits, ds.labels)
    return 100.0 * correct / n, raw, scaled


def _diagnose_nonfinite(config, cache):
    for i, (layer, c) in enumerate(zip(config.layers, cache)):
        out = None
        if isinstance(layer, model.Softmax):
            out = c
        elif isinstance(layer, model.Activation):
            out = c[1]
        if out is not None and not np.all(np.isfinite(out)):
            return f"layer {i} ({type(layer).__name__})"
    return "loss reduction"


def train(
    config: model.NetworkConfig,
    optimizer: OptimizerConfig,
    data,
    epochs: int,
    seed: int = 0,
    log=None,
) -> TrainReport:
    """Train on (train_ds, test_ds) for the given number of epochs.

    Evaluates the test set after every epoch; learnable alphas are clamped
    to the stability floor after every optimizer step. A non-finite loss
    aborts with a diagnostic naming the step and the first offending layer.
    """
    train_ds, test_ds = data
    if epochs < 0:
        raise DomainError("epochs must be >= 0")
    t_start = time.perf_counter()
    params = model.init_weights(config, seed)
    shuffle_rng = np.random.default_rng((seed, 0xD5))
    dropout_rng = np.random.default_rng((seed, 0xDF))
    adam = AdamState(params)

    steps_per_epoch = len(train_ds) // optimizer.batch_size
    total_steps = epochs * steps_per_epoch
    alpha_count = len(_alpha_values(config, params))

    initial_acc, _, _ = evaluate(config, params, test_ds, optimizer.batch_size)
    if log:
        log(f"initial test accuracy {initial_acc:.2f}%")

    rows = []
    step = 0
    for epoch in range(1, epochs + 1):
        order = shuffle_rng.permutation(len(train_ds))
        losses = []
        for b in range(steps_per_epoch):
            idx = order[b * optimizer.batch_size : (b + 1) * optimizer.batch_size]
            batch = train_ds.images[idx]
            labels = train_ds.labels[idx]
            logits, cache = model.forward(
                config, params, batch, mode="train", rng=dropout_rng
            )
            from .layers import softmax_cross_entropy

            loss, dlogits = softmax_cross_entropy(logits, labels)
            if not np.isfinite(loss):
                where = _diagnose_nonfinite(config, cache)
                raise TrainingDiverged(
                    f"non-finite loss at step {step} (epoch {epoch}); "
                    f"first non-finite output from {where}"
                )
            grads = model.backward(config, params, cache, labels, dlogits=dlogits)
            lr = learning_rate_at(step, total_steps, optimizer.lr_start, optimizer.lr_end)
            adam.step(params, grads, lr, optimizer)
            model.clamp_alphas(config, params)
            losses.append(loss)
            step += 1
        acc, raw, scaled = evaluate(config, params, test_ds, optimizer.batch_size)
        stats = EpochStats(
            epoch=epoch,
            train_loss=float(np.mean(losses)) if losses else float("nan"),
            test_accuracy=acc,
            test_xent=raw,
            test_xent_scaled=scaled,
            alphas=_alpha_values(config, params),
        )
        rows.append(stats)
        if log:
            log(
                f"epoch {epoch}: train loss {stats.train_loss:.4f}, "
                f"test accuracy {acc:.2f}%, test xent {raw:.4f} "
                f"(reported scale {scaled:.3f})"
                + (f", alphas {stats.alphas}" if stats.alphas else "")
            )

    return TrainReport(
        epochs=tuple(rows),
        final_alphas=_alpha_values(config, params),
        seed=seed,
        wall_time_s=time.perf_counter() - t_start,
        initial_test_accuracy=initial_acc,
        alpha_layer_count=alpha_count,
    )
