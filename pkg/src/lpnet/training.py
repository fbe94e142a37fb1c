"""Per-sample stochastic gradient descent with inverse-time learning-rate
decay and L2 regularization, plus evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import shuffle_epoch
from .layers import softmax_nll
from .model import Model


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 0.01
    lr_decay: float = 1e-5   # per-update
    l2: float = 1e-5
    epochs: int = 10
    batch_size: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.lr0 <= 0:
            raise ValueError(f"lr0 must be positive, got {self.lr0}")
        if self.lr_decay < 0 or self.l2 < 0:
            raise ValueError("lr_decay and l2 must be non-negative")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")


@dataclass
class Metrics:
    accuracy: float
    error_rate: float
    mean_energy: float
    confusion: np.ndarray = field(repr=False)   # (n_classes, n_classes) counts
    per_sample_energy: list[float] = field(repr=False)


def lr_at(config: TrainConfig, t: int) -> float:
    """Inverse-time decayed rate lr0 / (1 + decay * t) at update counter t."""
    return config.lr0 / (1.0 + config.lr_decay * t)


def sgd_update(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
               lr: float, l2: float) -> None:
    """In-place w <- w - lr * (g + l2 * w) over every parameter tensor."""
    for name, w in params.items():
        g = grads[name]
        if g.shape != w.shape:
            raise ValueError(
                f"gradient shape {g.shape} does not match parameter "
                f"{name} shape {w.shape}")
        w -= lr * (g + l2 * w)


def train_epoch(model: Model, images: np.ndarray, labels: np.ndarray,
                config: TrainConfig, epoch: int, step: int = 0
                ) -> tuple[float, int]:
    """One pass over the data in a fresh shuffled order.

    Updates the model in place, one forward/backward/update per sample
    (or per mini-batch when batch_size > 1). Returns the mean training
    energy and the advanced update counter, which the caller threads
    through epochs so the decay schedule keeps progressing.
    """
    n = images.shape[0]
    order = shuffle_epoch(n, config.seed, epoch)
    params = model.parameters()
    total = 0.0
    batch: list[int] = []
    for i in order:
        batch.append(int(i))
        if len(batch) < config.batch_size:
            continue
        total += _apply_batch(model, params, images, labels, batch, config, step)
        step += 1
        batch = []
    if batch:
        total += _apply_batch(model, params, images, labels, batch, config, step)
        step += 1
    return total / n, step


def _apply_batch(model: Model, params: dict[str, np.ndarray],
                 images: np.ndarray, labels: np.ndarray, batch: list[int],
                 config: TrainConfig, step: int) -> float:
    acc: dict[str, np.ndarray] | None = None
    energy_sum = 0.0
    for i in batch:
        _, energy, cache = model.forward(images[i], int(labels[i]))
        energy_sum += energy
        _, loss_grad = softmax_nll(cache.logits, int(labels[i]))
        grads = model.backward(cache, loss_grad)
        if acc is None:
            acc = grads
        else:
            for name in acc:
                acc[name] += grads[name]
    scale = 1.0 / len(batch)
    for name in acc:
        acc[name] *= scale
    sgd_update(params, acc, lr_at(config, step), config.l2)
    return energy_sum


def evaluate(model: Model, images: np.ndarray, labels: np.ndarray) -> Metrics:
    """Argmax-of-logits accuracy, confusion counts and per-sample energies.

    Ties break to the lowest class index.
    """
    n = images.shape[0]
    n_classes = model.config.n_classes
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    energies: list[float] = []
    for i in range(n):
        target = int(labels[i])
        logits, energy, _ = model.forward(images[i], target)
        pred = int(np.argmax(logits))
        confusion[target, pred] += 1
        energies.append(energy)
    correct = int(np.trace(confusion))
    accuracy = correct / n if n else 0.0
    mean_energy = float(np.mean(energies)) if energies else 0.0
    return Metrics(
        accuracy=accuracy,
        error_rate=1.0 - accuracy,
        mean_energy=mean_energy,
        confusion=confusion,
        per_sample_energy=energies,
    )
