"""Training loop: balanced augmented batches, Adam, plateau lr decay."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..datagen import Dataset, Sample, balanced_batches
from .model import Graph, backward, euclidean_loss, forward
from .optim import AdamState, adam_step

IMPROVEMENT_DELTA = 1e-4

# Per-purpose RNG streams derived from the one training seed.
_BALANCE_OFFSET = 1
_AUGMENT_OFFSET = 2
_DROPOUT_OFFSET = 3


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    decay_factor: float = 0.5
    plateau_patience: int = 10
    batch_size: int = 128
    batches_per_epoch: int = 50
    epochs: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise TrainingError(f"learning rate must be positive, got {self.lr}")
        if not (0.0 < self.decay_factor < 1.0):
            raise TrainingError(f"decay factor must be in (0, 1), got {self.decay_factor}")


@dataclass(frozen=True)
class HistoryRow:
    epoch: int
    train_loss: float | None  # None on the pre-training baseline row
    val_loss: float
    lr: float


def batch_tensor(samples: list[Sample]) -> tuple[np.ndarray, np.ndarray]:
    """Stack samples into a ((N,3,H,W) [0,1] float32, (N,2) labels) pair."""
    x = np.stack([s.image for s in samples]).astype(np.float32) / 255.0
    x = x.transpose(0, 3, 1, 2)
    t = np.array([[s.label.mx, s.label.my] for s in samples], dtype=np.float32)
    return x, t


def evaluate_loss(graph: Graph, params: dict, ds: Dataset, chunk: int = 256) -> float:
    """Infer-mode Euclidean loss over a whole dataset."""
    if not ds.samples:
        raise TrainingError("cannot evaluate on an empty dataset")
    total = 0.0
    for i in range(0, len(ds.samples), chunk):
        part = ds.samples[i : i + chunk]
        x, t = batch_tensor(part)
        fwd = forward(graph, params, x, "infer")
        total += euclidean_loss(fwd.output, t) * len(part)
    return total / len(ds.samples)


def train(
    graph: Graph,
    params: dict[str, np.ndarray],
    train_ds: Dataset,
    val_ds: Dataset,
    cfg: TrainConfig,
    augment=None,
    near_zero_tau: float = 0.1,
    max_near_zero_frac: float = 0.5,
) -> tuple[dict[str, np.ndarray], list[HistoryRow]]:
    """Train the network, returning the best-validation parameters.

    Per epoch, cfg.batches_per_epoch batches are drawn from the balanced
    stream and passed through `augment` (a callable (sample, rng) ->
    sample) when given.  Validation runs in infer mode after every epoch;
    when it fails to improve on the best value by at least 1e-4 for
    plateau_patience consecutive epochs, the learning rate is halved by
    decay_factor and the counter restarts.  History row 0 holds the
    pre-training validation baseline.
    """
    if not train_ds.samples or not val_ds.samples:
        raise TrainingError("training and validation datasets must be non-empty")
    if cfg.epochs == 0:
        return params, []

    stream = balanced_batches(
        train_ds, cfg.batch_size, near_zero_tau, max_near_zero_frac, seed=cfg.seed + _BALANCE_OFFSET
    )
    aug_rng = np.random.default_rng(cfg.seed + _AUGMENT_OFFSET)
    drop_rng = np.random.default_rng(cfg.seed + _DROPOUT_OFFSET)

    lr = cfg.lr
    opt = AdamState()
    val0 = evaluate_loss(graph, params, val_ds)
    history = [HistoryRow(0, None, val0, lr)]
    best_val = val0
    best = {k: v.copy() for k, v in params.items()}
    bad_epochs = 0

    for epoch in range(1, cfg.epochs + 1):
        losses = []
        for _ in range(cfg.batches_per_epoch):
            batch = next(stream)
            if augment is not None:
                batch = [augment(s, aug_rng) for s in batch]
            x, t = batch_tensor(batch)
            fwd = forward(graph, params, x, "train", drop_rng)
            loss, grads = backward(graph, params, fwd, t)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}")
            params, opt = adam_step(params, grads, opt, lr)
            losses.append(loss)

        val = evaluate_loss(graph, params, val_ds)
        history.append(HistoryRow(epoch, float(np.mean(losses)), val, lr))
        if val <= best_val - IMPROVEMENT_DELTA:
            best_val = val
            best = {k: v.copy() for k, v in params.items()}
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.plateau_patience:
                lr *= cfg.decay_factor
                bad_epochs = 0

    return best, history


def save_history(history: list[HistoryRow], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,train_loss,val_loss,lr\n")
        for row in history:
            train_loss = "" if row.train_loss is None else f"{row.train_loss:.6f}"
            fh.write(f"{row.epoch},{train_loss},{row.val_loss:.6f},{row.lr:.6f}\n")
