"""Epoch/batch training loop with an end-of-epoch hook system.

The loop owns all randomness through per-epoch generators seeded by
(run seed, epoch index), so a paused-and-resumed run draws exactly the
same shuffles and augmentation parameters as an uninterrupted one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from . import augment
from .datasets import TrainingStore
from .exceptions import TrainingError, ValidationError
from .model import BackendContract

AUGMENTATION_MODES = ("none", "mixup", "cutmix", "cutout", "imil")


@dataclass(frozen=True)
class PredictionRecord:
    """One sample's model output: argmax class, per-class probabilities,
    and confidence (the max probability)."""

    sample_id: str
    true_label: int
    predicted_label: int
    probabilities: tuple[float, ...]
    confidence: float

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "true_label": self.true_label,
            "predicted_label": self.predicted_label,
            "probabilities": list(self.probabilities),
            "confidence": self.confidence,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PredictionRecord":
        return cls(
            sample_id=d["sample_id"],
            true_label=int(d["true_label"]),
            predicted_label=int(d["predicted_label"]),
            probabilities=tuple(float(p) for p in d["probabilities"]),
            confidence=float(d["confidence"]),
        )


class HookSignal(enum.Enum):
    PROCEED = "proceed"
    PAUSE_FOR_FEEDBACK = "pause-for-feedback"


@runtime_checkable
class EpochHook(Protocol):
    """End-of-epoch callback.

    Hooks run synchronously, once per epoch, in registration order. A hook
    that gathers feedback blocks inside the call (the training pause) and
    returns PAUSE_FOR_FEEDBACK to record that the store may have mutated.
    Epoch numbers are 1-based: the hook sees epoch=1 after the first
    epoch's weight updates.
    """

    def on_epoch_end(self, epoch: int, backend: BackendContract,
                     store: TrainingStore,
                     predict: Callable[[], list[PredictionRecord]]) -> HookSignal:
        ...


@dataclass
class TrainRunConfig:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 0.001
    optimizer: str = "sgd"
    momentum: float = 0.0
    image_size: int = 224
    seed: int = 0
    augmentation_mode: str = "none"
    # mixup/cutmix Beta parameter; cutout mask edge in pixels
    mixup_alpha: float = 0.2
    cutmix_alpha: float = 0.2
    cutout_size: int = 50
    # draw CutMix label weight independently instead of tying it to box area
    independent_mu: bool = False
    # epochs already completed (resume point); 0 means a fresh run
    start_epoch: int = 0

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValidationError(
                f"learning_rate must be positive, got {self.learning_rate}")
        if self.augmentation_mode not in AUGMENTATION_MODES:
            raise ValidationError(
                f"augmentation_mode must be one of {AUGMENTATION_MODES}, "
                f"got {self.augmentation_mode!r}")
        if self.mixup_alpha <= 0 or self.cutmix_alpha <= 0:
            raise ValidationError("alpha parameters must be positive")
        if self.cutout_size < 1:
            raise ValidationError(f"cutout_size must be >= 1, got {self.cutout_size}")
        if not 0 <= self.start_epoch <= self.epochs:
            raise ValidationError(
                f"start_epoch must lie in [0, {self.epochs}], got {self.start_epoch}")


@dataclass
class EpochStats:
    epoch: int
    loss: float
    train_acc: float
    paused: bool = False


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)

    def rows(self) -> list[tuple[int, float, float]]:
        return [(e.epoch, e.loss, e.train_acc) for e in self.epochs]


def epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    """Generator for one epoch's shuffle and augmentation draws.

    Keyed by (seed, 1-based epoch number) rather than advanced sequentially,
    so resuming at epoch k reproduces the same stream without replaying
    epochs < k.
    """
    return np.random.default_rng([seed, epoch])


def _one_hot(labels: Sequence[int]) -> np.ndarray:
    out = np.zeros((len(labels), 2), dtype=np.float64)
    out[np.arange(len(labels)), labels] = 1.0
    return out


def _augment_batch(images: np.ndarray, labels: np.ndarray,
                   config: TrainRunConfig,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Apply the configured batch augmentation; returns (images, soft labels).

    MixUp and CutMix draw one lambda per example and pair each example with
    a shuffled partner from the same batch.
    """
    n = len(images)
    soft = _one_hot(labels)
    mode = config.augmentation_mode
    if mode in ("none", "imil") or n == 1:
        return images, soft
    if mode == "mixup":
        partner = rng.permutation(n)
        out_x = np.empty_like(images)
        out_y = np.empty_like(soft)
        for i in range(n):
            lam = augment.sample_lambda(config.mixup_alpha, rng)
            pair = augment.MixPair(images[i], images[partner[i]],
                                   soft[i], soft[partner[i]], lam)
            out_x[i], out_y[i] = augment.mixup(pair)
        return out_x, out_y
    if mode == "cutmix":
        partner = rng.permutation(n)
        out_x = np.empty_like(images)
        out_y = np.empty_like(soft)
        for i in range(n):
            lam = augment.sample_lambda(config.cutmix_alpha, rng)
            mu = None
            if config.independent_mu:
                mu = augment.sample_lambda(config.cutmix_alpha, rng)
            out_x[i], out_y[i], _ = augment.cutmix(
                images[i], soft[i], images[partner[i]], soft[partner[i]],
                lam, rng, mu=mu)
        return out_x, out_y
    if mode == "cutout":
        out_x = np.empty_like(images)
        for i in range(n):
            out_x[i] = augment.cutout(images[i], config.cutout_size,
                                      config.cutout_size, rng)
        return out_x, soft
    raise ValidationError(f"unknown augmentation mode {mode!r}")


def predict_all(backend: BackendContract, store: TrainingStore,
                batch_size: int = 256) -> list[PredictionRecord]:
    """One record per sample, in store order.

    Predicted class is the argmax of the probabilities with ties broken
    toward the lower index; confidence is the max probability.
    """
    records: list[PredictionRecord] = []
    samples = list(store)
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        probs = backend.probabilities(np.stack([s.pixels for s in chunk]))
        for sample, p in zip(chunk, probs):
            pred = int(np.argmax(p))
            records.append(PredictionRecord(
                sample_id=sample.id,
                true_label=sample.label,
                predicted_label=pred,
                probabilities=tuple(float(v) for v in p),
                confidence=float(np.max(p)),
            ))
    return records


def train(backend: BackendContract, store: TrainingStore,
          config: TrainRunConfig,
          hooks: Sequence[EpochHook] = (),
          stats_sink: Callable[[EpochStats], None] | None = None,
          ) -> tuple[BackendContract, TrainHistory]:
    """Run the epoch/batch loop; hooks fire once per epoch in order.

    Deterministic end-to-end for a fixed seed and scripted feedback: batch
    order and augmentation draws come only from the per-epoch generator,
    and the feedback path never consumes from it. stats_sink, when given,
    receives each epoch's stats before hooks run, so interrupted runs keep
    their completed-epoch history.
    """
    config.validate()
    if len(store) == 0:
        raise ValidationError("cannot train on an empty store")
    history = TrainHistory()
    ids = store.ids()
    for epoch in range(config.start_epoch + 1, config.epochs + 1):
        rng = epoch_rng(config.seed, epoch)
        order = rng.permutation(len(ids))
        batch_losses: list[float] = []
        for start in range(0, len(order), config.batch_size):
            batch_ids = [ids[i] for i in order[start:start + config.batch_size]]
            batch = [store.get(i) for i in batch_ids]
            images = np.stack([s.pixels for s in batch])
            labels = np.array([s.label for s in batch])
            images, soft = _augment_batch(images, labels, config, rng)
            try:
                loss = backend.train_step(images, soft, config.learning_rate)
            except Exception as exc:
                raise TrainingError(
                    f"backend failure at epoch {epoch}, "
                    f"batch starting at index {start}: {exc}") from exc
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss {loss} at epoch {epoch}, "
                    f"batch starting at index {start}")
            batch_losses.append(loss)
        records = predict_all(backend, store)
        stats = EpochStats(
            epoch=epoch,
            loss=float(np.mean(batch_losses)),
            train_acc=sum(r.predicted_label == r.true_label for r in records)
            / len(records),
        )
        if stats_sink is not None:
            stats_sink(stats)
        predict = lambda: predict_all(backend, store)  # noqa: E731
        for hook in hooks:
            signal = hook.on_epoch_end(epoch, backend, store, predict)
            if signal == HookSignal.PAUSE_FOR_FEEDBACK:
                stats.paused = True
        history.epochs.append(stats)
    return backend, history
