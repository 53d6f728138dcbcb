"""Mini-batch training loop, evaluation and checkpoint plumbing."""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np

from .augment import AugmentationConfig, augment_image, sample_rng
from .metrics import ConfusionMatrix, metric_report
from .models import FusionModelConfig, build_model
from .models.fusion import FusionModel
from .sampling import oversample_weights, weighted_sample_indices
from .tensor import SGD, OptimizerState, backward, cross_entropy_loss, no_grad
from .tensor.checkpoint import load_checkpoint, save_checkpoint

log = logging.getLogger(__name__)


@dataclass
class ArrayDataset:
    """In-memory samples: ``images`` N x C x H x W, ``metadata`` N x D, integer ``labels``."""

    labels: np.ndarray
    images: np.ndarray | None = None
    metadata: np.ndarray | None = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = len(self.labels)
        for name in ("images", "metadata"):
            arr = getattr(self, name)
            if arr is not None and len(arr) != n:
                raise ValueError(f"{name} has {len(arr)} rows, labels has {n}")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "ArrayDataset":
        idx = np.asarray(idx)
        return ArrayDataset(
            labels=self.labels[idx],
            images=None if self.images is None else self.images[idx],
            metadata=None if self.metadata is None else self.metadata[idx],
        )


@dataclass
class TrainConfig:
    epochs: int = 25
    batch_size: int = 64
    base_lr: float = 1e-3
    lr_decay_period: int = 7
    lr_decay_factor: float = 0.1
    momentum: float = 0.0
    seed: int = 0
    oversample: bool = False
    augmentation: AugmentationConfig | None = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")


@dataclass
class EpochLog:
    epoch: int
    loss: float
    lr: float
    val_accuracy: float
    val_kappa: float
    val_macro_f1: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    history: list
    best_epoch: int
    best_state: OrderedDict
    final_state: OrderedDict = field(repr=False, default_factory=OrderedDict)

    @property
    def best(self) -> EpochLog:
        return self.history[self.best_epoch]

    @property
    def final(self) -> EpochLog:
        return self.history[-1]


def _snapshot(model) -> OrderedDict:
    return OrderedDict((k, np.array(v, copy=True)) for k, v in model.state_dict().items())


def _batch_inputs(model: FusionModel, data: ArrayDataset, idx, images=None):
    cfg = model.config
    imgs = None
    if cfg.fusion_mode.uses_images:
        imgs = data.images[idx] if images is None else images
    meta = data.metadata[idx] if cfg.fusion_mode.uses_metadata else None
    return imgs, meta


def predict_logits(model: FusionModel, data: ArrayDataset, batch_size: int = 256) -> np.ndarray:
    """Eval-mode logits; deterministic for fixed parameters."""
    was_training = model.training
    model.eval()
    out = []
    try:
        with no_grad():
            for start in range(0, len(data), batch_size):
                idx = np.arange(start, min(start + batch_size, len(data)))
                out.append(model(*_batch_inputs(model, data, idx)).data)
    finally:
        model.train(was_training)
    return np.concatenate(out) if out else np.zeros((0, model.config.num_classes))


def evaluate(model: FusionModel, data: ArrayDataset, batch_size: int = 256) -> ConfusionMatrix:
    pred = predict_logits(model, data, batch_size).argmax(axis=1)
    return ConfusionMatrix.from_predictions(data.labels, pred, model.config.num_classes)


def _augment_batch(images: np.ndarray, cfg: AugmentationConfig, seed: int, offset: int) -> np.ndarray:
    out = np.empty_like(images)
    for i, img in enumerate(images):
        hwc = np.transpose(img, (1, 2, 0))
        aug = augment_image(hwc, cfg, sample_rng(seed, offset + i))
        out[i] = np.transpose(aug, (2, 0, 1))
    return out


def train_model(model: FusionModel, train: ArrayDataset, val: ArrayDataset, config: TrainConfig = TrainConfig(), on_epoch=None) -> TrainResult:
    """SGD with the step schedule; keeps the best-by-validation-accuracy state (ties: earlier epoch)."""
    if len(train) == 0 or len(val) == 0:
        raise ValueError("training and validation sets must be non-empty")
    params = model.parameters()
    opt = SGD(params, OptimizerState(config.base_lr, config.lr_decay_period, config.lr_decay_factor), config.momentum)
    rng = np.random.default_rng(config.seed)
    weights = oversample_weights(train.labels) if config.oversample else None
    history: list[EpochLog] = []
    best_epoch, best_acc, best_state = -1, -np.inf, None
    n = len(train)
    for epoch in range(config.epochs):
        opt.set_epoch(epoch)
        model.train()
        order = weighted_sample_indices(weights, n, rng) if weights is not None else rng.permutation(n)
        total, seen = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            if len(idx) < 2 and model.config.fusion_mode.uses_images:
                continue  # batch statistics need more than one sample
            images = None
            if config.augmentation is not None and model.config.fusion_mode.uses_images:
                images = _augment_batch(train.images[idx], config.augmentation, config.augmentation.seed, epoch * n + start)
            loss = cross_entropy_loss(model(*_batch_inputs(model, train, idx, images)), train.labels[idx])
            backward(loss, params)
            opt.step()
            total += float(loss.data) * len(idx)
            seen += len(idx)
        report = metric_report(evaluate(model, val))
        entry = EpochLog(epoch, total / max(seen, 1), opt.lr, report.overall_accuracy, report.kappa, report.macro["f1"])
        history.append(entry)
        log.info("epoch %d loss %.4f lr %g val_acc %.4f kappa %.4f", epoch, entry.loss, entry.lr, entry.val_accuracy, entry.val_kappa)
        if entry.val_accuracy > best_acc:
            best_epoch, best_acc, best_state = epoch, entry.val_accuracy, _snapshot(model)
        if on_epoch is not None:
            on_epoch(entry)
    return TrainResult(history=history, best_epoch=best_epoch, best_state=best_state, final_state=_snapshot(model))


def save_model(path, model: FusionModel, state: dict | None = None, metadata: dict | None = None) -> None:
    meta = {"model_config": model.config.to_dict(), "seed": model.seed}
    meta.update(metadata or {})
    save_checkpoint(path, state if state is not None else model.state_dict(), model.config.digest(), meta)


def load_model(path, expected_config: FusionModelConfig | None = None):
    """Rebuild a model from a checkpoint; refuses on a config digest mismatch."""
    expected = expected_config.digest() if expected_config is not None else None
    tensors, header = load_checkpoint(path, expected_digest=expected)
    cfg = FusionModelConfig.from_dict(header["metadata"]["model_config"])
    model = build_model(cfg, header["metadata"].get("seed", 0))
    model.load_state_dict(tensors)
    return model, header
