"""MLP projection from embedding vectors to feature-norm vectors.

Architecture: one hidden layer with rectifier activation and inverted
dropout, a linear output layer, mean-squared-error loss, Adam updates.
Training is fully deterministic given (seed, config, dataset): one seeded
generator drives weight init, the train/validation split, per-epoch batch
shuffles, and dropout masks, in that fixed order.

Model files are a binary container: one JSON header line (config,
metadata, format version, sha256 checksum of the weight bytes) followed by
little-endian float32 blocks for W1, b1, W2, b2.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .store import TrainingSet

MODEL_FORMAT_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


class ModelFormatError(ValueError):
    """Model file has an unknown layout or format version."""


class ChecksumError(ModelFormatError):
    """Weight bytes do not match the header checksum."""


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int
    output_dim: int
    hidden_size: int
    dropout: float = 0.5
    batch_size: int = 32
    learning_rate: float = 1e-3
    max_epochs: int = 100
    patience: int = 6
    seed: int = 0
    val_fraction: float = 0.2

    def __post_init__(self) -> None:
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be >= 1")
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs and patience must be >= 1")


@dataclass(frozen=True)
class ModelMetadata:
    """Binds a trained projector to its source LM, layer, and norm space."""

    source_model: str
    layer: int
    norm_space: str
    feature_names: tuple[str, ...]


@dataclass(frozen=True)
class ProjectorModel:
    config: MlpConfig
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    metadata: ModelMetadata

    def __post_init__(self) -> None:
        c = self.config
        expected = {
            "W1": (c.hidden_size, c.input_dim),
            "b1": (c.hidden_size,),
            "W2": (c.output_dim, c.hidden_size),
            "b2": (c.output_dim,),
        }
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
        if len(self.metadata.feature_names) != c.output_dim:
            raise ValueError(
                f"metadata names {len(self.metadata.feature_names)} features, "
                f"output_dim is {c.output_dim}"
            )


@dataclass(frozen=True)
class TrainReport:
    train_losses: tuple[float, ...]
    val_losses: tuple[float, ...]
    best_epoch: int
    best_val_loss: float
    stopped_early: bool
    epochs_run: int


class PatienceTracker:
    """Early stopping on strict improvement of the best-seen loss.

    ``update`` records one epoch and returns whether it improved the best;
    ``should_stop`` turns true once ``patience`` consecutive epochs have
    failed to improve it.
    """

    def __init__(self, patience: int):
        self.patience = patience
        self.best_loss = math.inf
        self.best_epoch = 0
        self._stale = 0

    def update(self, epoch: int, loss: float) -> bool:
        if loss < self.best_loss:
            self.best_loss = loss
            self.best_epoch = epoch
            self._stale = 0
            return True
        self._stale += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self._stale >= self.patience


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean over all batch elements and output dimensions of squared error."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return float(np.mean((pred - target) ** 2))


def _dropout_mask(rng: np.random.Generator, shape: tuple[int, ...], dropout: float) -> np.ndarray:
    keep = 1.0 - dropout
    return (rng.random(shape) < keep).astype(np.float64) / keep


def loss_and_grads(
    W1: np.ndarray,
    b1: np.ndarray,
    W2: np.ndarray,
    b2: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    mask: np.ndarray | None = None,
) -> tuple[float, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]:
    """MSE loss of the two-layer net and its analytic parameter gradients.

    ``mask`` is a precomputed inverted-dropout mask over the hidden
    activations (None disables dropout, the configuration the gradient
    check runs in).
    """
    z1 = X @ W1.T + b1
    a1 = np.maximum(z1, 0.0)
    a1d = a1 if mask is None else a1 * mask
    pred = a1d @ W2.T + b2

    n_elem = pred.size
    diff = pred - Y
    loss = float(np.mean(diff**2))

    dpred = (2.0 / n_elem) * diff
    gW2 = dpred.T @ a1d
    gb2 = dpred.sum(axis=0)
    da1d = dpred @ W2
    da1 = da1d if mask is None else da1d * mask
    dz1 = da1 * (z1 > 0.0)
    gW1 = dz1.T @ X
    gb1 = dz1.sum(axis=0)
    return loss, (gW1, gb1, gW2, gb2)


def _eval_forward(W1, b1, W2, b2, X):
    return np.maximum(X @ W1.T + b1, 0.0) @ W2.T + b2


def forward(
    model: ProjectorModel,
    x: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Run the projector on a vector or a batch of row vectors.

    Eval mode is deterministic. Train mode masks hidden activations with
    Bernoulli(1 - dropout) draws from ``rng`` and rescales by the keep
    probability (inverted dropout).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != model.config.input_dim:
        raise ValueError(
            f"input has dimension {X.shape[1]}, model expects {model.config.input_dim}"
        )
    W1 = model.W1.astype(np.float64)
    b1 = model.b1.astype(np.float64)
    W2 = model.W2.astype(np.float64)
    b2 = model.b2.astype(np.float64)
    if mode == "eval":
        out = _eval_forward(W1, b1, W2, b2, X)
    elif mode == "train":
        if rng is None:
            raise ValueError("train mode requires an rng")
        a1 = np.maximum(X @ W1.T + b1, 0.0)
        if model.config.dropout > 0.0:
            a1 = a1 * _dropout_mask(rng, a1.shape, model.config.dropout)
        out = a1 @ W2.T + b2
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return out[0] if single else out


def hidden_activations(
    model: ProjectorModel,
    x: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Post-rectifier hidden activations, with train-mode dropout applied."""
    x = np.asarray(x, dtype=np.float64)
    a1 = np.maximum(x @ model.W1.astype(np.float64).T + model.b1.astype(np.float64), 0.0)
    if mode == "train":
        if rng is None:
            raise ValueError("train mode requires an rng")
        if model.config.dropout > 0.0:
            a1 = a1 * _dropout_mask(rng, a1.shape, model.config.dropout)
    elif mode != "eval":
        raise ValueError(f"unknown mode {mode!r}")
    return a1


def project(model: ProjectorModel, cwe: np.ndarray) -> np.ndarray:
    """Eval-mode projection of one embedding into the model's feature space.

    Output is aligned with ``model.metadata.feature_names`` and is not
    clamped to the norm scale: predictions may exceed the rating bounds.
    """
    cwe = np.asarray(cwe, dtype=np.float64)
    if cwe.ndim != 1:
        raise ValueError("project expects a single vector")
    return forward(model, cwe, mode="eval")


def ranked_features(model: ProjectorModel, cwe: np.ndarray) -> list[tuple[str, float]]:
    """(name, value) pairs sorted by value descending; ties keep the
    feature-list order (stable sort)."""
    values = project(model, cwe)
    pairs = list(zip(model.metadata.feature_names, (float(v) for v in values)))
    return sorted(pairs, key=lambda p: -p[1])


def _default_metadata(output_dim: int) -> ModelMetadata:
    return ModelMetadata(
        source_model="unknown",
        layer=0,
        norm_space="unknown",
        feature_names=tuple(f"f{i}" for i in range(output_dim)),
    )


def train(
    dataset: TrainingSet,
    config: MlpConfig,
    metadata: ModelMetadata | None = None,
    epoch_hook: Callable[[int, float], None] | None = None,
) -> tuple[ProjectorModel, TrainReport]:
    """Train a projector and return the best-validation-loss weights.

    The seeded shuffle assigns the first 80% (1 - val_fraction) of the
    dataset to training and the rest to validation. Epochs iterate seeded
    mini-batches with Adam updates; validation loss is computed in eval
    mode after every epoch. Training halts once the loss has failed to
    improve on the best for ``patience`` consecutive epochs, or at
    ``max_epochs``. ``epoch_hook(epoch, val_loss)`` runs after each epoch
    and may raise to abort (used for trial pruning).
    """
    n = len(dataset)
    if n < 5:
        raise ValueError(f"dataset has {n} samples; need at least 5 for a split")
    X = np.asarray(dataset.inputs, dtype=np.float64)
    Y = np.asarray(dataset.targets, dtype=np.float64)
    if X.shape != (n, config.input_dim):
        raise ValueError(f"inputs are {X.shape}, config expects (n, {config.input_dim})")
    if Y.shape != (n, config.output_dim):
        raise ValueError(f"targets are {Y.shape}, config expects (n, {config.output_dim})")

    rng = np.random.default_rng(config.seed)

    k1 = 1.0 / math.sqrt(config.input_dim)
    k2 = 1.0 / math.sqrt(config.hidden_size)
    W1 = rng.uniform(-k1, k1, size=(config.hidden_size, config.input_dim))
    b1 = rng.uniform(-k1, k1, size=config.hidden_size)
    W2 = rng.uniform(-k2, k2, size=(config.output_dim, config.hidden_size))
    b2 = rng.uniform(-k2, k2, size=config.output_dim)
    params = [W1, b1, W2, b2]

    perm = rng.permutation(n)
    n_train = int(round(n * (1.0 - config.val_fraction)))
    n_train = min(max(n_train, 1), n - 1)
    train_idx, val_idx = perm[:n_train], perm[n_train:]
    X_train, Y_train = X[train_idx], Y[train_idx]
    X_val, Y_val = X[val_idx], Y[val_idx]

    adam_m = [np.zeros_like(p) for p in params]
    adam_v = [np.zeros_like(p) for p in params]
    step = 0

    tracker = PatienceTracker(config.patience)
    best_params = [p.copy() for p in params]
    train_losses: list[float] = []
    val_losses: list[float] = []
    stopped_early = False

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n_train)
        sq_err_total = 0.0
        elem_total = 0
        for start in range(0, n_train, config.batch_size):
            batch = order[start : start + config.batch_size]
            Xb, Yb = X_train[batch], Y_train[batch]
            mask = None
            if config.dropout > 0.0:
                mask = _dropout_mask(rng, (len(batch), config.hidden_size), config.dropout)
            loss, grads = loss_and_grads(*params, Xb, Yb, mask=mask)
            sq_err_total += loss * Yb.size
            elem_total += Yb.size

            step += 1
            bc1 = 1.0 - ADAM_BETA1**step
            bc2 = 1.0 - ADAM_BETA2**step
            for i, g in enumerate(grads):
                adam_m[i] = ADAM_BETA1 * adam_m[i] + (1.0 - ADAM_BETA1) * g
                adam_v[i] = ADAM_BETA2 * adam_v[i] + (1.0 - ADAM_BETA2) * g**2
                params[i] = params[i] - config.learning_rate * (adam_m[i] / bc1) / (
                    np.sqrt(adam_v[i] / bc2) + ADAM_EPS
                )

        train_loss = sq_err_total / elem_total
        val_loss = mse_loss(_eval_forward(*params, X_val), Y_val)
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise TrainingDivergedError(f"non-finite loss at epoch {epoch}")
        train_losses.append(train_loss)
        val_losses.append(val_loss)

        if epoch_hook is not None:
            epoch_hook(epoch, val_loss)

        if tracker.update(epoch, val_loss):
            best_params = [p.copy() for p in params]
        if tracker.should_stop:
            stopped_early = True
            break

    report = TrainReport(
        train_losses=tuple(train_losses),
        val_losses=tuple(val_losses),
        best_epoch=tracker.best_epoch,
        best_val_loss=tracker.best_loss,
        stopped_early=stopped_early,
        epochs_run=len(val_losses),
    )
    model = ProjectorModel(
        config=config,
        W1=best_params[0].astype(np.float32),
        b1=best_params[1].astype(np.float32),
        W2=best_params[2].astype(np.float32),
        b2=best_params[3].astype(np.float32),
        metadata=metadata if metadata is not None else _default_metadata(config.output_dim),
    )
    return model, report


def _weight_bytes(model: ProjectorModel) -> bytes:
    blocks = [model.W1, model.b1, model.W2, model.b2]
    return b"".join(np.ascontiguousarray(b, dtype="<f4").tobytes() for b in blocks)


def save_model(model: ProjectorModel, path: str | Path) -> None:
    payload = _weight_bytes(model)
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "config": asdict(model.config),
        "metadata": {
            "source_model": model.metadata.source_model,
            "layer": model.metadata.layer,
            "norm_space": model.metadata.norm_space,
            "feature_names": list(model.metadata.feature_names),
        },
        "checksum": "sha256:" + hashlib.sha256(payload).hexdigest(),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)


def load_model(path: str | Path) -> ProjectorModel:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: unreadable header: {exc}") from None
    version = header.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: format version {version}, this build reads {MODEL_FORMAT_VERSION}"
        )
    digest = "sha256:" + hashlib.sha256(payload).hexdigest()
    if digest != header["checksum"]:
        raise ChecksumError(f"{path}: weight checksum mismatch (truncated or corrupt file)")

    config = MlpConfig(**header["config"])
    meta_raw = header["metadata"]
    metadata = ModelMetadata(
        source_model=meta_raw["source_model"],
        layer=int(meta_raw["layer"]),
        norm_space=meta_raw["norm_space"],
        feature_names=tuple(meta_raw["feature_names"]),
    )
    shapes = [
        (config.hidden_size, config.input_dim),
        (config.hidden_size,),
        (config.output_dim, config.hidden_size),
        (config.output_dim,),
    ]
    expected = sum(int(np.prod(s)) for s in shapes) * 4
    if len(payload) != expected:
        raise ChecksumError(f"{path}: {len(payload)} weight bytes, expected {expected}")
    blocks = []
    offset = 0
    for shape in shapes:
        count = int(np.prod(shape))
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(shape)
        blocks.append(arr.copy())
        offset += count * 4
    return ProjectorModel(config, *blocks, metadata=metadata)
