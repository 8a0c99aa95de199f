"""Softmax room classifier trained with minibatch SGD and momentum.

The model is a single linear layer with ``R`` outputs (one per room) followed
by a softmax. Training keeps the epoch with the best validation accuracy.
"""

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

MAGIC = b"HLCM"
VERSION = 1
LOG_FLOOR = 1e-12


class ModelError(Exception):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    epochs: int = 30
    learning_rate: float = 1e-3
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")


@dataclass(frozen=True, eq=False)
class SoftmaxModel:
    weights: np.ndarray
    bias: np.ndarray
    rooms: tuple
    history: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights)
        b = np.asarray(self.bias)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise ModelError(f"weights {w.shape} and bias {b.shape} disagree")
        if w.shape[0] != len(self.rooms):
            raise ModelError(f"{w.shape[0]} outputs for {len(self.rooms)} rooms")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ModelError("model parameters must be finite")
        object.__setattr__(self, "rooms", tuple(self.rooms))

    @property
    def dim(self):
        return self.weights.shape[1]

    @property
    def n_rooms(self):
        return self.weights.shape[0]

    def logits(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.dim:
            raise ModelError(f"descriptor dim {X.shape[-1]} does not match model dim {self.dim}")
        return X @ self.weights.astype(np.float64).T + self.bias.astype(np.float64)


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - np.max(z, axis=-1, keepdims=True))
    return e / np.sum(e, axis=-1, keepdims=True)


def forward(model, d):
    """Class probabilities for one descriptor (or a batch of rows)."""
    return softmax(model.logits(d))


def predict_room(model, d):
    """``(room, probs)``; ties go to the lowest class index."""
    probs = forward(model, d)
    return model.rooms[int(np.argmax(probs))], probs


def one_hot(labels, n_classes):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.shape[0], n_classes), dtype=np.float64)
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def cross_entropy(probs, targets):
    """Mean cross-entropy of a ``B x R`` probability batch against one-hot targets."""
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if probs.shape != targets.shape or probs.ndim != 2:
        raise ValueError(f"shape mismatch: probs {probs.shape}, targets {targets.shape}")
    logs = np.log(np.maximum(probs, LOG_FLOOR))
    return float(-np.sum(targets * logs) / probs.shape[0])


def loss_and_grad(weights, bias, X, targets):
    """Loss and analytic gradients of cross-entropy after softmax.

    Uses d(loss)/d(logits) = (P - Y) / B.
    """
    X = np.asarray(X, dtype=np.float64)
    probs = softmax(X @ weights.T + bias)
    loss = cross_entropy(probs, targets)
    dz = (probs - targets) / X.shape[0]
    return loss, dz.T @ X, dz.sum(axis=0)


def init_params(dim, n_rooms, seed):
    """Uniform init in +-sqrt(6/(m+R)), zero bias."""
    rng = np.random.default_rng(seed)
    limit = math.sqrt(6.0 / (dim + n_rooms))
    return rng.uniform(-limit, limit, size=(n_rooms, dim)), np.zeros(n_rooms), rng


def accuracy(weights, bias, X, labels):
    if len(labels) == 0:
        return 0.0
    probs = softmax(np.asarray(X, dtype=np.float64) @ weights.T + bias)
    return float(np.mean(np.argmax(probs, axis=1) == np.asarray(labels)))


def train(train_X, train_labels, val_X, val_labels, rooms, cfg=TrainConfig()):
    """Fit the classifier; returns the best-validation checkpoint.

    Labels are class indices into ``rooms``. Each epoch draws a fresh
    permutation from the seeded generator, then runs momentum updates
    ``v <- mu*v - lr*grad; theta <- theta + v`` over minibatches. Ties in
    validation accuracy keep the earlier epoch.
    """
    train_X = np.asarray(train_X, dtype=np.float64)
    val_X = np.asarray(val_X, dtype=np.float64)
    train_labels = np.asarray(train_labels, dtype=np.int64)
    val_labels = np.asarray(val_labels, dtype=np.int64)
    n_rooms = len(rooms)
    if n_rooms < 2:
        raise ModelError("training needs at least two rooms")
    if train_X.ndim != 2 or len(train_X) == 0:
        raise ModelError("empty training set")
    if val_X.ndim != 2 or len(val_X) == 0:
        raise ModelError("empty validation set")
    if train_X.shape[1] != val_X.shape[1]:
        raise ModelError(f"train dim {train_X.shape[1]} != validation dim {val_X.shape[1]}")
    if len(train_labels) != len(train_X) or len(val_labels) != len(val_X):
        raise ModelError("labels and descriptors are not aligned")
    for labels in (train_labels, val_labels):
        if labels.min() < 0 or labels.max() >= n_rooms:
            raise ModelError("label outside the room list")
    missing = sorted(set(range(n_rooms)) - set(train_labels.tolist()))
    if missing:
        raise ModelError(f"no training samples for rooms {[rooms[i] for i in missing]}")

    w, b, rng = init_params(train_X.shape[1], n_rooms, cfg.seed)
    vw, vb = np.zeros_like(w), np.zeros_like(b)
    targets = one_hot(train_labels, n_rooms)

    best = None
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_X))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, gw, gb = loss_and_grad(w, b, train_X[idx], targets[idx])
            if not math.isfinite(loss):
                raise ModelError(f"non-finite loss at epoch {epoch}")
            total += loss * len(idx)
            vw = cfg.momentum * vw - cfg.learning_rate * gw
            vb = cfg.momentum * vb - cfg.learning_rate * gb
            w = w + vw
            b = b + vb
        val_acc = accuracy(w, b, val_X, val_labels)
        history.append({"epoch": epoch, "train_loss": total / len(train_X), "val_accuracy": val_acc})
        log.debug("epoch %d loss %.5f val_acc %.4f", epoch, total / len(train_X), val_acc)
        if best is None or val_acc > best[0]:
            best = (val_acc, epoch, w.astype(np.float32), b.astype(np.float32))

    val_acc, epoch, bw, bb = best
    log.info("kept epoch %d with validation accuracy %.4f", epoch, val_acc)
    return SoftmaxModel(bw, bb, tuple(rooms), history=tuple(history))


def train_on_sets(train_ds, train_manifest, val_ds, val_manifest, cfg=TrainConfig()):
    """Train from descriptor sets aligned to their manifests."""
    rooms = train_manifest.rooms
    index = {room: i for i, room in enumerate(rooms)}
    stray = sorted({r.room for r in val_manifest.records} - set(index))
    if stray:
        raise ModelError(f"validation rooms {stray} do not occur in training")
    train_ds = train_ds.align(train_manifest)
    val_ds = val_ds.align(val_manifest)
    return train(
        train_ds.values,
        [index[r.room] for r in train_manifest.records],
        val_ds.values,
        [index[r.room] for r in val_manifest.records],
        rooms,
        cfg,
    )


def save(model, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", MAGIC, VERSION, model.n_rooms, model.dim))
        for room in model.rooms:
            raw = room.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        fh.write(np.asarray(model.weights, dtype="<f4").tobytes(order="C"))
        fh.write(np.asarray(model.bias, dtype="<f4").tobytes())


def load(path):
    data = Path(path).read_bytes()
    try:
        magic, version, n_rooms, dim = struct.unpack_from("<4sIII", data)
    except struct.error as exc:
        raise ModelError(f"{path}: truncated header") from exc
    if magic != MAGIC:
        raise ModelError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ModelError(f"{path}: unsupported version {version}")
    offset = 16
    rooms = []
    for _ in range(n_rooms):
        if offset + 4 > len(data):
            raise ModelError(f"{path}: truncated room table")
        (n,) = struct.unpack_from("<I", data, offset)
        offset += 4
        rooms.append(data[offset:offset + n].decode("utf-8"))
        offset += n
    need = 4 * (n_rooms * dim + n_rooms)
    if len(data) - offset != need:
        raise ModelError(f"{path}: expected {need} parameter bytes, found {len(data) - offset}")
    params = np.frombuffer(data, dtype="<f4", offset=offset).astype(np.float32)
    weights = params[:n_rooms * dim].reshape(n_rooms, dim)
    bias = params[n_rooms * dim:]
    return SoftmaxModel(weights, bias, tuple(rooms))
