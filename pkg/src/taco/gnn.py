"""Two-layer GCN classifier with hand-written gradients (float64, no bias, no dropout)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .graph import SparseGraph, normalized_adjacency


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 200
    lr: float = 0.5
    weight_decay: float = 5e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.lr <= 0:
            raise ValueError("learning rate must be > 0")
        if self.weight_decay < 0:
            raise ValueError("weight decay must be >= 0")


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class GcnModel:
    w1: np.ndarray  # (d_X, d_h)
    w2: np.ndarray  # (d_h, c)

    def __post_init__(self) -> None:
        self.w1 = np.asarray(self.w1, dtype=np.float64)
        self.w2 = np.asarray(self.w2, dtype=np.float64)
        if self.w1.ndim != 2 or self.w2.ndim != 2 or self.w1.shape[1] != self.w2.shape[0]:
            raise ValueError(f"incompatible weight shapes {self.w1.shape} and {self.w2.shape}")
        if self.hidden <= 0:
            raise ValueError("hidden size must be positive")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")

    @classmethod
    def init(cls, in_dim: int, num_classes: int, hidden: int = 48, seed: int = 0) -> "GcnModel":
        rng = np.random.default_rng(seed)
        return cls(_glorot(rng, in_dim, hidden), _glorot(rng, hidden, num_classes))

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def num_classes(self) -> int:
        return self.w2.shape[1]

    def copy(self) -> "GcnModel":
        return GcnModel(self.w1.copy(), self.w2.copy())

    def save(self, path) -> None:
        payload = {
            "w1": {"shape": list(self.w1.shape), "data": self.w1.ravel().tolist()},
            "w2": {"shape": list(self.w2.shape), "data": self.w2.ravel().tolist()},
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "GcnModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        w1 = np.asarray(payload["w1"]["data"], dtype=np.float64).reshape(payload["w1"]["shape"])
        w2 = np.asarray(payload["w2"]["data"], dtype=np.float64).reshape(payload["w2"]["shape"])
        return cls(w1, w2)


def _operator(model: GcnModel, g: SparseGraph) -> sp.csr_matrix:
    if g.num_features != model.in_dim:
        raise ValueError(f"graph has {g.num_features} features, model expects {model.in_dim}")
    return normalized_adjacency(g)


def forward(model: GcnModel, g: SparseGraph) -> tuple[np.ndarray, np.ndarray]:
    """Return the layer-1 pre-activation embeddings and the output logits."""
    a_hat = _operator(model, g)
    h = a_hat @ (g.features @ model.w1)
    logits = a_hat @ (np.maximum(h, 0.0) @ model.w2)
    return h, logits


def _as_index(mask, n: int) -> np.ndarray:
    idx = np.asarray(mask)
    if idx.dtype == bool:
        if idx.shape != (n,):
            raise ValueError("boolean mask length must equal node count")
        idx = np.flatnonzero(idx)
    return idx.astype(np.int64)


def loss_and_grads(
    model: GcnModel,
    g: SparseGraph,
    train_mask,
    weight_decay: float = 0.0,
    a_hat: sp.csr_matrix | None = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy over ``train_mask`` plus L2 penalty, with gradients for W1 and W2."""
    if a_hat is None:
        a_hat = _operator(model, g)
    idx = _as_index(train_mask, g.n)
    if len(idx) == 0:
        raise TrainingError("empty training mask")
    y = g.labels[idx]
    if (y < 0).any():
        raise TrainingError("training mask contains unlabeled nodes")
    if y.max() >= model.num_classes:
        raise TrainingError(f"label {y.max()} out of range for {model.num_classes} classes")

    ax = a_hat @ g.features
    h = ax @ model.w1
    z = np.maximum(h, 0.0)
    az = a_hat @ z
    logits = az[idx] @ model.w2

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_norm[:, None]
    m = len(idx)
    loss = -log_probs[np.arange(m), y].mean()
    loss += 0.5 * weight_decay * (np.sum(model.w1**2) + np.sum(model.w2**2))

    d_logits = np.exp(log_probs)
    d_logits[np.arange(m), y] -= 1.0
    d_logits /= m
    grad_w2 = az[idx].T @ d_logits + weight_decay * model.w2
    d_az = np.zeros((g.n, model.hidden))
    d_az[idx] = d_logits @ model.w2.T
    # the propagation operator is symmetric, so its transpose is itself
    d_h = (a_hat @ d_az) * (h > 0)
    grad_w1 = ax.T @ d_h + weight_decay * model.w1
    return float(loss), grad_w1, grad_w2


def train(model: GcnModel, g: SparseGraph, train_mask, cfg: TrainConfig) -> list[float]:
    """Full-batch gradient descent in place; returns the loss before each update."""
    if cfg.epochs == 0:
        return []
    a_hat = _operator(model, g)
    trace = []
    for _ in range(cfg.epochs):
        loss, g1, g2 = loss_and_grads(model, g, train_mask, cfg.weight_decay, a_hat)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss {loss}")
        model.w1 -= cfg.lr * g1
        model.w2 -= cfg.lr * g2
        if not (np.isfinite(model.w1).all() and np.isfinite(model.w2).all()):
            raise TrainingError("parameters became non-finite")
        trace.append(loss)
    return trace


def predict(model: GcnModel, g: SparseGraph, eval_mask=None) -> np.ndarray:
    """Argmax class per node (first maximum on ties)."""
    _, logits = forward(model, g)
    if eval_mask is not None:
        logits = logits[_as_index(eval_mask, g.n)]
    return np.argmax(logits, axis=1)
