"""Multilayer-perceptron classifier in plain numpy (float64).

ReLU hidden layers, softmax output, mean cross-entropy loss, SGD with
momentum. Everything is deterministic for a given seed.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

HIDDEN_DIMS = (128, 50, 8)
MODEL_SCHEMA_VERSION = 1


class ModelFormatError(ValueError):
    pass


@dataclass
class MlpModel:
    layer_dims: list[int]
    weights: list[np.ndarray]  # weights[l] has shape (layer_dims[l], layer_dims[l + 1])
    biases: list[np.ndarray]
    trained: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ModelFormatError("layer count does not match layer_dims")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.layer_dims[l], self.layer_dims[l + 1]) or b.shape != (self.layer_dims[l + 1],):
                raise ModelFormatError(
                    f"layer {l}: weight {w.shape} / bias {b.shape} inconsistent with dims {self.layer_dims}"
                )

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]

    def predict_proba(self, x) -> np.ndarray:
        return forward(self, x)

    def predict(self, x) -> np.ndarray | int:
        p = forward(self, x)
        return np.argmax(p, axis=-1) if p.ndim > 1 else int(np.argmax(p))

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 300
    batch_size: int = 32
    seed: int = 0
    init_scale: float = 1.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    best_epoch: int = -1
    # the returned weights are the best-validation snapshot, not the last epoch
    selection: str = "best_val_accuracy"

    @property
    def best_val_accuracy(self) -> float:
        return self.val_accuracy[self.best_epoch]

    def to_dict(self) -> dict:
        return asdict(self)


def init_model(in_dim: int, out_dim: int, seed: int = 0, hidden=HIDDEN_DIMS, init_scale: float = 1.0) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    if in_dim < 1 or out_dim < 1:
        raise ValueError("dimensions must be >= 1")
    dims = [in_dim, *hidden, out_dim]
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims, dims[1:]):
        s = init_scale * math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-s, s, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(dims, weights, biases)


def zero_model(in_dim: int, out_dim: int, hidden=HIDDEN_DIMS) -> MlpModel:
    dims = [in_dim, *hidden, out_dim]
    return MlpModel(
        dims,
        [np.zeros((a, b)) for a, b in zip(dims, dims[1:])],
        [np.zeros(b) for b in dims[1:]],
    )


def _check_input(model: MlpModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.in_dim:
        raise ValueError(f"input has {x.shape[-1]} features, model expects {model.in_dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains NaN or Inf")
    return x


def _forward_cached(model: MlpModel, X: np.ndarray):
    activations = [X]
    h = X
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        h = z if l == last else np.maximum(z, 0.0)
        activations.append(h)
    return activations  # last entry holds the logits


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward(model: MlpModel, x) -> np.ndarray:
    """Class probabilities for one input vector or a batch of rows."""
    x = _check_input(model, x)
    return softmax(_forward_cached(model, np.atleast_2d(x))[-1]).reshape(*x.shape[:-1], model.n_classes)


def loss_and_grad(model: MlpModel, X, y) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Mean cross-entropy over the batch and its gradient for each (weight, bias) pair."""
    X = np.atleast_2d(_check_input(model, X))
    y = np.asarray(y, dtype=int)
    n = X.shape[0]
    if n == 0 or y.shape != (n,):
        raise ValueError("batch must be non-empty with one label per row")
    if y.min() < 0 or y.max() >= model.n_classes:
        raise ValueError("label out of range")
    acts = _forward_cached(model, X)
    logp = log_softmax(acts[-1])
    loss = float(-logp[np.arange(n), y].mean())

    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = []
    for l in range(len(model.weights) - 1, -1, -1):
        grads.append((acts[l].T @ delta, delta.sum(axis=0)))
        if l > 0:
            delta = (delta @ model.weights[l].T) * (acts[l] > 0.0)
    grads.reverse()
    return loss, grads


def accuracy(model: MlpModel, X, y) -> float:
    pred = np.argmax(forward(model, X), axis=-1)
    return float(np.mean(pred == np.asarray(y)))


def sgdm_step(model: MlpModel, grads, velocity, learning_rate: float, momentum: float) -> None:
    """v <- mu v - lr grad; w <- w + v, in place."""
    for l, (gw, gb) in enumerate(grads):
        vw, vb = velocity[l]
        vw *= momentum
        vw -= learning_rate * gw
        vb *= momentum
        vb -= learning_rate * gb
        model.weights[l] += vw
        model.biases[l] += vb


def train(model: MlpModel, train_set, val_set, cfg: TrainConfig) -> tuple[MlpModel, TrainReport]:
    """Minibatch SGDM; returns a copy of the weights at the best validation epoch."""
    X, y = (np.asarray(a) for a in train_set)
    Xv, yv = (np.asarray(a) for a in val_set)
    if X.shape[1] != model.in_dim or Xv.shape[1] != model.in_dim:
        raise ValueError(f"feature dimension mismatch: model expects {model.in_dim}")
    model = copy.deepcopy(model)
    rng = np.random.default_rng(cfg.seed)
    velocity = [(np.zeros_like(w), np.zeros_like(b)) for w, b in zip(model.weights, model.biases)]
    report = TrainReport()
    best = None
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(X))
        total = 0.0
        for start in range(0, len(X), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = loss_and_grad(model, X[idx], y[idx])
            total += loss * len(idx)
            sgdm_step(model, grads, velocity, cfg.learning_rate, cfg.momentum)
        if not math.isfinite(total) or not all(np.all(np.isfinite(p)) for p in model.params()):
            raise FloatingPointError(f"training diverged at epoch {epoch}")
        report.train_loss.append(total / len(X))
        report.train_accuracy.append(accuracy(model, X, y))
        report.val_accuracy.append(accuracy(model, Xv, yv))
        if best is None or report.val_accuracy[-1] > report.val_accuracy[report.best_epoch]:
            report.best_epoch = epoch
            best = copy.deepcopy(model)
    best.trained = True
    return best, report


# ---------------------------------------------------------------------------
# persistence

def model_to_dict(model: MlpModel) -> dict:
    return {
        "schema_version": MODEL_SCHEMA_VERSION,
        "layer_dims": list(model.layer_dims),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "trained": model.trained,
        "metadata": model.metadata,
    }


def model_from_dict(data: dict) -> MlpModel:
    if data.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ModelFormatError(f"unsupported model schema version {data.get('schema_version')!r}")
    try:
        weights = [np.array(w, dtype=float) for w in data["weights"]]
        biases = [np.array(b, dtype=float) for b in data["biases"]]
        return MlpModel(
            [int(d) for d in data["layer_dims"]],
            weights,
            biases,
            bool(data.get("trained", False)),
            dict(data.get("metadata", {})),
        )
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from exc


def save_model(model: MlpModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), sort_keys=True) + "\n")


def load_model(path: str | Path) -> MlpModel:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON") from exc
    return model_from_dict(data)


def weights_digest(model: MlpModel) -> str:
    h = hashlib.sha256()
    for p in model.params():
        h.update(np.ascontiguousarray(p).tobytes())
    return h.hexdigest()
