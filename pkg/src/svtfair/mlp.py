"""Small feed-forward network trained by minibatch SGD with backprop.

Architecture: input -> 300 -> 100 -> 1, rectifier on the hidden layers and
a logistic output, so raw outputs live in (0, 1).  Targets in [-1, 1] are
rescaled to [0, 1] for training and predictions are mapped back through
``2 x - 1``.  For matrix completion the input for cell (i, j) is the
concatenation of row i and column j (missing entries already zero), giving
input dimension n + m.

Training is plain SGD on squared loss, deterministic for a fixed seed and
thread count.  ``gradient_check`` validates the backprop gradients against
central finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import ValidationError

__all__ = [
    "TrainConfig",
    "MlpModel",
    "init_model",
    "mlp_train",
    "mlp_predict_row",
    "mlp_predict_matrix",
    "gradient_check",
    "split_observed_cells",
    "dataset_loss",
    "save_model",
    "load_model",
]

HIDDEN_SIZES = (300, 100)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    steps: int = 2000
    train_fraction: float = 0.8
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.steps < 0:
            raise ValidationError("batch_size must be >= 1 and steps >= 0")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError("train_fraction must lie strictly between 0 and 1")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")

    def to_json_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "steps": self.steps,
            "train_fraction": self.train_fraction,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
        }


@dataclass
class MlpModel:
    """Layer sizes plus per-layer weight matrices (out x in) and bias vectors."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    seed: int | None = None
    train_config: dict | None = None
    meta: dict = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    def parameter_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


def init_model(
    input_dim: int, seed: int, hidden: tuple[int, ...] = HIDDEN_SIZES
) -> MlpModel:
    """Seeded Glorot-uniform weights (limit sqrt(6 / (fan_in + fan_out))),
    zero biases."""
    if input_dim < 1:
        raise ValidationError("input_dim must be positive")
    model = _init_with_rng(input_dim, np.random.default_rng(seed), hidden)
    model.seed = seed
    return model


def _forward(model: MlpModel, x: np.ndarray):
    """Returns (per-layer pre-activations, activations, output in (0,1))."""
    pre, act = [], [x]
    a = x
    last = len(model.weights) - 1
    for idx, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w.T + b
        pre.append(z)
        a = expit(z) if idx == last else np.maximum(z, 0.0)
        act.append(a)
    return pre, act, act[-1][:, 0]


def predict_unit(model: MlpModel, x) -> np.ndarray:
    """Raw network outputs in (0, 1) for a batch of inputs."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.input_dim:
        raise ValidationError(
            f"input dimension {x.shape[1]} does not match model ({model.input_dim})"
        )
    return _forward(model, x)[2]


def loss_and_gradients(model: MlpModel, x: np.ndarray, y_unit: np.ndarray):
    """Mean squared loss on (0,1)-scale targets and its parameter gradients."""
    batch = x.shape[0]
    pre, act, out = _forward(model, x)
    err = out - y_unit
    loss = float((err**2).mean())
    grad_w = [None] * len(model.weights)
    grad_b = [None] * len(model.biases)
    # output layer: d/dz of logistic composed with squared loss
    delta = (2.0 * err * out * (1.0 - out) / batch)[:, None]
    for layer in range(len(model.weights) - 1, -1, -1):
        grad_w[layer] = delta.T @ act[layer]
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer]) * (pre[layer - 1] > 0)
    return loss, grad_w, grad_b


def split_observed_cells(mask, train_fraction: float, seed: int):
    """Deterministic (train_cells, val_cells) split of the observed cells."""
    cells = np.argwhere(np.asarray(mask, dtype=bool))
    if cells.size == 0:
        raise ValidationError("no observed cells to split")
    perm = np.random.default_rng(seed).permutation(len(cells))
    n_train = int(train_fraction * len(cells))
    return cells[perm[:n_train]], cells[perm[n_train:]]


def _inputs_for_cells(b: np.ndarray, cells: np.ndarray) -> np.ndarray:
    rows, cols = cells[:, 0], cells[:, 1]
    return np.concatenate([b[rows], b[:, cols].T], axis=1)


def mlp_train(
    b,
    mask,
    cfg: TrainConfig,
    cells: tuple[np.ndarray, np.ndarray] | None = None,
) -> MlpModel:
    """Train on the observed cells of ``b`` (targets rescaled to [0, 1]).

    ``cells`` optionally supplies a precomputed (train, validation) split so
    that several pipelines can share the exact same split; by default it is
    derived from ``cfg.seed``.  The training split must cover at least one
    batch.
    """
    b = np.asarray(b, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if b.shape != mask.shape:
        raise ValidationError("matrix and mask shapes differ")
    if cells is None:
        cells = split_observed_cells(mask, cfg.train_fraction, cfg.seed)
    train_cells, _ = cells
    if len(train_cells) < cfg.batch_size:
        raise ValidationError(
            f"insufficient observations: train split has {len(train_cells)} cells, "
            f"batch size is {cfg.batch_size}"
        )

    m, n = b.shape
    rng = np.random.default_rng(cfg.seed)
    model = _init_with_rng(n + m, rng)
    model.seed = cfg.seed
    model.train_config = cfg.to_json_dict()

    lr = cfg.learning_rate
    order = rng.permutation(len(train_cells))
    pos = 0
    for _ in range(cfg.steps):
        if pos + cfg.batch_size > len(order):
            order = rng.permutation(len(train_cells))
            pos = 0
        batch = train_cells[order[pos : pos + cfg.batch_size]]
        pos += cfg.batch_size
        x = _inputs_for_cells(b, batch)
        y_unit = (b[batch[:, 0], batch[:, 1]] + 1.0) / 2.0
        _, grad_w, grad_b = loss_and_gradients(model, x, y_unit)
        for layer in range(len(model.weights)):
            model.weights[layer] -= lr * grad_w[layer]
            model.biases[layer] -= lr * grad_b[layer]
    return model


def _init_with_rng(
    input_dim: int, rng: np.random.Generator, hidden: tuple[int, ...] = HIDDEN_SIZES
) -> MlpModel:
    sizes = (input_dim, *hidden, 1)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(layer_sizes=sizes, weights=weights, biases=biases)


def dataset_loss(model: MlpModel, b, cells) -> float:
    """Mean squared loss on the given cells, targets on the (0,1) scale."""
    b = np.asarray(b, dtype=np.float64)
    cells = np.asarray(cells)
    x = _inputs_for_cells(b, cells)
    y_unit = (b[cells[:, 0], cells[:, 1]] + 1.0) / 2.0
    out = predict_unit(model, x)
    return float(((out - y_unit) ** 2).mean())


def mlp_predict_row(model: MlpModel, b, i: int) -> np.ndarray:
    """Predicted row i: evaluate at (row i, column j) for every j and map
    the logistic outputs to (-1, 1)."""
    b = np.asarray(b, dtype=np.float64)
    m, n = b.shape
    if n + m != model.input_dim:
        raise ValidationError(
            f"matrix shape {b.shape} incompatible with model input {model.input_dim}"
        )
    if not 0 <= i < m:
        raise IndexError(f"row index {i} out of range")
    x = np.concatenate([np.tile(b[i], (n, 1)), b.T], axis=1)
    return 2.0 * predict_unit(model, x) - 1.0


def mlp_predict_matrix(model: MlpModel, b) -> np.ndarray:
    """All predicted rows stacked into an m x n matrix."""
    b = np.asarray(b, dtype=np.float64)
    return np.vstack([mlp_predict_row(model, b, i) for i in range(b.shape[0])])


def gradient_check(
    model: MlpModel, sample_input, sample_target: float, eps: float = 1e-5
) -> float:
    """Max relative error between backprop and central finite differences.

    Checks every parameter on the squared loss of a single sample.  The
    relative error uses ``|a - n| / max(|a| + |n|, 1e-8)``.
    """
    if not 1e-7 <= eps <= 1e-4:
        raise ValidationError("eps must lie in [1e-7, 1e-4]")
    x = np.asarray(sample_input, dtype=np.float64)[None, :]
    if x.shape[1] != model.input_dim:
        raise ValidationError("sample_input dimension does not match the model")
    y = np.array([(float(sample_target) + 1.0) / 2.0])

    _, grad_w, grad_b = loss_and_gradients(model, x, y)
    worst = 0.0
    for params, grads in ((model.weights, grad_w), (model.biases, grad_b)):
        for arr, grad in zip(params, grads):
            flat = arr.ravel()
            gflat = grad.ravel()
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + eps
                up = loss_and_gradients(model, x, y)[0]
                flat[idx] = orig - eps
                down = loss_and_gradients(model, x, y)[0]
                flat[idx] = orig
                numeric = (up - down) / (2.0 * eps)
                rel = abs(gflat[idx] - numeric) / max(abs(gflat[idx]) + abs(numeric), 1e-8)
                worst = max(worst, rel)
    return worst


def save_model(path, model: MlpModel) -> None:
    """Checkpoint: one JSON header line, then raw little-endian float64
    parameters, per layer weights (row-major) then biases."""
    header = {
        "layer_sizes": list(model.layer_sizes),
        "seed": model.seed,
        "train_config": model.train_config,
        "dtype": "<f8",
        "param_count": model.parameter_count(),
    }
    blobs = []
    for w, b in zip(model.weights, model.biases):
        blobs.append(w.astype("<f8").tobytes())
        blobs.append(b.astype("<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(b"".join(blobs))


def load_model(path) -> MlpModel:
    raw = Path(path).read_bytes()
    newline = raw.index(b"\n")
    header = json.loads(raw[:newline].decode("utf-8"))
    sizes = tuple(header["layer_sizes"])
    params = np.frombuffer(raw[newline + 1 :], dtype=header["dtype"])
    if params.size != header["param_count"]:
        raise ValidationError(
            f"{path}: expected {header['param_count']} parameters, found {params.size}"
        )
    weights, biases, offset = [], [], 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(
            params[offset : offset + fan_in * fan_out].reshape(fan_out, fan_in).copy()
        )
        offset += fan_in * fan_out
        biases.append(params[offset : offset + fan_out].copy())
        offset += fan_out
    return MlpModel(
        layer_sizes=sizes,
        weights=weights,
        biases=biases,
        seed=header.get("seed"),
        train_config=header.get("train_config"),
    )
