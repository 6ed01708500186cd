"""Small hand-differentiated MLPs and synthetic tasks for desk-scale training.

Batches are row-major: ``X`` has shape ``(n, input_dim)``. Layer weights have
shape ``(d_out, d_in)``, so a layer computes ``X @ W.T + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, ShapeError

_ACTS = ("tanh", "relu", "identity")


@dataclass
class MlpModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[str]

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ShapeError("weights, biases and activations must have equal length")
        for i, (W, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            if act not in _ACTS:
                raise InvalidInput(f"unknown activation {act!r}")
            if b.shape != (W.shape[0],):
                raise ShapeError(f"layer {i}: bias shape {b.shape} vs weight {W.shape}")
            if i and W.shape[1] != self.weights[i - 1].shape[0]:
                raise ShapeError(f"layer {i} input dim does not chain")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def depth(self) -> int:
        return len(self.weights)

    def blocks(self) -> dict[str, np.ndarray]:
        out = {}
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            out[f"layer{i}.weight"] = W
            out[f"layer{i}.bias"] = b
        return out

    def set_blocks(self, blocks: dict[str, np.ndarray]) -> None:
        for i in range(self.depth):
            W = np.asarray(blocks[f"layer{i}.weight"], dtype=np.float64)
            b = np.asarray(blocks[f"layer{i}.bias"], dtype=np.float64)
            if W.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise ShapeError(f"layer {i} shape changed")
            self.weights[i], self.biases[i] = W, b

    def copy(self) -> MlpModel:
        return MlpModel([W.copy() for W in self.weights], [b.copy() for b in self.biases], list(self.activations))


def init_mlp(
    sizes: list[int], activation: str = "tanh", rng: np.random.Generator | int = 0, output_activation: str = "identity"
) -> MlpModel:
    """Gaussian init with std ``1/sqrt(fan_in)``, zero biases."""
    rng = np.random.default_rng(rng)
    weights, biases, acts = [], [], []
    for i, (d_in, d_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        weights.append(rng.standard_normal((d_out, d_in)) / np.sqrt(d_in))
        biases.append(np.zeros(d_out))
        acts.append(output_activation if i == len(sizes) - 2 else activation)
    return MlpModel(weights, biases, acts)


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    return z


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return 1.0 - a * a
    if name == "relu":
        return (z > 0).astype(z.dtype)
    return np.ones_like(z)


def forward(model: MlpModel, X) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray, np.ndarray]]]:
    """Predictions plus per-layer ``(input, preactivation, activation)`` cache."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ShapeError(f"batch shape {X.shape} incompatible with input_dim {model.input_dim}")
    cache = []
    h = X
    for W, b, act in zip(model.weights, model.biases, model.activations):
        z = h @ W.T + b
        a = _act(act, z)
        cache.append((h, z, a))
        h = a
    return h, cache


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_value(pred: np.ndarray, Y: np.ndarray, kind: str) -> float:
    if kind == "softmax_classification":
        z = pred - pred.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        return float(-np.mean(logp[np.arange(pred.shape[0]), Y.astype(int)]))
    return float(np.mean(np.sum((pred - Y) ** 2, axis=1)))


def loss_and_grad(model: MlpModel, X, Y, kind: str = "lowrank_teacher_regression") -> tuple[float, dict[str, np.ndarray]]:
    """Mean loss over the batch and exact gradients for every block.

    Regression uses squared error summed over outputs and averaged over samples;
    classification uses mean softmax cross-entropy with integer labels.
    """
    pred, cache = forward(model, X)
    n = pred.shape[0]
    Y = np.asarray(Y)
    if kind == "softmax_classification":
        if Y.shape != (n,):
            raise ShapeError("labels must be a vector of length n")
        loss = loss_value(pred, Y, kind)
        delta = _softmax(pred)
        delta[np.arange(n), Y.astype(int)] -= 1.0
        delta /= n
    else:
        if Y.shape != pred.shape:
            raise ShapeError(f"targets {Y.shape} vs predictions {pred.shape}")
        loss = loss_value(pred, Y, kind)
        delta = 2.0 * (pred - Y) / n
    grads = {}
    for i in reversed(range(model.depth)):
        h, z, a = cache[i]
        dz = delta * _act_grad(model.activations[i], z, a)
        grads[f"layer{i}.weight"] = dz.T @ h
        grads[f"layer{i}.bias"] = dz.sum(axis=0)
        delta = dz @ model.weights[i]
    return loss, grads


def finite_diff_grad(model: MlpModel, X, Y, kind: str = "lowrank_teacher_regression", h: float = 1e-5) -> dict[str, np.ndarray]:
    """Central differences, one coordinate at a time."""
    if not h > 0:
        raise InvalidInput("h must be positive")
    probe = model.copy()
    grads = {}
    for name, arr in probe.blocks().items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for j in range(flat.size):
            old = flat[j]
            flat[j] = old + h
            lp = loss_value(forward(probe, X)[0], np.asarray(Y), kind)
            flat[j] = old - h
            lm = loss_value(forward(probe, X)[0], np.asarray(Y), kind)
            flat[j] = old
            gflat[j] = (lp - lm) / (2 * h)
        grads[name] = g
    return grads


@dataclass
class TaskSpec:
    kind: str = "lowrank_teacher_regression"
    data_seed: int = 0
    train_size: int = 4096
    eval_size: int = 1024
    teacher_rank: int = 16
    num_classes: int = 10
    noise_std: float = 0.01

    def __post_init__(self):
        if self.kind not in ("lowrank_teacher_regression", "softmax_classification"):
            raise InvalidInput(f"unknown task kind {self.kind!r}")
        if self.train_size < 1 or self.eval_size < 1 or self.teacher_rank < 1:
            raise InvalidInput("sizes and teacher_rank must be positive")


@dataclass
class Dataset:
    X_train: np.ndarray
    Y_train: np.ndarray
    X_eval: np.ndarray
    Y_eval: np.ndarray
    teacher: np.ndarray = field(repr=False)


def make_dataset(task: TaskSpec, input_dim: int, output_dim: int) -> Dataset:
    """Synthetic data from a rank-``teacher_rank`` linear teacher ``W* = A B^T``.

    Regression targets are ``W* x + noise_std * eps``; classification labels are
    ``argmax(W* x)`` over ``output_dim`` classes.
    """
    r = task.teacher_rank
    if r > min(input_dim, output_dim):
        raise InvalidInput("teacher_rank exceeds min(input_dim, output_dim)")
    rng = np.random.default_rng(task.data_seed)
    A = rng.standard_normal((output_dim, r))
    B = rng.standard_normal((input_dim, r))
    teacher = A @ B.T / np.sqrt(input_dim * r)
    n = task.train_size + task.eval_size
    X = rng.standard_normal((n, input_dim))
    clean = X @ teacher.T
    if task.kind == "softmax_classification":
        Y = np.argmax(clean, axis=1)
    else:
        Y = clean + task.noise_std * rng.standard_normal(clean.shape)
    m = task.train_size
    return Dataset(X[:m], Y[:m], X[m:], Y[m:], teacher)
