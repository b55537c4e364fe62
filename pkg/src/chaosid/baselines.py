"""Linear-regression and fully-connected-network baselines.

The linear model solves the normal equations directly, falling back to a
trace-scaled ridge term only when the design is ill-conditioned. The MLP
is a small from-scratch network (rectified-linear hidden layers, identity
output) trained with mini-batch adaptive-moment descent; gradients are
exact reverse-mode derivatives of the half-scaled mean squared error so
they can be checked against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import (
    InvalidStateError,
    SerializationError,
    SingularDesignError,
    TrainingDivergedError,
)

__all__ = [
    "LinearModel",
    "MLPModel",
    "TrainConfig",
    "fit_linear",
    "predict_linear",
    "init_mlp",
    "mlp_forward",
    "mlp_gradients",
    "train_mlp",
    "save_mlp",
    "load_mlp",
]

_HIDDEN_WIDTHS = (64, 32, 16, 8)
_RIDGE_SCALE = 1e-8
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class LinearModel:
    """Affine predictor ``X w + bias``."""

    weights: np.ndarray
    bias: float


@dataclass(frozen=True)
class MLPModel:
    """Fully connected network with fixed layer widths.

    ``layer_sizes`` is the full chain [d, 64, 32, 16, 8, 1]; weights[i]
    maps layer i to layer i+1, with matching per-layer biases. Hidden
    activations are rectified linear, the output is identity.
    """

    layer_sizes: tuple
    weights: tuple = field(repr=False)
    biases: tuple = field(repr=False)


@dataclass(frozen=True)
class TrainConfig:
    """Training settings for the network baseline."""

    epochs: int = 500
    batch_size: int = 32
    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidStateError("epochs and batch_size must be positive")
        if not self.step_size > 0:
            raise InvalidStateError("step_size must be > 0")


def fit_linear(X, y) -> LinearModel:
    """Ordinary least squares via the normal equations.

    A ridge term ``1e-8 * trace(G) / dim`` is added to the Gram diagonal
    only when the plain system is ill-conditioned (cond > 1e12, fewer
    rows than columns, or a singular factorization); exact linear data is
    therefore recovered to machine precision.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != len(y) or len(y) == 0:
        raise InvalidStateError("X must be 2-D with one target per row")
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    G = A.T @ A
    rhs = A.T @ y
    d = G.shape[0]
    needs_ridge = X.shape[0] < d or np.linalg.cond(G) > _COND_LIMIT
    if not needs_ridge:
        try:
            sol = np.linalg.solve(G, rhs)
        except np.linalg.LinAlgError:
            needs_ridge = True
    if needs_ridge:
        lam = _RIDGE_SCALE * np.trace(G) / d
        try:
            sol = np.linalg.solve(G + lam * np.eye(d), rhs)
        except np.linalg.LinAlgError:
            raise SingularDesignError(
                "normal equations singular even after ridge fallback"
            ) from None
    if not np.all(np.isfinite(sol)):
        raise SingularDesignError("normal-equation solution is non-finite")
    return LinearModel(weights=sol[:-1], bias=float(sol[-1]))


def predict_linear(model: LinearModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(model.weights):
        raise InvalidStateError(
            f"expected {len(model.weights)} feature columns"
        )
    return X @ model.weights + model.bias


def init_mlp(n_features: int, rng: np.random.Generator) -> MLPModel:
    """He-scaled random initialization for the fixed architecture."""
    sizes = (n_features, *_HIDDEN_WIDTHS, 1)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return MLPModel(layer_sizes=sizes, weights=tuple(weights), biases=tuple(biases))


def _forward_cached(model: MLPModel, X):
    """Forward pass keeping pre-activations for backpropagation."""
    acts = [X]
    pre = []
    a = X
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ W + b
        pre.append(z)
        a = z if i == last else np.maximum(z, 0.0)
        acts.append(a)
    return acts, pre


def mlp_forward(model: MLPModel, X) -> np.ndarray:
    """Deterministic feed-forward predictions, one scalar per row."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.layer_sizes[0]:
        raise InvalidStateError(
            f"expected {model.layer_sizes[0]} feature columns"
        )
    acts, _ = _forward_cached(model, X)
    return acts[-1].ravel()


def mlp_gradients(model: MLPModel, X, y):
    """Exact gradients of the half-scaled MSE ``sum (pred - y)^2 / (2 n)``.

    Returns (weight_grads, bias_grads, loss) with shapes mirroring the
    model parameters.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[1] != model.layer_sizes[0] or X.shape[0] != len(y):
        raise InvalidStateError("X/y shapes do not match the model")
    n = len(y)
    acts, pre = _forward_cached(model, X)
    resid = acts[-1].ravel() - y
    loss = float(resid @ resid) / (2.0 * n)
    delta = (resid / n)[:, None]
    w_grads = [None] * len(model.weights)
    b_grads = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        w_grads[i] = acts[i].T @ delta
        b_grads[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (pre[i - 1] > 0.0)
    return tuple(w_grads), tuple(b_grads), loss


def train_mlp(X, y, config: TrainConfig | None = None):
    """Train the network with mini-batch adaptive-moment descent.

    Initialization and per-epoch shuffling come from one generator seeded
    by ``config.seed``, so training is deterministic per seed. Returns
    ``(model, loss_curve)`` where the curve holds the epoch-end
    full-dataset MSE.

    Raises
    ------
    TrainingDivergedError
        If the loss becomes non-finite; carries the epoch index.
    """
    config = config or TrainConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != len(y) or len(y) == 0:
        raise InvalidStateError("X must be 2-D with one target per row")
    rng = np.random.default_rng(config.seed)
    model = init_mlp(X.shape[1], rng)
    weights = [W.copy() for W in model.weights]
    biases = [b.copy() for b in model.biases]
    m_w = [np.zeros_like(W) for W in weights]
    v_w = [np.zeros_like(W) for W in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]
    n = len(y)
    t = 0
    loss_curve = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            current = MLPModel(
                layer_sizes=model.layer_sizes,
                weights=tuple(weights),
                biases=tuple(biases),
            )
            w_g, b_g, loss = mlp_gradients(current, X[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"training loss became non-finite at epoch {epoch}",
                    epoch=epoch,
                )
            t += 1
            bc1 = 1.0 - config.beta1**t
            bc2 = 1.0 - config.beta2**t
            for i in range(len(weights)):
                m_w[i] = config.beta1 * m_w[i] + (1 - config.beta1) * w_g[i]
                v_w[i] = config.beta2 * v_w[i] + (1 - config.beta2) * w_g[i] ** 2
                weights[i] -= config.step_size * (m_w[i] / bc1) / (
                    np.sqrt(v_w[i] / bc2) + config.eps
                )
                m_b[i] = config.beta1 * m_b[i] + (1 - config.beta1) * b_g[i]
                v_b[i] = config.beta2 * v_b[i] + (1 - config.beta2) * b_g[i] ** 2
                biases[i] -= config.step_size * (m_b[i] / bc1) / (
                    np.sqrt(v_b[i] / bc2) + config.eps
                )
        final = MLPModel(
            layer_sizes=model.layer_sizes,
            weights=tuple(weights),
            biases=tuple(biases),
        )
        preds = mlp_forward(final, X)
        epoch_mse = float(np.mean((preds - y) ** 2))
        if not np.isfinite(epoch_mse):
            raise TrainingDivergedError(
                f"training loss became non-finite at epoch {epoch}", epoch=epoch
            )
        loss_curve.append(epoch_mse)
    return final, loss_curve


def save_mlp(model: MLPModel, path) -> None:
    """Serialize layer sizes and flattened parameters as JSON."""
    record = {
        "kind": "chaosid-mlp",
        "layer_sizes": list(model.layer_sizes),
        "weights": [W.ravel().tolist() for W in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }
    with Path(path).open("w") as fh:
        json.dump(record, fh)
        fh.write("\n")


def load_mlp(path) -> MLPModel:
    try:
        record = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SerializationError(f"{path}: {exc}") from None
    if record.get("kind") != "chaosid-mlp":
        raise SerializationError(f"{path}: not an MLP model record")
    sizes = tuple(record["layer_sizes"])
    weights = []
    biases = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        flat = np.array(record["weights"][i], dtype=float)
        if flat.size != fan_in * fan_out:
            raise SerializationError(f"{path}: layer {i} weight size mismatch")
        weights.append(flat.reshape(fan_in, fan_out))
        biases.append(np.array(record["biases"][i], dtype=float))
    return MLPModel(layer_sizes=sizes, weights=tuple(weights), biases=tuple(biases))
