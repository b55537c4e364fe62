"""Exact Gaussian-process regression with a squared-exponential kernel.

The functional core works on plain arrays and small frozen dataclasses:
fit produces a :class:`GPModel` holding the Cholesky factor of
``Sigma + sigma_n^2 I`` and the solve vector alpha, after which posterior
means are O(n) per test point and variances O(n^2). Hyperparameters are
chosen by maximizing the log marginal likelihood over a log-space grid
refined with Nelder-Mead. A thin scikit-learn style estimator wrapper
lives in :mod:`chaosid.estimators`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist, pdist, squareform

from .exceptions import (
    InvalidStateError,
    NotPositiveDefiniteError,
    OptimizationFailedError,
    SerializationError,
)

__all__ = [
    "SEHyperparams",
    "GPModel",
    "Prediction",
    "SearchBudget",
    "se_kernel",
    "kernel_matrix",
    "fit",
    "predict",
    "log_marginal_likelihood",
    "optimize_hyperparameters",
    "sample_posterior",
    "save_model",
    "load_model",
]

# relative jitter added to the noise term before factorization; escalated
# by _JITTER_GROWTH up to _JITTER_RETRIES times on failure
_JITTER_BASE = 1e-10
_JITTER_GROWTH = 10.0
_JITTER_RETRIES = 3


@dataclass(frozen=True)
class SEHyperparams:
    """Squared-exponential kernel hyperparameters."""

    lengthscale: float
    signal_variance: float
    noise_variance: float

    def __post_init__(self):
        if not (np.isfinite(self.lengthscale) and self.lengthscale > 0):
            raise InvalidStateError("lengthscale must be finite and > 0")
        if not (np.isfinite(self.signal_variance) and self.signal_variance > 0):
            raise InvalidStateError("signal_variance must be finite and > 0")
        if not (np.isfinite(self.noise_variance) and self.noise_variance >= 0):
            raise InvalidStateError("noise_variance must be finite and >= 0")


@dataclass(frozen=True)
class GPModel:
    """A fitted exact GP: training data, factorization, and solve vector."""

    train_inputs: np.ndarray
    train_targets_centered: np.ndarray
    target_mean: float
    hyper: SEHyperparams
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    fingerprint: str = field(repr=False, default="")

    @property
    def n_train(self) -> int:
        return self.train_inputs.shape[0]


@dataclass(frozen=True)
class Prediction:
    """Per-point posterior marginals with 95 percent bounds."""

    mean: np.ndarray
    variance: np.ndarray
    lower95: np.ndarray
    upper95: np.ndarray


@dataclass(frozen=True)
class SearchBudget:
    """Budget for hyperparameter optimization: grid resolution per axis
    and the Nelder-Mead evaluation cap."""

    grid_size: int = 5
    refine_evals: int = 200


def _as_2d(X, name):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InvalidStateError(f"{name} must be a 2-D array")
    if not np.all(np.isfinite(X)):
        raise InvalidStateError(f"{name} contains non-finite values")
    return X


def se_kernel(x, x_prime, hyper: SEHyperparams) -> float:
    """Squared-exponential covariance of two points:
    ``sigma_f^2 exp(-||x - x'||^2 / (2 l^2))``."""
    x = np.asarray(x, dtype=float).ravel()
    x_prime = np.asarray(x_prime, dtype=float).ravel()
    if x.shape != x_prime.shape:
        raise InvalidStateError(
            f"dimension mismatch: {x.shape} vs {x_prime.shape}"
        )
    sq = float(np.sum((x - x_prime) ** 2))
    return hyper.signal_variance * np.exp(-sq / (2.0 * hyper.lengthscale**2))


def kernel_matrix(A, B, hyper: SEHyperparams) -> np.ndarray:
    """Gram matrix with entry (i, j) = se_kernel(A_i, B_j).

    When A and B are the same data the matrix is assembled from the
    condensed pairwise distances, so it is exactly symmetric with exactly
    ``sigma_f^2`` on the diagonal.
    """
    A = _as_2d(A, "A")
    B = _as_2d(B, "B")
    if A.shape[1] != B.shape[1]:
        raise InvalidStateError(
            f"feature dimension mismatch: {A.shape[1]} vs {B.shape[1]}"
        )
    gamma = 1.0 / (2.0 * hyper.lengthscale**2)
    if A is B or (A.shape == B.shape and np.array_equal(A, B)):
        sq = squareform(pdist(A, "sqeuclidean"))
        return hyper.signal_variance * np.exp(-gamma * sq)
    sq = cdist(A, B, "sqeuclidean")
    return hyper.signal_variance * np.exp(-gamma * sq)


def _factorize(gram: np.ndarray, hyper: SEHyperparams):
    """Cholesky of ``gram + (sigma_n^2 + jitter) I`` with escalation."""
    n = gram.shape[0]
    eye = np.eye(n)
    jitter = _JITTER_BASE * hyper.signal_variance
    for attempt in range(_JITTER_RETRIES + 1):
        shifted = gram + (hyper.noise_variance + jitter) * eye
        try:
            return cholesky(shifted, lower=True)
        except np.linalg.LinAlgError:
            jitter *= _JITTER_GROWTH
    raise NotPositiveDefiniteError(
        f"Cholesky failed after {_JITTER_RETRIES} jitter escalations "
        f"(final jitter {jitter / _JITTER_GROWTH:.3g})"
    )


def fit(X, y, hyper: SEHyperparams) -> GPModel:
    """Fit an exact GP: center targets, factorize, and presolve.

    O(n^3) time and O(n^2) memory in the training-set size.
    """
    X = _as_2d(X, "X")
    y = np.asarray(y, dtype=float).ravel()
    if len(y) != X.shape[0]:
        raise InvalidStateError("X and y row counts differ")
    if len(y) < 1:
        raise InvalidStateError("at least one training point required")
    if not np.all(np.isfinite(y)):
        raise InvalidStateError("y contains non-finite values")
    target_mean = float(y.mean())
    centered = y - target_mean
    gram = kernel_matrix(X, X, hyper)
    L = _factorize(gram, hyper)
    alpha = cho_solve((L, True), centered)
    return GPModel(
        train_inputs=X,
        fingerprint=_fingerprint(X, y),
        train_targets_centered=centered,
        target_mean=target_mean,
        hyper=hyper,
        chol=L,
        alpha=alpha,
    )


def predict(model: GPModel, Xstar) -> Prediction:
    """Posterior mean and per-point variance at the test inputs.

    mean = m + K_*^T alpha and variance_i = k(x_i, x_i) - ||L^{-1} k_*i||^2
    (the latent-function variance; observation noise is not added).
    Variances in [-1e-10, 0) are clamped to 0; anything more negative is
    an internal failure and raises.
    """
    Xstar = _as_2d(Xstar, "Xstar")
    if Xstar.shape[1] != model.train_inputs.shape[1]:
        raise InvalidStateError(
            f"feature dimension mismatch: {Xstar.shape[1]} vs "
            f"{model.train_inputs.shape[1]}"
        )
    ks = kernel_matrix(model.train_inputs, Xstar, model.hyper)
    mean = model.target_mean + ks.T @ model.alpha
    v = solve_triangular(model.chol, ks, lower=True)
    variance = model.hyper.signal_variance - np.sum(v * v, axis=0)
    low = variance < 0
    if np.any(variance < -1e-10):
        raise InvalidStateError(
            f"posterior variance {variance.min():.3e} below clamp tolerance"
        )
    variance = np.where(low, 0.0, variance)
    half = 1.96 * np.sqrt(variance)
    return Prediction(
        mean=mean, variance=variance, lower95=mean - half, upper95=mean + half
    )


def log_marginal_likelihood(model: GPModel) -> float:
    """Log evidence of the centered targets under the GP prior."""
    n = model.n_train
    return float(
        -0.5 * model.train_targets_centered @ model.alpha
        - np.sum(np.log(np.diag(model.chol)))
        - 0.5 * n * np.log(2.0 * np.pi)
    )


def _lml_from_distances(sq, centered, log_params):
    """LML for log-space hyperparameters over a precomputed squared-distance
    matrix; -inf when factorization fails."""
    log_l2, log_sf, log_sn = log_params
    # guard the exp against overflow from wild Nelder-Mead proposals
    if np.any(np.abs(log_params) > 50):
        return -np.inf
    l2 = np.exp(log_l2)
    sf = np.exp(log_sf)
    sn = np.exp(log_sn)
    n = len(centered)
    gram = sf * np.exp(-sq / (2.0 * l2))
    gram[np.diag_indices_from(gram)] += sn + _JITTER_BASE * sf
    try:
        L = cholesky(gram, lower=True)
    except np.linalg.LinAlgError:
        return -np.inf
    alpha = cho_solve((L, True), centered)
    return float(
        -0.5 * centered @ alpha
        - np.sum(np.log(np.diag(L)))
        - 0.5 * n * np.log(2.0 * np.pi)
    )


def optimize_hyperparameters(
    X, y, search: SearchBudget | None = None
) -> SEHyperparams:
    """Maximize the log marginal likelihood over (l, sigma_f^2, sigma_n^2).

    A coarse log-space grid (data-driven ranges: lengthscales around the
    median pairwise distance, variances around var(y)) seeds a Nelder-Mead
    refinement; the returned point never scores below the best grid point.
    """
    search = search or SearchBudget()
    X = _as_2d(X, "X")
    y = np.asarray(y, dtype=float).ravel()
    if len(y) < 2:
        raise InvalidStateError("hyperparameter optimization needs n >= 2")
    centered = y - y.mean()
    sq = squareform(pdist(X, "sqeuclidean"))

    var_y = float(centered.var())
    if var_y <= 0:
        var_y = 1.0  # degenerate targets; any scale works
    positive = sq[sq > 0]
    med = float(np.sqrt(np.median(positive))) if positive.size else 1.0
    g = search.grid_size
    lengthscales = np.geomspace(0.1 * med, 10.0 * med, g)
    signal_vars = np.geomspace(0.01, 100.0, g) * var_y
    noise_vars = np.geomspace(1e-4, 1.0, g) * var_y

    best_val = -np.inf
    best_log = None
    for l in lengthscales:
        for sf in signal_vars:
            for sn in noise_vars:
                lp = np.log([l * l, sf, sn])
                val = _lml_from_distances(sq, centered, lp)
                if val > best_val:
                    best_val = val
                    best_log = lp
    if best_log is None or not np.isfinite(best_val):
        raise OptimizationFailedError(
            "every grid candidate failed factorization"
        )

    result = minimize(
        lambda lp: -_lml_from_distances(sq, centered, lp),
        best_log,
        method="Nelder-Mead",
        options={"maxfev": search.refine_evals, "xatol": 1e-4, "fatol": 1e-7},
    )
    final_log = result.x if -result.fun > best_val else best_log
    l2, sf, sn = np.exp(final_log)
    return SEHyperparams(
        lengthscale=float(np.sqrt(l2)),
        signal_variance=float(sf),
        noise_variance=float(sn),
    )


def sample_posterior(
    model: GPModel, Xstar, rng: np.random.Generator, n_samples: int
) -> np.ndarray:
    """Independent draws from the per-point predictive marginals.

    Returns shape (n_samples, len(Xstar)). Sampling is diagonal: draws at
    different test points are independent, which is all the downstream
    histogram analyses use.
    """
    if n_samples < 1:
        raise InvalidStateError("n_samples must be >= 1")
    pred = predict(model, Xstar)
    std = np.sqrt(pred.variance)
    noise = rng.standard_normal((n_samples, len(pred.mean)))
    return pred.mean[None, :] + std[None, :] * noise


def _fingerprint(X: np.ndarray, y: np.ndarray) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(X, dtype=float).tobytes())
    digest.update(np.ascontiguousarray(y, dtype=float).tobytes())
    return digest.hexdigest()


def save_model(model: GPModel, path, standardization: dict | None = None) -> None:
    """Serialize hyperparameters plus a training-data fingerprint as JSON.

    The factorization is not stored; :func:`load_model` refits against the
    same data, verified by the fingerprint.
    """
    record = {
        "kind": "chaosid-gp",
        "lengthscale": model.hyper.lengthscale,
        "signal_variance": model.hyper.signal_variance,
        "noise_variance": model.hyper.noise_variance,
        "target_mean": model.target_mean,
        "n_train": model.n_train,
        "n_features": model.train_inputs.shape[1],
        "fingerprint": model.fingerprint,
        "standardization": standardization,
    }
    with Path(path).open("w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path, X, y) -> GPModel:
    """Rebuild a saved model against its training data.

    Raises
    ------
    SerializationError
        If the record is malformed or the data fingerprint differs.
    """
    try:
        record = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SerializationError(f"{path}: {exc}") from None
    for key in ("kind", "lengthscale", "signal_variance", "noise_variance",
                "fingerprint"):
        if key not in record:
            raise SerializationError(f"{path}: missing key {key!r}")
    if record["kind"] != "chaosid-gp":
        raise SerializationError(f"{path}: not a GP model record")
    X = _as_2d(X, "X")
    y = np.asarray(y, dtype=float).ravel()
    if _fingerprint(X, y) != record["fingerprint"]:
        raise SerializationError(
            f"{path}: training data does not match the stored fingerprint"
        )
    hyper = SEHyperparams(
        lengthscale=record["lengthscale"],
        signal_variance=record["signal_variance"],
        noise_variance=record["noise_variance"],
    )
    return fit(X, y, hyper)
