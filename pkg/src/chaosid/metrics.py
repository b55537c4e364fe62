"""Evaluation measures: pointwise regression metrics, mass-normalized
histograms, and the Bhattacharyya distance between binned distributions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    ConfigurationError,
    EmptySampleError,
    IncompatibleHistogramError,
    InvalidStateError,
)

__all__ = [
    "Histogram",
    "MetricRow",
    "point_metrics",
    "histogram",
    "bhattacharyya",
]

# floor added inside the Bhattacharyya logarithm so disjoint supports
# give a large finite distance instead of infinity
_BHATTA_FLOOR = 1e-12


@dataclass(frozen=True)
class Histogram:
    """Binned distribution: mass per bin (not per unit width)."""

    edges: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "edges", np.asarray(self.edges, dtype=float))
        object.__setattr__(self, "density", np.asarray(self.density, dtype=float))
        if self.edges.ndim != 1 or len(self.edges) < 2:
            raise InvalidStateError("edges must be a vector of length >= 2")
        if np.any(np.diff(self.edges) <= 0):
            raise InvalidStateError("edges must be strictly increasing")
        if self.density.shape != (len(self.edges) - 1,):
            raise InvalidStateError("density length must be len(edges) - 1")
        if np.any(self.density < 0):
            raise InvalidStateError("density must be non-negative")
        if abs(self.density.sum() - 1.0) > 1e-12:
            raise InvalidStateError("density must sum to 1")


@dataclass(frozen=True)
class MetricRow:
    """The five comparison measures for one model."""

    mse: float
    mae: float
    r2: float
    bhattacharyya: float
    pearson: float


def point_metrics(y_true, y_pred) -> dict:
    """MSE, MAE, coefficient of determination, and Pearson correlation.

    R^2 uses the standard residual form 1 - SS_res / SS_tot. For a
    constant ``y_true`` both r2 and pearson are undefined and returned as
    NaN; mse and mae are always computed.
    """
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if len(y_true) == 0 or y_true.shape != y_pred.shape:
        raise InvalidStateError("y_true and y_pred must be equal nonzero length")
    resid = y_true - y_pred
    mse = float(np.mean(resid**2))
    mae = float(np.mean(np.abs(resid)))
    centered = y_true - y_true.mean()
    ss_tot = float(np.sum(centered**2))
    if ss_tot == 0.0:
        return {"mse": mse, "mae": mae, "r2": float("nan"), "pearson": float("nan")}
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot
    pred_centered = y_pred - y_pred.mean()
    denom = float(np.sqrt(np.sum(centered**2) * np.sum(pred_centered**2)))
    pearson = float("nan") if denom == 0.0 else float(
        np.sum(centered * pred_centered) / denom
    )
    return {"mse": mse, "mae": mae, "r2": r2, "pearson": pearson}


def histogram(values, edges) -> Histogram:
    """Mass-normalized histogram over the given bin edges.

    Bins are right-open except the last (closed). Values outside the
    support are clamped into the boundary bins, so every sample counts.
    """
    values = np.asarray(values, dtype=float).ravel()
    edges = np.asarray(edges, dtype=float).ravel()
    if len(values) == 0:
        raise EmptySampleError("cannot build a histogram from an empty sample")
    if len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ConfigurationError("edges must be strictly increasing, length >= 2")
    if not np.all(np.isfinite(values)):
        raise InvalidStateError("values contain non-finite entries")
    clamped = np.clip(values, edges[0], edges[-1])
    counts, _ = np.histogram(clamped, bins=edges)
    return Histogram(edges=edges, density=counts / counts.sum())


def bhattacharyya(p: Histogram, q: Histogram) -> float:
    """Bhattacharyya distance ``-ln(sum_b sqrt(p_b q_b))`` between two
    histograms over identical edges.

    A floor of 1e-12 inside the logarithm keeps disjoint supports finite,
    and the result is clamped at 0 so identical histograms return exactly
    0 rather than the floor's tiny negative offset.
    """
    if not np.array_equal(p.edges, q.edges):
        raise IncompatibleHistogramError("histogram edges differ")
    coeff = float(np.sum(np.sqrt(p.density * q.density)))
    return max(0.0, -float(np.log(coeff + _BHATTA_FLOOR)))
