"""Forecast error metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, UndefinedNormalizationError


def rnmse(pred, truth):
    """Root normalized MSE: ``sqrt(sum_t ||pred_t - x_t||^2 / sum_t ||x_t||^2)``."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise DimensionMismatchError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    energy = float(np.sum(truth**2))
    if energy == 0.0:
        raise UndefinedNormalizationError("truth is all zero; rNMSE is undefined")
    return float(np.sqrt(np.sum((pred - truth) ** 2) / energy))


@dataclass(frozen=True)
class EvalReport:
    rnmse: float
    per_step_rnmse: np.ndarray
    per_node_mse: np.ndarray
    per_feature_rnmse: np.ndarray
    n_steps: int

    def to_dict(self):
        return {
            "rnmse": self.rnmse,
            "tau": self.n_steps,
            "per_step_rnmse": [float(v) for v in self.per_step_rnmse],
            "per_node_mse": [float(v) for v in self.per_node_mse],
            "per_feature_rnmse": [float(v) for v in self.per_feature_rnmse],
        }


def evaluate(pred, truth, n_nodes, n_features=1):
    """Joint rNMSE plus per-step, per-node and per-feature breakdowns.

    Steps (or channels) whose truth is identically zero get ``nan`` in the
    breakdowns rather than raising.
    """
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    total = rnmse(pred, truth)
    err2 = (pred - truth) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        per_step = np.sqrt(err2.sum(axis=1) / (truth**2).sum(axis=1))
        e3 = err2.reshape(-1, n_nodes, n_features)
        t3 = (truth**2).reshape(-1, n_nodes, n_features)
        per_feature = np.sqrt(e3.sum(axis=(0, 1)) / t3.sum(axis=(0, 1)))
    per_node = e3.sum(axis=2).mean(axis=0)
    return EvalReport(total, per_step, per_node, per_feature, pred.shape[0])
