"""Small numeric helpers shared by the estimators."""

from __future__ import annotations

import numpy as np


def softmax(raw: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted for overflow safety."""
    z = raw - raw.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_loss(proba: np.ndarray, y: np.ndarray) -> float:
    """Mean cross entropy of integer labels under row-stochastic proba."""
    p = np.clip(proba[np.arange(len(y)), y], 1e-300, None)
    return float(-np.mean(np.log(p)))


def one_hot(y: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((len(y), n_classes))
    out[np.arange(len(y)), y] = 1.0
    return out


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def check_labels(y: np.ndarray, n_classes: int) -> np.ndarray:
    from ..errors import LabelError

    y = np.asarray(y)
    if y.ndim != 1:
        raise LabelError(f"labels must be 1-d, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(y == y.astype(np.int64)):
            raise LabelError("labels must be integers")
    y = y.astype(np.int64)
    if len(y) and (y.min() < 0 or y.max() >= n_classes):
        raise LabelError(
            f"labels must lie in [0, {n_classes}), got range "
            f"[{y.min()}, {y.max()}]"
        )
    return y
