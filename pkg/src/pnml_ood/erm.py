"""Least-squares single-layer softmax model.

The model is fit in logit space: targets are inverse-softmax images of
(eps-smoothed) one-hot labels and ``theta = pinv(X) @ Z``. There is no bias
term; append a constant feature if one is wanted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidInput
from .linalg_core import PnmlStats, as_matrix, project_orth
from .pnml_core import DEFAULT_ORTH_TOL

__all__ = [
    "DEFAULT_TARGET_EPS",
    "LinearModel",
    "softmax",
    "labels_to_one_hot",
    "one_hot_targets",
    "fit",
    "recursive_update",
    "predict",
    "genie_refit_oracle",
]

DEFAULT_TARGET_EPS = 0.01


@dataclass(frozen=True)
class LinearModel:
    """Weights ``theta`` of shape (M, C); column ``i`` scores class ``i``."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if w.ndim != 2:
            raise InvalidInput(f"weights must be 2-D, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise InvalidInput("weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights.shape[1]


def softmax(logits) -> np.ndarray:
    """Max-shifted softmax over the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise InvalidInput("logits must be finite")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def labels_to_one_hot(labels, n_classes: int | None = None) -> np.ndarray:
    """Integer class ids (0-based) to an (N, C) one-hot matrix."""
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise InvalidInput("labels must be a non-empty 1-D sequence")
    if not np.all(labels == np.round(labels)) or np.any(labels < 0):
        raise InvalidInput("labels must be non-negative integers")
    labels = labels.astype(np.int64)
    c = int(labels.max()) + 1 if n_classes is None else int(n_classes)
    if c < 2 or labels.max() >= c:
        raise InvalidInput(f"need at least 2 classes covering all labels, got C={c}")
    out = np.zeros((labels.size, c))
    out[np.arange(labels.size), labels] = 1.0
    return out


def one_hot_targets(labels, eps: float = DEFAULT_TARGET_EPS) -> np.ndarray:
    """Logit-space targets for one-hot rows.

    The hot class maps to ``ln(1 - eps)`` and every other class to
    ``ln(eps / (C - 1))``, so the softmax of a target row is the smoothed
    label itself.
    """
    Y = np.asarray(labels, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[1] < 2:
        raise InvalidInput(f"label matrix must be (N, C) with C >= 2, got {Y.shape}")
    if not (np.all((Y == 0) | (Y == 1)) and np.all(Y.sum(axis=1) == 1)):
        raise InvalidInput("each label row must be one-hot")
    c = Y.shape[1]
    if not (0.0 < eps < 1.0 / c):
        raise InvalidInput(f"eps must lie in (0, 1/C) = (0, {1.0 / c}), got {eps!r}")
    hot, cold = np.log1p(-eps), np.log(eps / (c - 1))
    return np.where(Y == 1.0, hot, cold)


def fit(train, targets, stats: PnmlStats) -> LinearModel:
    """Minimum-norm least-squares weights ``quad_kernel @ X.T @ Z``."""
    X = as_matrix(train)
    Z = np.asarray(targets, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] != X.shape[0]:
        raise InvalidInput(f"targets shape {Z.shape} does not match {X.shape[0]} training rows")
    if X.shape[1] != stats.dim:
        raise InvalidInput(f"training width {X.shape[1]} does not match stats width {stats.dim}")
    return LinearModel(stats.quad_kernel @ (X.T @ Z))


def _gain(x, stats, orth_tol):
    x_perp = project_orth(x, stats)
    nx = np.linalg.norm(x)
    np_ = np.linalg.norm(x_perp)
    if np_ > orth_tol * nx:
        return x_perp / np_**2
    kx = stats.quad_kernel @ x
    return kx / (1.0 + x @ kx)


def recursive_update(model: LinearModel, stats: PnmlStats, x, z_row, orth_tol: float = DEFAULT_ORTH_TOL) -> LinearModel:
    """Add one sample ``(x, z_row)`` to the fit without refitting.

    ``theta' = theta + g (z_row - x^T theta)`` with the gain ``g`` chosen by
    whether ``x`` leaves the training row space.
    """
    x = np.asarray(x, dtype=np.float64)
    z_row = np.asarray(z_row, dtype=np.float64)
    if x.shape != (model.n_features,) or x.shape != (stats.dim,):
        raise InvalidInput(f"x must have length {model.n_features}, got shape {x.shape}")
    if z_row.shape != (model.n_classes,):
        raise InvalidInput(f"z_row must have length {model.n_classes}, got shape {z_row.shape}")
    g = _gain(x, stats, orth_tol)
    innovation = z_row - x @ model.weights
    return LinearModel(model.weights + np.outer(g, innovation))


def predict(model: LinearModel, x) -> np.ndarray:
    """Class probabilities ``softmax(x^T theta)`` for a vector or (K, M) stack."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.n_features:
        raise InvalidInput(f"x must have {model.n_features} features, got shape {x.shape}")
    return softmax(x @ model.weights)


def genie_refit_oracle(train, targets, x, c: int, stats: PnmlStats, orth_tol: float = DEFAULT_ORTH_TOL) -> float:
    """Class-``c`` probability after refitting with ``x`` labelled ``c``.

    The refit runs through :func:`recursive_update` with target ``ln S`` for
    column ``c`` (``S`` the softmax partition sum at ``x``) and zero innovation
    for the other columns. ``c`` is 0-based.
    """
    model = fit(train, targets, stats)
    x = np.asarray(x, dtype=np.float64)
    if not (0 <= c < model.n_classes):
        raise InvalidInput(f"class index {c} out of range for {model.n_classes} classes")
    logits = x @ model.weights
    z_row = logits.copy()
    z_row[c] = logsumexp(logits)
    updated = recursive_update(model, stats, x, z_row, orth_tol)
    return float(predict(updated, x)[c])
