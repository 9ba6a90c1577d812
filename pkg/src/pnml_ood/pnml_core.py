"""Analytic pNML quantities for a single-layer softmax classifier.

For a test embedding ``x`` with ERM class probabilities ``p``, adding ``x``
to the training set with label ``c`` and refitting the last layer gives the
class-``c`` probability::

    genie(p_c) = p_c / (p_c + p_c**xtg * (1 - p_c))

where ``xtg`` (the statistic x^T g) is 1 when ``x`` has a component outside the
training row space and ``q / (1 + q)`` otherwise, with
``q = x^T pinv(X) pinv(X)^T x``. The regret is ``log(sum_c genie(p_c))`` and
the pNML posterior is ``genie(p) / sum(genie(p))``.

Boundary conventions: a class with probability exactly 0 contributes 0 and a
class with probability exactly 1 contributes 1, so a certain prediction has
zero regret wherever ``x`` lies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .linalg_core import PnmlStats, project_orth

__all__ = [
    "DEFAULT_ORTH_TOL",
    "PROB_CLIP",
    "RegretScore",
    "as_prob_vector",
    "x_top_g",
    "genie_prob",
    "regret",
    "pnml_posterior",
    "response_curve",
    "score_one",
]

DEFAULT_ORTH_TOL = 1e-6
PROB_CLIP = 1e-12
_SIMPLEX_TOL = 1e-9


def as_prob_vector(p) -> np.ndarray:
    """Validate ``p`` as a simplex element (last axis) and return it as float64."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim < 1 or p.shape[-1] < 2:
        raise InvalidInput(f"probability vector needs at least 2 classes, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise InvalidInput("probabilities must be finite and lie in [0, 1]")
    if np.any(np.abs(p.sum(axis=-1) - 1.0) > _SIMPLEX_TOL):
        raise InvalidInput("probabilities must sum to 1")
    return p


@dataclass(frozen=True)
class RegretScore:
    """Per-sample scoring record.

    ``regret`` is in nats; ``baseline`` is the max ERM probability.
    """

    xtg: float
    regret: float
    pnml_posterior: np.ndarray
    baseline: float
    genie_probs: np.ndarray


def _check_xtg(xtg, allow_above_one=False):
    xtg = np.asarray(xtg, dtype=np.float64)
    if not np.all(np.isfinite(xtg)) or np.any(xtg < 0):
        raise InvalidInput("xtg must be finite and non-negative")
    if not allow_above_one and np.any(xtg > 1.0):
        raise InvalidInput("xtg must lie in [0, 1] on scoring paths")
    return xtg


def x_top_g(x, stats: PnmlStats, orth_tol: float = DEFAULT_ORTH_TOL):
    """The statistic x^T g for one vector or a (K, M) stack of vectors.

    Returns exactly 1.0 when ``||x_perp|| > orth_tol * ||x||``, otherwise
    ``q / (1 + q)`` with ``q = x^T quad_kernel x``.
    """
    x = np.asarray(x, dtype=np.float64)
    x_perp = project_orth(x, stats)
    norm_x = np.linalg.norm(x, axis=-1)
    norm_perp = np.linalg.norm(x_perp, axis=-1)
    q = np.einsum("...i,...i->...", x @ stats.quad_kernel, x)
    q = np.maximum(q, 0.0)
    out = np.where(norm_perp > orth_tol * norm_x, 1.0, q / (1.0 + q))
    return float(out) if out.ndim == 0 else out


def _terms(p, xtg):
    """Genie probabilities, vectorized over the last axis of ``p``.

    Interior probabilities are clipped to [PROB_CLIP, 1 - PROB_CLIP] and, when
    clipping moved any of them, rescaled so the vector still sums to one.
    """
    p = np.array(p, dtype=np.float64)
    xtg = np.asarray(xtg, dtype=np.float64)
    zero = p == 0.0
    one = p == 1.0
    interior = ~(zero | one)
    clipped = np.where(interior, np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP), p)
    if np.any(clipped != p):
        fixed_mass = np.sum(np.where(interior, 0.0, p), axis=-1, keepdims=True)
        inner_mass = np.sum(np.where(interior, clipped, 0.0), axis=-1, keepdims=True)
        target = 1.0 - fixed_mass
        scale = np.where((target > 0) & (inner_mass > 0), target / np.where(inner_mass > 0, inner_mass, 1.0), 1.0)
        clipped = np.where(interior, clipped * scale, clipped)
    safe = np.where(interior, clipped, 0.5)
    # p / (p + p**t (1 - p)) == 1 / (1 + p**(t - 1) (1 - p)); no overflow for p >= PROB_CLIP, t >= 0
    t = xtg[..., None] if xtg.ndim == p.ndim - 1 and p.ndim > 0 else xtg
    inner = 1.0 / (1.0 + np.exp((t - 1.0) * np.log(safe)) * (1.0 - safe))
    return np.where(one, 1.0, np.where(zero, 0.0, inner))


def genie_prob(p_c, xtg):
    """Refit probability of class ``c`` when the test point is labelled ``c``.

    Scalars in, scalar out; arrays broadcast.
    """
    p_c = np.asarray(p_c, dtype=np.float64)
    if not np.all(np.isfinite(p_c)) or np.any((p_c < 0) | (p_c > 1)):
        raise InvalidInput("p_c must lie in [0, 1]")
    xtg = _check_xtg(xtg, allow_above_one=True)
    zero = p_c == 0.0
    one = p_c == 1.0
    safe = np.where(zero | one, 0.5, p_c)
    val = 1.0 / (1.0 + np.exp((xtg - 1.0) * np.log(safe)) * (1.0 - safe))
    out = np.where(one, 1.0, np.where(zero, 0.0, val))
    return float(out) if out.ndim == 0 else out


def _regret(p, xtg):
    return np.log(np.sum(_terms(p, xtg), axis=-1))


def regret(p, xtg, *, allow_above_one: bool = False):
    """pNML regret in nats: ``log sum_i p_i / (p_i + p_i**xtg (1 - p_i))``.

    ``p`` may be a single simplex vector or a (K, C) stack paired with a
    length-K ``xtg``. Values of ``xtg`` above 1 are rejected unless
    ``allow_above_one`` is set; they cannot arise from :func:`x_top_g`.
    """
    p = as_prob_vector(p)
    xtg = _check_xtg(xtg, allow_above_one)
    out = np.maximum(_regret(p, xtg), 0.0)
    return float(out) if out.ndim == 0 else out


def pnml_posterior(p, xtg, *, allow_above_one: bool = False) -> np.ndarray:
    """Normalized genie probabilities ``q_i = genie_i / sum_j genie_j``."""
    p = as_prob_vector(p)
    xtg = _check_xtg(xtg, allow_above_one)
    terms = _terms(p, xtg)
    k = terms.sum(axis=-1, keepdims=True)
    assert np.all(k > 0), "normalization factor must be positive for a simplex"
    return terms / k


def response_curve(p1: float, xtg_grid) -> list[tuple[float, float]]:
    """Two-class regret divided by ``log 2`` along ``xtg_grid``.

    Accepts ``xtg > 1``, unlike the scoring path.
    """
    if not (0.0 < p1 < 1.0):
        raise InvalidInput(f"p1 must lie in (0, 1), got {p1!r}")
    grid = _check_xtg(np.asarray(xtg_grid, dtype=np.float64).ravel(), allow_above_one=True)
    p = np.array([p1, 1.0 - p1])
    values = _regret(np.broadcast_to(p, (grid.size, 2)), grid) / math.log(2.0)
    values = np.clip(values, 0.0, 1.0)
    return [(float(t), float(v)) for t, v in zip(grid, values)]


def score_one(p, xtg) -> RegretScore:
    """Bundle regret, posterior and baseline for a single sample."""
    p = as_prob_vector(p)
    xtg = float(_check_xtg(xtg))
    terms = _terms(p, xtg)
    k = float(terms.sum())
    return RegretScore(
        xtg=xtg,
        regret=max(math.log(k), 0.0),
        pnml_posterior=terms / k,
        baseline=float(p.max()),
        genie_probs=terms,
    )
