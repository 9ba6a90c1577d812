"""Batch scoring of precomputed embeddings.

Recipe for a pretrained network: L2-normalize the training embeddings and
precompute their statistics once (:func:`prepare`), then score each test
embedding together with the network's own softmax output
(:func:`score_batch`). Higher regret means more likely out-of-distribution.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import erm
from .errors import InvalidInput
from .linalg_core import (
    DEFAULT_RANK_TOL_FACTOR,
    EmbeddingMatrix,
    PnmlStats,
    as_matrix,
    build_stats,
    decompose,
)
from .pnml_core import DEFAULT_ORTH_TOL, RegretScore, _terms, as_prob_vector, x_top_g

__all__ = [
    "ScoredBatch",
    "l2_normalize",
    "prepare",
    "score_batch",
    "baseline_score",
    "spectrum_report",
    "regret_map",
    "scoring_threads",
]

HIGHER_IS_OOD = "higher regret => more OOD"
_CHUNK = 4096


def l2_normalize(batch) -> EmbeddingMatrix:
    """Scale every row to unit L2 norm. Zero rows are rejected."""
    if isinstance(batch, EmbeddingMatrix) and batch.normalized:
        return batch
    X = as_matrix(batch)
    norms = np.linalg.norm(X, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise InvalidInput(f"cannot normalize zero embedding at row {int(zero[0])}")
    return EmbeddingMatrix(X / norms[:, None], normalized=True)


def prepare(train_embeddings, normalize: bool = True, rank_tol_factor: float = DEFAULT_RANK_TOL_FACTOR) -> PnmlStats:
    """Training statistics, optionally after L2 normalization of the rows."""
    train = l2_normalize(train_embeddings) if normalize else EmbeddingMatrix(as_matrix(train_embeddings))
    basis = decompose(train, rank_tol_factor)
    return build_stats(basis, train.rows, normalized=normalize)


def scoring_threads() -> int:
    """Worker count from ``PNML_THREADS`` (unset or 0 means one per CPU)."""
    raw = os.environ.get("PNML_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise InvalidInput(f"PNML_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise InvalidInput("PNML_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


@dataclass(frozen=True)
class ScoredBatch:
    """Column-wise per-sample scores; indexing yields :class:`RegretScore`."""

    xtg: np.ndarray
    regret: np.ndarray
    pnml_posterior: np.ndarray
    baseline: np.ndarray
    genie_probs: np.ndarray
    direction: str = HIGHER_IS_OOD
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return self.xtg.shape[0]

    def __getitem__(self, i) -> RegretScore:
        return RegretScore(
            xtg=float(self.xtg[i]),
            regret=float(self.regret[i]),
            pnml_posterior=self.pnml_posterior[i],
            baseline=float(self.baseline[i]),
            genie_probs=self.genie_probs[i],
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def scores(self) -> list[RegretScore]:
        return list(self)

    @property
    def pnml_max(self) -> np.ndarray:
        return self.pnml_posterior.max(axis=1)


def _score_chunk(X, P, stats, orth_tol):
    xtg = np.atleast_1d(x_top_g(X, stats, orth_tol))
    terms = _terms(P, xtg)
    k = terms.sum(axis=1)
    return xtg, np.maximum(np.log(k), 0.0), terms / k[:, None], terms


def score_batch(
    stats: PnmlStats,
    test_embeddings,
    erm_probs,
    normalize: bool | None = None,
    orth_tol: float = DEFAULT_ORTH_TOL,
    threads: int | None = None,
    provenance: dict | None = None,
) -> ScoredBatch:
    """Score test embeddings against precomputed training statistics.

    Parameters
    ----------
    stats : PnmlStats
    test_embeddings : EmbeddingMatrix or array_like, shape (K, M)
    erm_probs : array_like, shape (K, C)
        The pretrained model's softmax outputs for the same samples.
    normalize : bool, optional
        Normalize the test rows first. Defaults to ``stats.normalized``.
    threads : int, optional
        Worker count; defaults to :func:`scoring_threads`. Output order always
        matches input order.
    """
    if normalize is None:
        normalize = stats.normalized
    emb = l2_normalize(test_embeddings) if normalize else EmbeddingMatrix(as_matrix(test_embeddings))
    X = emb.data
    P = as_prob_vector(np.atleast_2d(np.asarray(erm_probs, dtype=np.float64)))
    if P.ndim != 2 or P.shape[0] != X.shape[0]:
        raise InvalidInput(f"got {X.shape[0]} embeddings but {P.shape[0]} probability rows")
    if X.shape[1] != stats.dim:
        raise InvalidInput(f"embedding width {X.shape[1]} does not match stats width {stats.dim}")

    n = X.shape[0]
    threads = scoring_threads() if threads is None else max(int(threads), 1)
    bounds = [(i, min(i + _CHUNK, n)) for i in range(0, n, _CHUNK)]
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _score_chunk(X[b[0]:b[1]], P[b[0]:b[1]], stats, orth_tol), bounds))
    else:
        parts = [_score_chunk(X[a:b], P[a:b], stats, orth_tol) for a, b in bounds]
    xtg, reg, post, terms = (np.concatenate(col) for col in zip(*parts))

    prov = {"stats_fingerprint": stats.fingerprint()}
    prov.update(provenance or {})
    return ScoredBatch(
        xtg=xtg,
        regret=reg,
        pnml_posterior=post,
        baseline=P.max(axis=1),
        genie_probs=terms,
        provenance=prov,
    )


def baseline_score(p) -> float:
    """Max softmax probability; lower means more likely OOD."""
    return float(as_prob_vector(p).max())


def spectrum_report(stats: PnmlStats) -> list[tuple[int, float]]:
    """Eigenvalues of ``X.T @ X`` in descending order with 1-based indices."""
    return [(i + 1, float(v)) for i, v in enumerate(stats.basis.eigvals)]


def regret_map(model: erm.LinearModel, stats: PnmlStats, grid, orth_tol: float = DEFAULT_ORTH_TOL):
    """ERM class-2 probability and regret on a 2-D lattice, row-major.

    ``grid`` is ``(x1_min, x1_max, x2_min, x2_max, steps)`` or a mapping with
    those keys. Rows are ``(x1, x2, p_c2, regret)``; ``x2`` varies slowest.
    """
    if isinstance(grid, dict):
        grid = (grid["x1_min"], grid["x1_max"], grid["x2_min"], grid["x2_max"], grid["steps"])
    x1_min, x1_max, x2_min, x2_max, steps = grid
    steps = int(steps)
    if model.n_features != 2 or stats.dim != 2:
        raise InvalidInput("regret maps need exactly two features")
    if steps < 2:
        raise InvalidInput(f"steps must be >= 2, got {steps}")
    xs = np.linspace(float(x1_min), float(x1_max), steps)
    ys = np.linspace(float(x2_min), float(x2_max), steps)
    g2, g1 = np.meshgrid(ys, xs, indexing="ij")
    pts = np.column_stack([g1.ravel(), g2.ravel()])
    probs = erm.predict(model, pts)
    xtg = np.atleast_1d(x_top_g(pts, stats, orth_tol))
    reg = np.maximum(np.log(_terms(probs, xtg).sum(axis=1)), 0.0)
    return [(float(a), float(b), float(p), float(r)) for (a, b), p, r in zip(pts, probs[:, 1], reg)]
