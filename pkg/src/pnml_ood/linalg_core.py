"""Gram-matrix eigendecomposition and the pseudo-inverse products built from it.

Everything is derived from the M x M matrix ``X.T @ X`` instead of an SVD of
the N x M data matrix, since N (training embeddings) is usually much larger
than M (embedding width). With ``X.T @ X = U diag(lam) U.T``::

    pinv(X) @ pinv(X).T = sum_{lam_m > tol} u_m u_m.T / lam_m   (quad_kernel)
    pinv(X) @ X         = sum_{lam_m > tol} u_m u_m.T           (row_proj)
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTraining, InvalidInput, NumericalFailure

__all__ = [
    "DEFAULT_RANK_TOL_FACTOR",
    "EmbeddingMatrix",
    "EigenBasis",
    "PnmlStats",
    "as_matrix",
    "decompose",
    "build_stats",
    "project_orth",
]

DEFAULT_RANK_TOL_FACTOR = float(np.finfo(np.float64).eps)


def _readonly(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Row-per-sample feature matrix.

    ``normalized`` records that every row has unit L2 norm; it is checked on
    construction.
    """

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2:
            raise InvalidInput(f"embedding matrix must be 2-D, got shape {data.shape}")
        n, m = data.shape
        if n < 1 or m < 1:
            raise InvalidInput(f"embedding matrix must be non-empty, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            bad = int(np.argwhere(~np.isfinite(data))[0, 0])
            raise InvalidInput(f"non-finite value in embedding row {bad}")
        if self.normalized:
            norms = np.linalg.norm(data, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-9):
                bad = int(np.argmax(np.abs(norms - 1.0)))
                raise InvalidInput(f"row {bad} is flagged normalized but has norm {norms[bad]!r}")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def __len__(self):
        return self.rows


def as_matrix(x) -> np.ndarray:
    """Return a finite float64 2-D array from an EmbeddingMatrix or array-like."""
    if isinstance(x, EmbeddingMatrix):
        return x.data
    return EmbeddingMatrix(x).data


@dataclass(frozen=True)
class EigenBasis:
    """Eigendecomposition of ``X.T @ X``.

    Columns of ``eigvecs`` are the eigenvectors, ordered by descending
    eigenvalue. ``rank`` counts eigenvalues strictly above the cutoff
    ``rank_tol_factor * max(eigvals) * max(N, M)``.
    """

    eigvecs: np.ndarray
    eigvals: np.ndarray
    rank: int
    rank_tol_factor: float = DEFAULT_RANK_TOL_FACTOR

    def __post_init__(self):
        object.__setattr__(self, "eigvecs", _readonly(self.eigvecs))
        object.__setattr__(self, "eigvals", _readonly(self.eigvals))
        object.__setattr__(self, "rank", int(self.rank))

    @property
    def dim(self) -> int:
        return self.eigvals.shape[0]


@dataclass(frozen=True)
class PnmlStats:
    """Precomputed training statistics used to score test embeddings."""

    basis: EigenBasis
    quad_kernel: np.ndarray
    row_proj: np.ndarray
    n_train: int
    normalized: bool = False
    _fingerprint: str = field(default="", repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "quad_kernel", _readonly(self.quad_kernel))
        object.__setattr__(self, "row_proj", _readonly(self.row_proj))
        object.__setattr__(self, "n_train", int(self.n_train))

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def rank(self) -> int:
        return self.basis.rank

    @property
    def degenerate(self) -> bool:
        return self.basis.rank == 0

    def fingerprint(self) -> str:
        """SHA-256 over the eigenbasis, rank and training count."""
        if not self._fingerprint:
            h = hashlib.sha256()
            h.update(np.ascontiguousarray(self.basis.eigvals, dtype="<f8").tobytes())
            h.update(np.ascontiguousarray(self.basis.eigvecs, dtype="<f8").tobytes())
            h.update(f"{self.basis.rank}:{self.n_train}:{int(self.normalized)}".encode())
            object.__setattr__(self, "_fingerprint", h.hexdigest())
        return self._fingerprint


def _fix_signs(vecs):
    # largest-magnitude component of each column made positive (first on ties)
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def decompose(train, rank_tol_factor: float = DEFAULT_RANK_TOL_FACTOR) -> EigenBasis:
    """Eigendecompose the Gram matrix ``X.T @ X`` of the training rows.

    Parameters
    ----------
    train : EmbeddingMatrix or array_like, shape (N, M)
    rank_tol_factor : float
        Eigenvalues ``<= rank_tol_factor * max(eigvals) * max(N, M)`` count
        as zero.

    Returns
    -------
    EigenBasis
    """
    X = as_matrix(train)
    if not (np.isfinite(rank_tol_factor) and rank_tol_factor > 0):
        raise InvalidInput(f"rank_tol_factor must be positive, got {rank_tol_factor!r}")
    n, m = X.shape
    gram = X.T @ X
    gram = 0.5 * (gram + gram.T)
    try:
        vals, vecs = np.linalg.eigh(gram)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(vals, kind="stable")[::-1]
    vals = np.clip(vals[order], 0.0, None)
    vecs = _fix_signs(vecs[:, order])
    cutoff = rank_tol_factor * vals[0] * max(n, m)
    rank = int(np.count_nonzero(vals > cutoff))
    return EigenBasis(eigvecs=vecs, eigvals=vals, rank=rank, rank_tol_factor=rank_tol_factor)


def build_stats(basis: EigenBasis, n_train: int, normalized: bool = False) -> PnmlStats:
    """Form the quadratic-form kernel and row-space projector from ``basis``.

    A rank-0 basis yields zero matrices and a :class:`DegenerateTraining`
    warning.
    """
    r = basis.rank
    m = basis.dim
    if r == 0:
        warnings.warn("training data has numerical rank 0", DegenerateTraining, stacklevel=2)
        zero = np.zeros((m, m))
        return PnmlStats(basis, zero, zero, n_train, normalized)
    U = basis.eigvecs[:, :r]
    lam = basis.eigvals[:r]
    quad = (U / lam) @ U.T
    proj = U @ U.T
    quad = 0.5 * (quad + quad.T)
    proj = 0.5 * (proj + proj.T)
    return PnmlStats(basis, quad, proj, n_train, normalized)


def project_orth(x, stats: PnmlStats) -> np.ndarray:
    """Component of ``x`` orthogonal to the training row space, ``(I - P) x``.

    Accepts a single vector of length M or a stack of shape (K, M).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (stats.dim,) or x.ndim > 2:
        raise InvalidInput(f"expected length-{stats.dim} vector(s), got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInput("non-finite value in test vector")
    return x - x @ stats.row_proj
