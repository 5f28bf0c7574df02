"""Dense linear-algebra primitives used by every fitting routine.

All statistics use the population divisor ``n``.  Functions are pure and
never modify their inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

RCOND = 1e-12
SYM_TOL = 1e-8


@dataclass(frozen=True)
class ColumnStats:
    means: np.ndarray
    scales: np.ndarray
    constant: np.ndarray = field(default=None)  # bool mask, True where a column had zero variance

    def __post_init__(self):
        if self.constant is None:
            object.__setattr__(self, "constant", np.zeros(len(self.means), dtype=bool))

    def apply(self, M: np.ndarray) -> np.ndarray:
        """Apply the recorded centering/scaling to new rows."""
        return (as_matrix(M) - self.means) / self.scales

    def invert(self, M: np.ndarray) -> np.ndarray:
        return as_matrix(M) * self.scales + self.means

    @classmethod
    def identity(cls, d: int) -> "ColumnStats":
        return cls(np.zeros(d), np.ones(d))


@dataclass(frozen=True)
class EigenPairs:
    values: np.ndarray   # ascending
    vectors: np.ndarray  # columns


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float array; 1-D input becomes a single column."""
    A = np.asarray(M, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise DataError(f"{name} must be 2-dimensional, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DataError(f"{name} contains NaN or infinite entries")
    return A


def center_columns(M) -> tuple[np.ndarray, ColumnStats]:
    A = as_matrix(M)
    if A.shape[0] < 1:
        raise DataError("cannot center a matrix with no rows")
    means = A.mean(axis=0)
    return A - means, ColumnStats(means, np.ones(A.shape[1]))


def scale_unit_variance(M) -> tuple[np.ndarray, ColumnStats]:
    """Divide each column by its population standard deviation.

    Columns are not centered.  Constant columns are passed through unchanged,
    flagged in ``ColumnStats.constant`` and recorded with scale 1.
    """
    A = as_matrix(M)
    if A.shape[0] < 2:
        raise DataError("need at least 2 rows to estimate a column variance")
    sd = A.std(axis=0)
    # relative test so that a column like (5, 5, 5) with rounding noise still counts as constant
    magnitude = np.maximum(np.abs(A).max(axis=0), 1.0)
    constant = sd <= 1e-14 * magnitude
    scales = np.where(constant, 1.0, sd)
    return A / scales, ColumnStats(np.zeros(A.shape[1]), scales, constant)


def standardize(M, scale: bool = True) -> tuple[np.ndarray, ColumnStats]:
    """Center, then optionally scale to unit variance; returns combined stats."""
    C, cstats = center_columns(M)
    if not scale or C.shape[0] < 2:
        return C, cstats
    S, sstats = scale_unit_variance(C)
    return S, ColumnStats(cstats.means, sstats.scales, sstats.constant)


def _orient(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so that each one's largest-magnitude entry is non-negative."""
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eig(S) -> EigenPairs:
    A = as_matrix(S)
    if A.shape[0] != A.shape[1]:
        raise DataError(f"expected a square matrix, got shape {A.shape}")
    scale = max(np.abs(A).max(), np.finfo(float).tiny) if A.size else 1.0
    if A.size and np.abs(A - A.T).max() > SYM_TOL * scale:
        raise DataError("matrix is not symmetric")
    values, vectors = np.linalg.eigh((A + A.T) / 2)
    return EigenPairs(values, _orient(vectors))


def least_squares_solve(X, B) -> np.ndarray:
    """Minimum-norm minimizer of ``||X C - B||_F``.

    Singular values below ``RCOND`` times the largest are treated as zero.
    """
    X = as_matrix(X, "X")
    B = as_matrix(B, "B")
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise DataError("X is empty")
    if X.shape[0] != B.shape[0]:
        raise DataError(f"row mismatch: X has {X.shape[0]}, B has {B.shape[0]}")
    C, *_ = np.linalg.lstsq(X, B, rcond=RCOND)
    return C


def matrix_rank(X, rtol: float = RCOND) -> int:
    X = as_matrix(X)
    if X.size == 0:
        return 0
    s = np.linalg.svd(X, compute_uv=False)
    return int(np.sum(s > rtol * s[0])) if s[0] > 0 else 0


def residual_gram(X, Y) -> np.ndarray:
    """``Y^T H Y`` with ``H = I - X (X^T X)^+ X^T``, without forming ``H``.

    Computed as ``R^T R`` for the least-squares residual ``R = Y - X C``,
    which equals ``Y^T Y - (X^T Y)^T C`` and is PSD by construction.
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise DataError(f"row mismatch: X has {X.shape[0]}, Y has {Y.shape[0]}")
    if X.shape[1] == 0:
        R = Y
    else:
        R = Y - X @ least_squares_solve(X, Y)
    G = R.T @ R
    return (G + G.T) / 2
