"""Canonical correlation analysis and the canonical regressions used by CCA clustering."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, InfeasibleError
from .linalg import as_matrix

RANK_TOL = 1e-10


@dataclass
class CcaComponents:
    U: np.ndarray             # (d1, m), u_j^T Cov(X) u_j = 1
    V: np.ndarray             # (d2, m), v_j^T Cov(Y) v_j = 1
    correlations: np.ndarray  # (m,), descending
    alphas: np.ndarray = field(default=None)
    betas: np.ndarray = field(default=None)
    singular: bool = False        # a covariance block needed the pseudo-inverse
    degenerate: np.ndarray = field(default=None)  # per-component zero-variance flag from the regressions

    @property
    def m(self) -> int:
        return self.U.shape[1]


def _inv_sqrt(C: np.ndarray) -> tuple[np.ndarray, bool]:
    """Thresholded inverse square root of a PSD matrix."""
    w, Q = np.linalg.eigh((C + C.T) / 2)
    top = w.max() if w.size else 0.0
    if top <= 0:
        return np.zeros_like(C), True
    keep = w > RANK_TOL * top
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / np.sqrt(w[keep])
    return (Q * inv) @ Q.T, not keep.all()


def fit_cca(X, Y, m: int = 1) -> CcaComponents:
    """Leading ``m`` canonical pairs.

    Solved through the SVD of the whitened cross-covariance
    ``Cxx^{-1/2} Cxy Cyy^{-1/2}``, which is equivalent to the eigenproblems
    for ``Cxx^{-1} Cxy Cyy^{-1} Cyx`` and its counterpart.  Covariances are
    taken around the sample means, so uncentered input is accepted.
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    n, d1 = X.shape
    d2 = Y.shape[1]
    if Y.shape[0] != n:
        raise DataError(f"row mismatch: X has {n}, Y has {Y.shape[0]}")
    if n <= max(d1, d2):
        raise InfeasibleError(f"CCA needs more than {max(d1, d2)} rows, got {n}")
    Xc = X - X.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    Cxx = Xc.T @ Xc / n
    Cyy = Yc.T @ Yc / n
    Cxy = Xc.T @ Yc / n

    Wx, sing_x = _inv_sqrt(Cxx)
    Wy, sing_y = _inv_sqrt(Cyy)
    P, s, Qt = np.linalg.svd(Wx @ Cxy @ Wy)
    rank = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
    if not 1 <= m <= min(d1, d2, max(rank, 1)):
        raise ConfigError(f"m={m} exceeds min(d1, d2, rank(Cxy)) = {min(d1, d2, rank)}")

    U = Wx @ P[:, :m]
    V = Wy @ Qt.T[:, :m]
    # deterministic orientation; flipping u and v together keeps the correlation positive
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(m)])
    signs[signs == 0] = 1.0
    return CcaComponents(U * signs, V * signs, np.clip(s[:m], 0.0, 1.0), singular=sing_x or sing_y)


def fit_canonical_regressions(c: CcaComponents, X, Y) -> CcaComponents:
    """Ordinary least squares of each ``Y v_j`` on ``X u_j`` (intercept and slope).

    Components whose ``X u_j`` has zero variance get slope 0 and are flagged.
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    a = X @ c.U
    b = Y @ c.V
    alphas = np.empty(c.m)
    betas = np.empty(c.m)
    degenerate = np.zeros(c.m, dtype=bool)
    for j in range(c.m):
        da = a[:, j] - a[:, j].mean()
        var = da @ da
        if var <= 1e-14 * max(1.0, np.abs(a[:, j]).max() ** 2) * len(da):
            betas[j] = 0.0
            degenerate[j] = True
        else:
            betas[j] = (da @ (b[:, j] - b[:, j].mean())) / var
        alphas[j] = b[:, j].mean() - betas[j] * a[:, j].mean()
    c.alphas, c.betas, c.degenerate = alphas, betas, degenerate
    return c


def cca_weighted_errors(c: CcaComponents, X, Y) -> np.ndarray:
    """Per-row weighted squared residual of the canonical regressions.

    Weights are ``r_j / r_1``; when ``r_1`` is zero every component gets weight 1.
    """
    a = as_matrix(X, "X") @ c.U
    b = as_matrix(Y, "Y") @ c.V
    resid = b - c.alphas - c.betas * a
    r1 = c.correlations[0]
    weights = c.correlations / r1 if r1 > 0 else np.ones(c.m)
    return (resid**2) @ weights


def cca_affine_invariance_check(X, Y, Tx, Ty, m: int | None = None) -> float:
    """Largest change in the canonical correlations when ``X -> X Tx`` and ``Y -> Y Ty``."""
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    Tx = as_matrix(Tx, "Tx")
    Ty = as_matrix(Ty, "Ty")
    for name, T, d in (("Tx", Tx, X.shape[1]), ("Ty", Ty, Y.shape[1])):
        if T.shape != (d, d):
            raise DataError(f"{name} must be {d}x{d}")
        if np.linalg.cond(T) >= 1e6:
            raise DataError(f"{name} is ill-conditioned")
    if m is None:
        m = min(X.shape[1], Y.shape[1])
    r0 = fit_cca(X, Y, m).correlations
    r1 = fit_cca(X @ Tx, Y @ Ty, m).correlations
    return float(np.max(np.abs(r0 - r1)))
