"""Canonical Least Squares (CLS) components for a single data pair.

For centered views ``X`` (n x d1) and ``Y`` (n x d2), CLS solves

    min ||X U - Y V||_F^2   subject to   V^T V = I_m

greedily: the columns of ``V`` are the eigenvectors of ``Y^T H Y`` with the
``m`` smallest eigenvalues (``H`` the residual projector of ``X``) and each
column of ``U`` is the least-squares regression of ``Y v_j`` on ``X``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, InfeasibleError
from .linalg import as_matrix, least_squares_solve, matrix_rank, residual_gram, sym_eig

EIG_SLACK = 1e-8


@dataclass
class ClsComponents:
    U: np.ndarray            # (d1 [+1], m); last row is the intercept when enabled
    V: np.ndarray            # (d2, m), orthonormal columns
    eigenvalues: np.ndarray  # (m,), ascending, clamped at 0
    intercept: bool = False

    @property
    def m(self) -> int:
        return self.V.shape[1]

    @property
    def d1(self) -> int:
        return self.U.shape[0] - int(self.intercept)

    @property
    def d2(self) -> int:
        return self.V.shape[0]


@dataclass
class ClsFitReport:
    objective: float
    per_component_r2: np.ndarray
    rank_deficient: bool = False


def augment(X: np.ndarray, intercept: bool) -> np.ndarray:
    if not intercept:
        return X
    return np.hstack([X, np.ones((X.shape[0], 1))])


def fit_cls(X, Y, m: int = 1, intercept: bool = False) -> tuple[ClsComponents, ClsFitReport]:
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    n, d1 = X.shape
    d2 = Y.shape[1]
    if Y.shape[0] != n:
        raise DataError(f"row mismatch: X has {n}, Y has {Y.shape[0]}")
    if not 1 <= m <= min(d1, d2):
        raise ConfigError(f"m must be in [1, {min(d1, d2)}], got {m}")
    Xa = augment(X, intercept)
    if n < Xa.shape[1] or n < m:
        raise InfeasibleError(f"{n} rows cannot support {Xa.shape[1]} regressors and {m} components")

    eig = sym_eig(residual_gram(Xa, Y))
    V = eig.vectors[:, :m]
    U = least_squares_solve(Xa, Y @ V)
    comps = ClsComponents(U, V, np.maximum(eig.values[:m], 0.0), intercept)

    sx, sy = Xa @ U, Y @ V
    objective = float(np.sum((sx - sy) ** 2))
    from .metrics import r_squared

    r2 = np.array([r_squared(sx[:, j], sy[:, j]) for j in range(m)])
    report = ClsFitReport(objective, r2, matrix_rank(Xa) < Xa.shape[1])
    return comps, report


def _check_dims(c: ClsComponents, X: np.ndarray, Y: np.ndarray) -> None:
    if X.shape[1] != c.d1 or Y.shape[1] != c.d2:
        raise DataError(
            f"model expects {c.d1} x-columns and {c.d2} y-columns, got {X.shape[1]} and {Y.shape[1]}"
        )
    if X.shape[0] != Y.shape[0]:
        raise DataError("X and Y row counts differ")


def cls_transform(c: ClsComponents, X, Y) -> tuple[np.ndarray, np.ndarray]:
    """Component scores ``X_aug U`` and ``Y V`` (each n x m)."""
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    _check_dims(c, X, Y)
    return augment(X, c.intercept) @ c.U, Y @ c.V


def cls_point_errors(c: ClsComponents, X, Y) -> np.ndarray:
    """Squared distance between the two views' scores, one value per row."""
    sx, sy = cls_transform(c, X, Y)
    return np.sum((sy - sx) ** 2, axis=1)


def cls_point_error(c: ClsComponents, x, y) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.ndim != 1 or y.ndim != 1:
        raise DataError("x and y must be single rows")
    return float(cls_point_errors(c, x[None, :], y[None, :])[0])
