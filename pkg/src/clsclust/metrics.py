"""Evaluation and model selection: R^2, label agreement, elbow tables."""
from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, InfeasibleError

MAX_PERMUTATION_K = 8


def r_squared(a, b) -> float:
    """Squared Pearson correlation of two equal-length vectors.

    Returns 0 when either vector is constant.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape or a.size < 2:
        raise DataError("r_squared needs two vectors of equal length >= 2")
    da = a - a.mean()
    db = b - b.mean()
    saa, sbb = da @ da, db @ db
    if saa <= 0 or sbb <= 0:
        return 0.0
    return float(min((da @ db) ** 2 / (saa * sbb), 1.0))


@dataclass
class AgreementScore:
    accuracy: float
    permutation: tuple[int, ...]  # predicted label p is renamed to permutation[p]
    pearson: float | None = None

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "pearson": self.pearson, "permutation": list(self.permutation)}


def label_agreement(truth, pred, k: int) -> AgreementScore:
    """Best-permutation accuracy, plus Pearson correlation of the aligned labels when ``k == 2``."""
    truth = np.asarray(truth, dtype=int).ravel()
    pred = np.asarray(pred, dtype=int).ravel()
    if truth.shape != pred.shape:
        raise DataError(f"label vectors differ in length: {truth.size} vs {pred.size}")
    if k > MAX_PERMUTATION_K:
        raise ConfigError(f"label_agreement supports k <= {MAX_PERMUTATION_K}")
    if truth.size and (truth.min() < 0 or pred.min() < 0 or truth.max() >= k or pred.max() >= k):
        raise DataError(f"labels must lie in [0, {k})")
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (pred, truth), 1)
    best, best_perm = -1, None
    for perm in itertools.permutations(range(k)):
        hits = int(confusion[np.arange(k), perm].sum())
        if hits > best:
            best, best_perm = hits, perm
    accuracy = best / truth.size if truth.size else 1.0
    pearson = None
    if k == 2:
        aligned = np.asarray(best_perm)[pred]
        pearson = _pearson(truth, aligned)
    return AgreementScore(accuracy, tuple(int(p) for p in best_perm), pearson)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    denom = math.sqrt(float(da @ da) * float(db @ db))
    if denom == 0:
        return 1.0 if np.array_equal(a, b) else 0.0
    return float(da @ db) / denom


def cluster_component_r2(models, X, Y, labels) -> np.ndarray:
    """R^2 between paired CLS scores, per cluster (rows) and component (columns).

    Clusters with fewer than 2 rows get NaN.
    """
    from .cls import cls_transform

    labels = np.asarray(labels)
    out = np.full((len(models), models[0].m), np.nan)
    for i, c in enumerate(models):
        rows = labels == i
        if rows.sum() < 2:
            continue
        sx, sy = cls_transform(c, X[rows], Y[rows])
        out[i] = [r_squared(sx[:, j], sy[:, j]) for j in range(c.m)]
    return out


def regression_r2(X_train, Y_train, labels_train, X_test, Y_test, labels_test, k: int) -> np.ndarray:
    """Per-cluster OLS of each Y column on X (with intercept), scored on test rows.

    Returns a (k, d2) array of test R^2; clusters with fewer than 2 test rows get NaN.
    """
    X_train, Y_train = np.asarray(X_train, float), np.asarray(Y_train, float)
    X_test, Y_test = np.asarray(X_test, float), np.asarray(Y_test, float)
    out = np.full((k, Y_train.shape[1]), np.nan)
    for i in range(k):
        tr, te = labels_train == i, labels_test == i
        if tr.sum() == 0 or te.sum() < 2:
            continue
        A = np.hstack([X_train[tr], np.ones((tr.sum(), 1))])
        coef = np.linalg.lstsq(A, Y_train[tr], rcond=1e-12)[0]
        pred = np.hstack([X_test[te], np.ones((te.sum(), 1))]) @ coef
        for j in range(Y_train.shape[1]):
            resid = Y_test[te, j] - pred[:, j]
            dev = Y_test[te, j] - Y_test[te, j].mean()
            out[i, j] = 1.0 - (resid @ resid) / (dev @ dev) if dev @ dev > 0 else np.nan
    return out


@dataclass
class ElbowRow:
    k: int
    m: int
    avg_r2: float
    objective: float = float("nan")
    error: str | None = None


@dataclass
class ElbowTable:
    rows: list[ElbowRow] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("k,m,avg_r2\n")
        for r in self.rows:
            buf.write(f"{r.k},{r.m},{r.avg_r2:.17g}\n")
        return buf.getvalue()

    def value(self, k: int, m: int) -> float:
        for r in self.rows:
            if r.k == k and r.m == m:
                return r.avg_r2
        raise KeyError((k, m))


def elbow_table(X, Y, k_values, m_values, cfg) -> ElbowTable:
    """Average training R^2 of CLS components over a (k, m) grid.

    Infeasible grid points are kept as rows with ``avg_r2 = nan`` and an error message.
    """
    from .clustering import FitConfig, cls_cluster

    k_values, m_values = list(k_values), list(m_values)
    if not k_values or not m_values:
        raise ConfigError("k and m grids must be non-empty")
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    table = ElbowTable()
    for k in k_values:
        for m in m_values:
            point_cfg = FitConfig(**{**cfg.to_dict(), "k": int(k), "m": int(m)})
            try:
                res = cls_cluster(X, Y, point_cfg)
            except (ConfigError, InfeasibleError) as exc:
                table.rows.append(ElbowRow(int(k), int(m), float("nan"), error=str(exc)))
                continue
            r2 = cluster_component_r2(res.models, X, Y, res.labels)
            table.rows.append(ElbowRow(int(k), int(m), float(np.nanmean(r2)), res.objective))
    return table
