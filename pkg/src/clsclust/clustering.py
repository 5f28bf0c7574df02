"""Alternating-optimization clusterers: CLS clustering, CCA clustering,
cluster-wise linear regression and k-means.

Every clusterer alternates a model-fitting step with a labeling step.  The
objective is recorded after each half-step in ``ClusterResult.objective_trace``.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .cca import CcaComponents, cca_weighted_errors, fit_canonical_regressions, fit_cca
from .cls import ClsComponents, augment, cls_point_errors, fit_cls
from .errors import ConfigError, DataError, InfeasibleError
from .linalg import as_matrix

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1


@dataclass
class FitConfig:
    k: int = 2
    m: int = 1
    intercept: bool = False
    max_iter: int = 100
    objective_tol: float = 1e-8
    n_init: int = 10
    seed: int = 0
    min_cluster_size: int | None = None  # None -> max(d1, d2) + 1

    def validate(self, d1: int | None = None, d2: int | None = None) -> None:
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if self.n_init < 1:
            raise ConfigError("n_init must be at least 1")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if self.objective_tol < 0:
            raise ConfigError("objective_tol must be non-negative")
        if self.m < 1 or (d1 is not None and d2 is not None and self.m > min(d1, d2)):
            raise ConfigError(f"m must be in [1, min(d1, d2)], got {self.m}")
        if self.min_cluster_size is not None and self.min_cluster_size < 1:
            raise ConfigError("min_cluster_size must be at least 1")

    def cluster_size(self, d1: int, d2: int) -> int:
        if self.min_cluster_size is None:
            return max(d1, d2) + 1
        return self.min_cluster_size

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ClusterResult:
    labels: np.ndarray
    models: list
    objective_trace: list[float]
    converged: bool
    iterations: int
    seed_used: int
    method: str = "cls"
    restart_index: int = 0
    label_history: list[np.ndarray] = field(default_factory=list, repr=False)
    best_objective: float | None = None  # set when the returned labels are not the last ones visited

    @property
    def objective(self) -> float:
        if self.best_objective is not None:
            return self.best_objective
        return self.objective_trace[-1] if self.objective_trace else float("nan")

    @property
    def k(self) -> int:
        return len(self.models)


# -- seeding -------------------------------------------------------------------

def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Seed for restart ``index``: one splitmix64 step from ``seed + index * golden``.

    Fixed-stride derivation so the sequence is reproducible in any language.
    """
    return splitmix64((seed + index * 0x9E3779B97F4A7C15) & MASK64)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


# -- shared pieces ---------------------------------------------------------------

def random_labels(n: int, k: int, min_size: int, rng: np.random.Generator, max_tries: int = 1000) -> np.ndarray:
    """Uniform random labels, resampled until every cluster has ``min_size`` rows."""
    if n < k * min_size:
        raise InfeasibleError(f"{n} rows cannot fill {k} clusters of at least {min_size}")
    for _ in range(max_tries):
        labels = rng.integers(0, k, size=n)
        if np.bincount(labels, minlength=k).min() >= min_size:
            return labels
    # rejection is hopeless when n is close to k * min_size; seat the quota first, then draw the rest
    labels = np.empty(n, dtype=np.int64)
    order = rng.permutation(n)
    quota = k * min_size
    labels[order[:quota]] = np.arange(quota) % k
    labels[order[quota:]] = rng.integers(0, k, size=n - quota)
    return labels


def assign(errors: np.ndarray, min_size: int = 1) -> np.ndarray:
    """Labels minimizing total error, each cluster keeping at least ``min_size`` rows.

    Plain argmin (lowest index on ties) when it already satisfies the size
    constraint.  Otherwise the exact constrained minimum, found as a
    transportation LP whose vertex solutions are integral.
    """
    n, k = errors.shape
    labels = np.argmin(errors, axis=1)
    if k == 1 or np.bincount(labels, minlength=k).min() >= min_size:
        return labels
    # z[l, i] flattened row-major; each row sums to 1, each column to >= min_size
    rows = np.repeat(np.arange(n), k)
    one_each = sparse.csr_matrix((np.ones(n * k), (rows, np.arange(n * k))), shape=(n, n * k))
    per_cluster = sparse.csr_matrix((-np.ones(n * k), (np.tile(np.arange(k), n), np.arange(n * k))), shape=(k, n * k))
    res = linprog(
        errors.ravel(),
        A_ub=per_cluster,
        b_ub=-np.full(k, float(min_size)),
        A_eq=one_each,
        b_eq=np.ones(n),
        bounds=(0, 1),
        method="highs-ds",
    )
    if res.status != 0:
        raise InfeasibleError(f"size-constrained assignment failed: {res.message}")
    return np.argmax(res.x.reshape(n, k), axis=1)


def _relative_change(old: float, new: float) -> float:
    return abs(old - new) / max(abs(old), np.finfo(float).tiny)


def _prepare(X, Y, cfg: FitConfig) -> tuple[np.ndarray, np.ndarray, int]:
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise DataError(f"row mismatch: X has {X.shape[0]}, Y has {Y.shape[0]}")
    d1, d2 = X.shape[1], Y.shape[1]
    cfg.validate(d1, d2)
    min_size = cfg.cluster_size(d1, d2)
    if min_size < d1 + int(cfg.intercept) or min_size < cfg.m:
        raise ConfigError(f"min_cluster_size {min_size} is too small for {d1 + int(cfg.intercept)} regressors")
    if X.shape[0] < cfg.k * min_size:
        raise InfeasibleError(f"{X.shape[0]} rows cannot fill {cfg.k} clusters of at least {min_size}")
    return X, Y, min_size


def _alternate(
    fit_step: Callable[[np.ndarray], list],
    error_step: Callable[[list], np.ndarray],
    labels: np.ndarray,
    cfg: FitConfig,
    min_size: int,
    seed: int,
    method: str,
) -> ClusterResult:
    """Generic monotone alternation: refit, relabel, stop at a fixed point."""
    n = len(labels)
    rows = np.arange(n)
    trace: list[float] = []
    history = [labels.copy()]
    converged = False
    it = 0
    models = fit_step(labels)
    errors = error_step(models)
    trace.append(float(errors[rows, labels].sum()))
    for it in range(1, cfg.max_iter + 1):
        new = assign(errors, min_size)
        trace.append(float(errors[rows, new].sum()))
        if np.array_equal(new, labels):
            converged = True
            break
        labels = new
        history.append(labels.copy())
        models = fit_step(labels)
        errors = error_step(models)
        trace.append(float(errors[rows, labels].sum()))
        if _relative_change(trace[-3], trace[-1]) < cfg.objective_tol:
            converged = True
            break
    return ClusterResult(labels, models, trace, converged, it, seed, method, label_history=history)


# -- CLS clustering --------------------------------------------------------------

def cls_label_step(models: list[ClsComponents], X, Y) -> np.ndarray:
    ms = {(c.m, c.intercept) for c in models}
    if len(ms) != 1:
        raise ConfigError("all models must share m and the intercept flag")
    return np.argmin(_cls_errors(models, as_matrix(X), as_matrix(Y)), axis=1)


def _cls_errors(models: list[ClsComponents], X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return np.column_stack([cls_point_errors(c, X, Y) for c in models])


def cls_cluster_once(X, Y, cfg: FitConfig, seed: int, init_labels: np.ndarray | None = None) -> ClusterResult:
    X, Y, min_size = _prepare(X, Y, cfg)
    labels = init_labels if init_labels is not None else random_labels(len(X), cfg.k, min_size, make_rng(seed))

    def fit_step(lab):
        return [fit_cls(X[lab == i], Y[lab == i], cfg.m, cfg.intercept)[0] for i in range(cfg.k)]

    res = _alternate(fit_step, lambda ms: _cls_errors(ms, X, Y), labels, cfg, min_size, seed, "cls")
    if cfg.m > 1 and np.any(np.diff(res.objective_trace) > 1e-9 * max(1.0, res.objective_trace[0])):
        log.info("non-monotone objective trace with m=%d (greedy components)", cfg.m)
    return res


def cls_cluster(X, Y, cfg: FitConfig) -> ClusterResult:
    X, Y, _ = _prepare(X, Y, cfg)
    return multi_restart(lambda seed: cls_cluster_once(X, Y, cfg, seed), cfg)


# -- CCA clustering --------------------------------------------------------------

def _cca_fit(X: np.ndarray, Y: np.ndarray, m: int) -> CcaComponents:
    return fit_canonical_regressions(fit_cca(X, Y, m), X, Y)


def cca_cluster_once(X, Y, cfg: FitConfig, seed: int, init_labels: np.ndarray | None = None) -> ClusterResult:
    """CCA clustering from one initialization.

    Convergence is not guaranteed, so the labeling with the lowest weighted
    prediction error seen at any labeling step is returned.  The loop stops
    early when a previously visited labeling recurs, since the deterministic
    iteration would then cycle.
    """
    X, Y, min_size = _prepare(X, Y, cfg)
    if min_size <= max(X.shape[1], Y.shape[1]):
        raise ConfigError("CCA clustering needs min_cluster_size > max(d1, d2)")
    n, rows = len(X), np.arange(len(X))
    labels = init_labels if init_labels is not None else random_labels(n, cfg.k, min_size, make_rng(seed))

    def fit_step(lab):
        return [_cca_fit(X[lab == i], Y[lab == i], cfg.m) for i in range(cfg.k)]

    def error_step(models):
        return np.column_stack([cca_weighted_errors(c, X, Y) for c in models])

    trace: list[float] = []
    history = [labels.copy()]
    seen = {labels.tobytes()}
    best_labels, best_obj = labels, np.inf
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        errors = error_step(fit_step(labels))
        trace.append(float(errors[rows, labels].sum()))
        new = assign(errors, min_size)
        obj = float(errors[rows, new].sum())
        trace.append(obj)
        if obj < best_obj:
            best_labels, best_obj = new, obj
        if np.array_equal(new, labels):
            converged = True
            break
        labels = new
        history.append(labels.copy())
        key = labels.tobytes()
        if key in seen:
            log.info("CCA clustering entered a cycle after %d iterations", it)
            break
        seen.add(key)
    models = fit_step(best_labels)
    return ClusterResult(best_labels, models, trace, converged, it, seed, "cca", label_history=history, best_objective=best_obj)


def cca_cluster(X, Y, cfg: FitConfig) -> ClusterResult:
    X, Y, _ = _prepare(X, Y, cfg)
    return multi_restart(lambda seed: cca_cluster_once(X, Y, cfg, seed), cfg)


# -- cluster-wise linear regression ----------------------------------------------

@dataclass
class RegressionModel:
    coef: np.ndarray  # (d1 [+1],), intercept last when enabled
    intercept: bool = False


def clusterwise_regression_once(X, y, cfg: FitConfig, seed: int, init_labels: np.ndarray | None = None) -> ClusterResult:
    y = as_matrix(y, "y")
    if y.shape[1] != 1:
        raise ConfigError("cluster-wise regression needs a single response column")
    X, y, min_size = _prepare(X, y, cfg)
    Xa = augment(X, cfg.intercept)
    labels = init_labels if init_labels is not None else random_labels(len(X), cfg.k, min_size, make_rng(seed))

    def fit_step(lab):
        return [
            RegressionModel(np.linalg.lstsq(Xa[lab == i], y[lab == i, 0], rcond=1e-12)[0], cfg.intercept)
            for i in range(cfg.k)
        ]

    def error_step(models):
        return np.column_stack([(y[:, 0] - Xa @ r.coef) ** 2 for r in models])

    return _alternate(fit_step, error_step, labels, cfg, min_size, seed, "clusterwise")


def clusterwise_regression(X, y, k: int | None = None, cfg: FitConfig | None = None) -> ClusterResult:
    cfg = cfg or FitConfig()
    if k is not None and k != cfg.k:
        cfg = FitConfig(**{**cfg.to_dict(), "k": k})
    cfg = FitConfig(**{**cfg.to_dict(), "m": 1})
    return multi_restart(lambda seed: clusterwise_regression_once(X, y, cfg, seed), cfg)


# -- restarts --------------------------------------------------------------------

def multi_restart(
    problem: Callable[[int], ClusterResult],
    cfg: FitConfig,
    key: Callable[[ClusterResult], float] | None = None,
) -> ClusterResult:
    """Run ``cfg.n_init`` independently seeded fits and keep the lowest objective.

    ``problem`` maps a derived seed to a result.  Ties go to the lowest restart
    index.  Restarts that raise ``InfeasibleError`` are skipped.
    """
    if cfg.n_init < 1:
        raise ConfigError("n_init must be at least 1")
    key = key or (lambda r: r.objective)
    best, best_val, failures = None, np.inf, []
    for i in range(cfg.n_init):
        seed = derive_seed(cfg.seed, i)
        try:
            res = problem(seed)
        except InfeasibleError as exc:
            failures.append(exc)
            continue
        res.restart_index = i
        val = key(res)
        if best is None or val < best_val:
            best, best_val = res, val
    if best is None:
        raise InfeasibleError(f"all {cfg.n_init} restarts failed: {failures[-1]}")
    return best


# -- k-means ---------------------------------------------------------------------

@dataclass
class KMeansFit:
    labels: np.ndarray
    centers: np.ndarray
    inertia_trace: list[float]

    @property
    def inertia(self) -> float:
        return self.inertia_trace[-1]


def _sq_dists(M: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((M[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def kmeans_once(M, k: int, rng: np.random.Generator, max_iter: int = 100) -> KMeansFit:
    """Lloyd iterations from ``k`` distinct random rows.

    An emptied cluster is reseeded with the row farthest from its current center.
    """
    M = as_matrix(M)
    n = len(M)
    if k > n:
        raise InfeasibleError(f"k={k} exceeds the number of rows {n}")
    centers = M[rng.choice(n, size=k, replace=False)].copy()
    labels = np.full(n, -1)
    trace: list[float] = []
    for _ in range(max_iter):
        d = _sq_dists(M, centers)
        new = np.argmin(d, axis=1)
        for i in range(k):
            if not np.any(new == i):
                far = int(np.argmax(d[np.arange(n), new]))
                new[far] = i
                d[far, i] = 0.0
        trace.append(float(_sq_dists(M, centers)[np.arange(n), new].sum()))
        if np.array_equal(new, labels):
            break
        labels = new
        centers = np.array([M[labels == i].mean(axis=0) for i in range(k)])
        trace.append(float(((M - centers[labels]) ** 2).sum()))
    return KMeansFit(labels, centers, trace)


def kmeans_fit(M, k: int, cfg: FitConfig | None = None) -> KMeansFit:
    cfg = cfg or FitConfig(k=k)
    best = None
    for i in range(cfg.n_init):
        fit = kmeans_once(M, k, make_rng(derive_seed(cfg.seed, i)), cfg.max_iter)
        if best is None or fit.inertia < best.inertia:
            best = fit
    return best


def kmeans(M, k: int, cfg: FitConfig | None = None) -> np.ndarray:
    return kmeans_fit(M, k, cfg).labels


def kmeans_predict(centers: np.ndarray, M) -> np.ndarray:
    return np.argmin(_sq_dists(as_matrix(M), centers), axis=1)
