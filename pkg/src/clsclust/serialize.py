"""JSON encoding of fitted models and clustering results."""
from __future__ import annotations

import json

import numpy as np

from .cca import CcaComponents
from .cls import ClsComponents
from .clustering import ClusterResult, RegressionModel
from .errors import DataError
from .linalg import ColumnStats


def _stats_fields(x_stats: ColumnStats | None, y_stats: ColumnStats | None, d1: int, d2: int) -> dict:
    x_stats = x_stats or ColumnStats.identity(d1)
    y_stats = y_stats or ColumnStats.identity(d2)
    return {
        "x_means": x_stats.means.tolist(),
        "x_scales": x_stats.scales.tolist(),
        "y_means": y_stats.means.tolist(),
        "y_scales": y_stats.scales.tolist(),
    }


def model_to_dict(model, x_stats: ColumnStats | None = None, y_stats: ColumnStats | None = None) -> dict:
    if isinstance(model, ClsComponents):
        out = {
            "u": model.U.tolist(),
            "v": model.V.tolist(),
            "eigenvalues": model.eigenvalues.tolist(),
            "intercept": bool(model.intercept),
        }
        out.update(_stats_fields(x_stats, y_stats, model.d1, model.d2))
        return out
    if isinstance(model, CcaComponents):
        out = {
            "u": model.U.tolist(),
            "v": model.V.tolist(),
            "correlations": model.correlations.tolist(),
            "alphas": None if model.alphas is None else model.alphas.tolist(),
            "betas": None if model.betas is None else model.betas.tolist(),
            "intercept": True,
        }
        out.update(_stats_fields(x_stats, y_stats, model.U.shape[0], model.V.shape[0]))
        return out
    if isinstance(model, RegressionModel):
        d1 = len(model.coef) - int(model.intercept)
        out = {"coef": model.coef.tolist(), "intercept": bool(model.intercept)}
        out.update(_stats_fields(x_stats, y_stats, d1, 1))
        return out
    raise TypeError(f"cannot serialize {type(model).__name__}")


def cls_from_dict(d: dict) -> tuple[ClsComponents, ColumnStats, ColumnStats]:
    try:
        c = ClsComponents(
            np.asarray(d["u"], dtype=float),
            np.asarray(d["v"], dtype=float),
            np.asarray(d["eigenvalues"], dtype=float),
            bool(d["intercept"]),
        )
        xs = ColumnStats(np.asarray(d["x_means"], dtype=float), np.asarray(d["x_scales"], dtype=float))
        ys = ColumnStats(np.asarray(d["y_means"], dtype=float), np.asarray(d["y_scales"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed CLS model: {exc}") from None
    return c, xs, ys


def result_to_dict(res: ClusterResult, config: dict, x_stats=None, y_stats=None) -> dict:
    return {
        "method": res.method,
        "labels": [int(v) for v in res.labels],
        "models": [model_to_dict(m, x_stats, y_stats) for m in res.models],
        "objective": res.objective,
        "objective_trace": [float(v) for v in res.objective_trace],
        "converged": bool(res.converged),
        "iterations": int(res.iterations),
        "seed_used": int(res.seed_used),
        "restart_index": int(res.restart_index),
        "config": config,
    }


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"
