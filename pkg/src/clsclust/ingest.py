"""CSV loading and stock-return feature extraction.

Two file layouts are understood:

* two-view CSV: header row, first column is the row identifier, remaining
  columns numeric;
* returns CSV (long form): columns ``date, ticker, return, volume`` with
  ISO-8601 dates.  ``volume`` may be absent.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np

from .errors import DataError
from .linalg import ColumnStats, scale_unit_variance

FEATURES = ("mean", "volatility", "skewness", "kurtosis", "beta", "volume")
TWO_FEATURES = ("mean", "volatility")


@dataclass
class DataPair:
    keys: list[str]
    X: np.ndarray
    Y: np.ndarray
    x_columns: list[str]
    y_columns: list[str]
    dropped: dict[str, str] = field(default_factory=dict)  # key -> reason
    x_stats: ColumnStats | None = None
    y_stats: ColumnStats | None = None

    @property
    def n_dropped(self) -> int:
        return len(self.dropped)


@dataclass
class ReturnSeries:
    ticker: str
    returns: np.ndarray
    volumes: np.ndarray | None = None
    dates: list[date] | None = None

    def __post_init__(self):
        self.returns = np.asarray(self.returns, dtype=float)
        if self.volumes is not None:
            self.volumes = np.asarray(self.volumes, dtype=float)
            if self.volumes.shape != self.returns.shape:
                raise DataError(f"{self.ticker}: volumes and returns differ in length")


# -- two-view CSV ----------------------------------------------------------------

def _read_table(path) -> tuple[list[str], dict[str, list[str]], list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows: dict[str, list[str]] = {}
        order: list[str] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            key = row[0]
            if key in rows:
                raise DataError(f"{path}:{lineno}: duplicate key {key!r}")
            rows[key] = row[1:]
            order.append(key)
    return header, rows, order


def _parse_row(path, key: str, cells: list[str]) -> list[float] | None:
    """Floats for one row, or None when any cell is blank."""
    if any(c.strip() == "" for c in cells):
        return None
    try:
        values = [float(c) for c in cells]
    except ValueError:
        raise DataError(f"{path}: non-numeric cell in row {key!r}") from None
    if not all(math.isfinite(v) for v in values):
        return None
    return values


def load_two_view_csv(path_x, path_y) -> DataPair:
    """Rows matched by identifier.

    Rows missing from either file, or with a blank cell in either file, are
    dropped and listed in ``DataPair.dropped``.
    """
    hx, rx, order_x = _read_table(path_x)
    hy, ry, order_y = _read_table(path_y)
    if hx[0] != hy[0]:
        raise DataError(f"identifier columns differ: {hx[0]!r} vs {hy[0]!r}")
    keys, xs, ys, dropped = [], [], [], {}
    for key in order_x:
        if key not in ry:
            dropped[key] = "missing from y"
            continue
        x = _parse_row(path_x, key, rx[key])
        y = _parse_row(path_y, key, ry[key])
        if x is None or y is None:
            dropped[key] = "missing value"
            continue
        keys.append(key)
        xs.append(x)
        ys.append(y)
    for key in order_y:
        if key not in rx:
            dropped[key] = "missing from x"
    if not keys:
        raise DataError("no rows shared by both files")
    X = np.array(xs, dtype=float).reshape(len(keys), len(hx) - 1)
    Y = np.array(ys, dtype=float).reshape(len(keys), len(hy) - 1)
    return DataPair(keys, X, Y, hx[1:], hy[1:], dropped)


def write_two_view_csv(path, keys, M, columns, id_column: str = "id") -> None:
    """17 significant digits so values survive a round trip exactly."""
    M = np.asarray(M, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([id_column, *columns])
        for key, row in zip(keys, M):
            w.writerow([key, *(f"{v:.17g}" for v in row)])


# -- returns ---------------------------------------------------------------------

def load_returns_csv(path, prices: bool = False) -> dict[str, ReturnSeries]:
    """Long-form returns (or prices, converted to log returns) grouped by ticker, sorted by date.

    Tickers with any blank value are returned with NaNs so that callers can
    exclude them.
    """
    value_col = "price" if prices else "return"
    per: dict[str, list[tuple[date, float, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        missing = {"date", "ticker", value_col} - set(fields)
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")
        has_volume = "volume" in fields
        for lineno, row in enumerate(reader, start=2):
            try:
                d = date.fromisoformat(row["date"].strip())
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad date {row['date']!r}") from None
            val = _float_or_nan(path, lineno, row[value_col])
            vol = _float_or_nan(path, lineno, row["volume"]) if has_volume else float("nan")
            per.setdefault(row["ticker"], []).append((d, val, vol))
    out = {}
    for ticker, items in per.items():
        items.sort(key=lambda t: t[0])
        dates = [t[0] for t in items]
        if len(set(dates)) != len(dates):
            raise DataError(f"{path}: duplicate dates for {ticker}")
        vals = np.array([t[1] for t in items])
        vols = np.array([t[2] for t in items]) if has_volume else None
        if prices:
            with np.errstate(divide="ignore", invalid="ignore"):
                vals = np.diff(np.log(vals))
            dates = dates[1:]
            vols = vols[1:] if vols is not None else None
        out[ticker] = ReturnSeries(ticker, vals, vols, dates)
    return out


def _float_or_nan(path, lineno: int, cell: str | None) -> float:
    if cell is None or cell.strip() == "":
        return float("nan")
    try:
        return float(cell)
    except ValueError:
        raise DataError(f"{path}:{lineno}: non-numeric value {cell!r}") from None


def window(series: ReturnSeries, start: date | None, end: date | None) -> ReturnSeries:
    """Observations with ``start <= date <= end``."""
    if series.dates is None:
        raise DataError(f"{series.ticker}: series has no dates")
    keep = np.array([(start is None or d >= start) and (end is None or d <= end) for d in series.dates], dtype=bool)
    vols = series.volumes[keep] if series.volumes is not None else None
    return ReturnSeries(series.ticker, series.returns[keep], vols, [d for d, k in zip(series.dates, keep) if k])


# -- features --------------------------------------------------------------------

def compute_features(series: ReturnSeries, index: ReturnSeries | None = None, features=FEATURES) -> dict[str, float]:
    """Population moments of returns plus beta against ``index`` and total volume.

    skewness = m3 / m2^1.5 and kurtosis = m4 / m2^2 (raw, not excess).
    Undefined values (zero variance) come back as NaN.
    """
    r = series.returns
    if r.size < 3:
        raise DataError(f"{series.ticker}: need at least 3 observations, got {r.size}")
    if not np.all(np.isfinite(r)):
        raise DataError(f"{series.ticker}: non-finite returns")
    unknown = set(features) - set(FEATURES)
    if unknown:
        raise DataError(f"unknown features {sorted(unknown)}")
    mu = r.mean()
    d = r - mu
    m2 = np.mean(d**2)
    out: dict[str, float] = {}
    for name in features:
        if name == "mean":
            out[name] = float(mu)
        elif name == "volatility":
            out[name] = float(np.sqrt(m2))
        elif name == "skewness":
            out[name] = float(np.mean(d**3) / m2**1.5) if m2 > 0 else float("nan")
        elif name == "kurtosis":
            out[name] = float(np.mean(d**4) / m2**2) if m2 > 0 else float("nan")
        elif name == "beta":
            out[name] = beta(r, _require_index(series, index))
        elif name == "volume":
            if series.volumes is None:
                raise DataError(f"{series.ticker}: no volumes for the volume feature")
            out[name] = float(series.volumes.sum())
    return out


def _require_index(series: ReturnSeries, index: ReturnSeries | None) -> np.ndarray:
    if index is None:
        raise DataError("beta needs an index series")
    if index.returns.shape != series.returns.shape:
        raise DataError(f"{series.ticker}: {series.returns.size} returns but index has {index.returns.size}")
    return index.returns


def beta(r, r_index) -> float:
    """Cov(r, r_index) / Var(r_index); NaN when the index is constant."""
    r = np.asarray(r, dtype=float)
    x = np.asarray(r_index, dtype=float)
    dx = x - x.mean()
    var = dx @ dx
    if var <= 0:
        return float("nan")
    return float(dx @ (r - r.mean()) / var)


def feature_matrix(series_set: dict[str, ReturnSeries], index: ReturnSeries | None, features) -> tuple[list[str], np.ndarray, dict[str, str]]:
    """One row per usable ticker (sorted); tickers with missing data are excluded."""
    keys, rows, excluded = [], [], {}
    for ticker in sorted(series_set):
        s = series_set[ticker]
        if not np.all(np.isfinite(s.returns)) or (
            "volume" in features and (s.volumes is None or not np.all(np.isfinite(s.volumes)))
        ):
            excluded[ticker] = "missing data"
            continue
        if "beta" in features and index is not None and index.returns.size != s.returns.size:
            excluded[ticker] = "length differs from index"
            continue
        try:
            f = compute_features(s, index, features)
        except DataError as exc:
            excluded[ticker] = str(exc)
            continue
        if not all(math.isfinite(v) for v in f.values()):
            excluded[ticker] = "undefined feature"
            continue
        keys.append(ticker)
        rows.append([f[name] for name in features])
    return keys, np.array(rows, dtype=float).reshape(len(keys), len(features)), excluded


def build_feature_views(pre_era, post_era, index_pre, index_post, features=FEATURES) -> DataPair:
    """Pre-era features as ``X``, post-era features as ``Y``, each scaled to unit column variance.

    Only tickers usable in both eras are kept.  The unscaled matrices are
    recoverable as ``X * x_stats.scales``.
    """
    features = tuple(features)
    kx, Fx, ex = feature_matrix(pre_era, index_pre, features)
    ky, Fy, ey = feature_matrix(post_era, index_post, features)
    dropped = {t: f"pre: {r}" for t, r in ex.items()}
    dropped.update({t: f"post: {r}" for t, r in ey.items() if t not in dropped})
    common = sorted(set(kx) & set(ky))
    for t in sorted(set(kx) ^ set(ky)):
        dropped.setdefault(t, "absent from one era")
    if not common:
        raise DataError("no tickers usable in both eras")
    ix = [kx.index(t) for t in common]
    iy = [ky.index(t) for t in common]
    X, xs = scale_unit_variance(Fx[ix]) if len(common) >= 2 else (Fx[ix], ColumnStats.identity(len(features)))
    Y, ys = scale_unit_variance(Fy[iy]) if len(common) >= 2 else (Fy[iy], ColumnStats.identity(len(features)))
    return DataPair(common, X, Y, list(features), list(features), dropped, xs, ys)


def write_features_csv(path: str | Path, pair: DataPair, view: str) -> None:
    M = pair.X if view == "x" else pair.Y
    cols = pair.x_columns if view == "x" else pair.y_columns
    write_two_view_csv(path, pair.keys, M, cols, id_column="ticker")
