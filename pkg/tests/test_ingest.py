import math
from datetime import date, timedelta
from fractions import Fraction

import numpy as np
import pytest

from clsclust.errors import DataError
from clsclust.ingest import (
    FEATURES,
    ReturnSeries,
    beta,
    build_feature_views,
    compute_features,
    load_returns_csv,
    load_two_view_csv,
    window,
    write_two_view_csv,
)


def brute_features(r, idx, vol):
    """Loop-based moments in exact rational arithmetic where possible."""
    r = [Fraction(x) for x in r]
    idx = [Fraction(x) for x in idx]
    n = len(r)
    mu = sum(r) / n
    m2 = sum((x - mu) ** 2 for x in r) / n
    m3 = sum((x - mu) ** 3 for x in r) / n
    m4 = sum((x - mu) ** 4 for x in r) / n
    mi = sum(idx) / n
    cov = sum((a - mu) * (b - mi) for a, b in zip(r, idx)) / n
    var_i = sum((b - mi) ** 2 for b in idx) / n
    return {
        "mean": float(mu),
        "volatility": math.sqrt(m2),
        "skewness": float(m3) / float(m2) ** 1.5,
        "kurtosis": float(m4 / (m2 * m2)),
        "beta": float(cov / var_i),
        "volume": float(sum(Fraction(v) for v in vol)),
    }


def write(path, text):
    path.write_text(text)
    return path


class TestTwoViewCsv:
    def test_match_and_drop(self, tmp_path):
        x = write(tmp_path / "x.csv", "id,a,b\nr1,1,2\nr2,3,4\nr3,5,\nr4,7,8\n")
        y = write(tmp_path / "y.csv", "id,c\nr2,1\nr1,2\nr3,3\nr5,9\n")
        pair = load_two_view_csv(x, y)
        assert pair.keys == ["r1", "r2"]
        np.testing.assert_array_equal(pair.X, [[1, 2], [3, 4]])
        np.testing.assert_array_equal(pair.Y, [[2], [1]])
        assert pair.dropped == {"r3": "missing value", "r4": "missing from y", "r5": "missing from x"}
        assert pair.n_dropped == 3
        assert pair.x_columns == ["a", "b"] and pair.y_columns == ["c"]

    def test_duplicate_key(self, tmp_path):
        x = write(tmp_path / "x.csv", "id,a\nr1,1\nr1,2\n")
        y = write(tmp_path / "y.csv", "id,a\nr1,1\n")
        with pytest.raises(DataError):
            load_two_view_csv(x, y)

    def test_identifier_mismatch(self, tmp_path):
        x = write(tmp_path / "x.csv", "id,a\nr1,1\n")
        y = write(tmp_path / "y.csv", "key,a\nr1,1\n")
        with pytest.raises(DataError):
            load_two_view_csv(x, y)

    def test_non_numeric(self, tmp_path):
        x = write(tmp_path / "x.csv", "id,a\nr1,abc\n")
        y = write(tmp_path / "y.csv", "id,a\nr1,1\n")
        with pytest.raises(DataError):
            load_two_view_csv(x, y)

    def test_ragged_row(self, tmp_path):
        x = write(tmp_path / "x.csv", "id,a\nr1,1,2\n")
        y = write(tmp_path / "y.csv", "id,a\nr1,1\n")
        with pytest.raises(DataError):
            load_two_view_csv(x, y)

    def test_round_trip_exact(self, tmp_path, rng):
        M = rng.standard_normal((10, 3)) * 10.0 ** rng.integers(-8, 8, (10, 3))
        keys = [f"k{i}" for i in range(10)]
        write_two_view_csv(tmp_path / "m.csv", keys, M, ["a", "b", "c"])
        write_two_view_csv(tmp_path / "n.csv", keys, M[:, :1], ["d"])
        pair = load_two_view_csv(tmp_path / "m.csv", tmp_path / "n.csv")
        np.testing.assert_array_equal(pair.X, M)


class TestFeatures:
    def test_hand_example(self):
        r = [0.01, -0.02, 0.03, 0.00]
        idx = [0.02, -0.01, 0.01, 0.00]
        vol = [100.0, 200.0, 150.0, 50.0]
        got = compute_features(ReturnSeries("s", r, vol), ReturnSeries("i", idx))
        want = brute_features(r, idx, vol)
        for name in FEATURES:
            assert got[name] == pytest.approx(want[name], abs=1e-12), name
        assert got["mean"] == pytest.approx(0.005, abs=1e-15)
        assert got["volume"] == 500.0

    def test_random_series(self, rng):
        for _ in range(20):
            n = int(rng.integers(10, 200))
            idx = rng.normal(0, 0.01, n)
            r = 0.8 * idx + rng.normal(0, 0.02, n)
            vol = rng.integers(1, 10**6, n).astype(float)
            got = compute_features(ReturnSeries("s", r, vol), ReturnSeries("i", idx))
            want = brute_features(r, idx, vol)
            for name in FEATURES:
                assert got[name] == pytest.approx(want[name], rel=1e-12, abs=1e-12), name

    def test_beta_of_index_is_one(self, rng):
        idx = rng.normal(0, 0.01, 250)
        assert beta(idx, idx) == 1.0

    def test_beta_constant_index(self):
        assert math.isnan(beta([1.0, 2.0, 3.0], [0.5, 0.5, 0.5]))

    def test_symmetric_skew_zero(self):
        f = compute_features(ReturnSeries("s", [-0.02, -0.01, 0.0, 0.01, 0.02]), features=("skewness",))
        assert f["skewness"] == pytest.approx(0.0, abs=1e-15)

    def test_normal_kurtosis_near_three(self):
        r = np.random.default_rng(0).standard_normal(100_000)
        assert compute_features(ReturnSeries("s", r), features=("kurtosis",))["kurtosis"] == pytest.approx(3.0, abs=0.1)

    def test_errors(self):
        with pytest.raises(DataError):
            compute_features(ReturnSeries("s", [0.1, 0.2]))
        with pytest.raises(DataError):
            compute_features(ReturnSeries("s", [0.1, 0.2, 0.3]), features=("beta",))
        with pytest.raises(DataError):
            compute_features(ReturnSeries("s", [0.1, 0.2, 0.3]), features=("alpha",))


def era(rng, tickers, n, start, missing=()):
    dates = [start + timedelta(days=i) for i in range(n)]
    out = {}
    for t in tickers:
        r = rng.normal(0, 0.01, n)
        if t in missing:
            r[3] = np.nan
        out[t] = ReturnSeries(t, r, rng.integers(1, 1000, n).astype(float), dates)
    return out


class TestFeatureViews:
    def test_unit_variance_and_exclusion(self, rng):
        names = [f"T{i}" for i in range(8)]
        pre = era(rng, names, 60, date(2007, 1, 1), missing={"T3"})
        post = era(rng, names[:-1], 60, date(2009, 1, 1))
        ipre = ReturnSeries("IDX", rng.normal(0, 0.01, 60))
        ipost = ReturnSeries("IDX", rng.normal(0, 0.01, 60))
        pair = build_feature_views(pre, post, ipre, ipost)
        assert "T3" not in pair.keys and "T7" not in pair.keys
        assert set(pair.dropped) == {"T3", "T7"}
        assert pair.X.shape == (6, 6)
        np.testing.assert_allclose(pair.X.std(axis=0), 1.0, atol=1e-12)
        np.testing.assert_allclose(pair.Y.std(axis=0), 1.0, atol=1e-12)
        raw = compute_features(pre["T0"], ipre)
        np.testing.assert_allclose(pair.X[0] * pair.x_stats.scales, [raw[f] for f in FEATURES], rtol=1e-12)

    def test_two_features(self, rng):
        names = ["A", "B", "C"]
        pre = era(rng, names, 30, date(2007, 1, 1))
        post = era(rng, names, 30, date(2009, 1, 1))
        pair = build_feature_views(pre, post, None, None, features=("mean", "volatility"))
        assert pair.X.shape == (3, 2)


class TestReturnsCsv:
    def test_long_form_and_window(self, tmp_path):
        p = write(
            tmp_path / "r.csv",
            "date,ticker,return,volume\n"
            "2007-01-03,A,0.02,10\n2007-01-02,A,0.01,5\n2007-01-04,A,-0.01,7\n"
            "2007-01-02,B,0.00,1\n2007-01-03,B,,1\n2007-01-04,B,0.01,1\n",
        )
        s = load_returns_csv(p)
        np.testing.assert_array_equal(s["A"].returns, [0.01, 0.02, -0.01])
        assert np.isnan(s["B"].returns[1])
        w = window(s["A"], date(2007, 1, 3), date(2007, 1, 4))
        np.testing.assert_array_equal(w.returns, [0.02, -0.01])
        np.testing.assert_array_equal(w.volumes, [10, 7])

    def test_prices_to_log_returns(self, tmp_path):
        p = write(tmp_path / "p.csv", "date,ticker,price\n2007-01-01,A,100\n2007-01-02,A,110\n2007-01-03,A,99\n")
        s = load_returns_csv(p, prices=True)["A"]
        np.testing.assert_allclose(s.returns, [math.log(1.1), math.log(0.9)])
        assert s.dates == [date(2007, 1, 2), date(2007, 1, 3)]

    def test_bad_inputs(self, tmp_path):
        with pytest.raises(DataError):
            load_returns_csv(write(tmp_path / "a.csv", "date,ticker\n"))
        with pytest.raises(DataError):
            load_returns_csv(write(tmp_path / "b.csv", "date,ticker,return\nxx,A,0.1\n"))
        with pytest.raises(DataError):
            load_returns_csv(write(tmp_path / "c.csv", "date,ticker,return\n2007-01-01,A,0.1\n2007-01-01,A,0.2\n"))
