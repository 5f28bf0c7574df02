import csv
import json
from datetime import date, timedelta

import numpy as np
import pytest

from clsclust.cli import run


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def data_dir(tmp_path):
    d = tmp_path / "data"
    assert run(["--quiet", "--seed", "1", "--out-dir", str(d), "generate", "--n", "120", "--n-test", "80"]) == 0
    return d


def cluster_args(data_dir, out, method, *extra):
    return ["--quiet", "--out-dir", str(out), "cluster", method,
            "--x", str(data_dir / "train_x.csv"), "--y", str(data_dir / "train_y.csv"), "--n-init", "3", *extra]


class TestGenerate:
    def test_files(self, data_dir):
        for split, n in (("train", 120), ("test", 80)):
            for name in ("x", "y", "labels"):
                assert len(read_csv(data_dir / f"{split}_{name}.csv")) == n
        manifest = json.loads((data_dir / "generate_manifest.json").read_text())
        assert manifest["seed"] == 1
        assert manifest["config"]["n"] == 120
        assert set(manifest["outputs"]) == {f"{s}_{v}.csv" for s in ("train", "test") for v in ("x", "y", "labels")}

    def test_seeds_differ(self, tmp_path):
        run(["--quiet", "--seed", "1", "--out-dir", str(tmp_path / "a"), "generate", "--n", "20"])
        run(["--quiet", "--seed", "2", "--out-dir", str(tmp_path / "b"), "generate", "--n", "20"])
        assert (tmp_path / "a/train_x.csv").read_bytes() != (tmp_path / "b/train_x.csv").read_bytes()

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n": 15, "n_test": 5, "noise_sd": 0.0}))
        assert run(["--quiet", "--out-dir", str(tmp_path / "o"), "generate", "--config", str(cfg)]) == 0
        assert len(read_csv(tmp_path / "o/train_x.csv")) == 15

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"bogus": 1}))
        assert run(["--quiet", "--out-dir", str(tmp_path), "generate", "--config", str(cfg)]) == 2
        assert run(["--quiet", "--out-dir", str(tmp_path), "generate", "--noise-sd", "-1"]) == 2


class TestCluster:
    def test_cls_with_test_split(self, data_dir, tmp_path):
        out = tmp_path / "o"
        code = run(cluster_args(data_dir, out, "cls", "--test-x", str(data_dir / "test_x.csv"),
                                "--test-y", str(data_dir / "test_y.csv")))
        assert code == 0
        res = json.loads((out / "cls_result.json").read_text())
        assert res["converged"] is True
        assert res["manifest"] == "cluster_manifest.json"
        assert len(read_csv(out / "cls_labels.csv")) == 120
        assert len(read_csv(out / "cls_test_labels.csv")) == 80
        assert len(read_csv(out / "cls_test_r2.csv")) == 2

    @pytest.mark.parametrize("method", ["cca", "kmeans"])
    def test_other_methods(self, data_dir, tmp_path, method):
        out = tmp_path / method
        assert run(cluster_args(data_dir, out, method)) == 0
        labels = {r["label"] for r in read_csv(out / f"{method}_labels.csv")}
        assert labels <= {"0", "1"}

    def test_kmeans_four(self, data_dir, tmp_path):
        out = tmp_path / "km"
        assert run(cluster_args(data_dir, out, "kmeans", "--k", "4", "--view", "both")) == 0
        assert {r["label"] for r in read_csv(out / "kmeans_labels.csv")} == {"0", "1", "2", "3"}

    def test_clusterwise(self, data_dir, tmp_path):
        rows = read_csv(data_dir / "train_y.csv")
        y1 = tmp_path / "y1.csv"
        y1.write_text("id,y1\n" + "".join(f"{r['id']},{r['y1']}\n" for r in rows))
        out = tmp_path / "cw"
        args = ["--quiet", "--out-dir", str(out), "cluster", "clusterwise",
                "--x", str(data_dir / "train_x.csv"), "--y", str(y1), "--n-init", "2"]
        assert run(args) == 0
        assert json.loads((out / "clusterwise_result.json").read_text())["method"] == "clusterwise"
        # multi-column y is a configuration error
        assert run(cluster_args(data_dir, out, "clusterwise")) == 2

    def test_exit_codes(self, data_dir, tmp_path):
        assert run(cluster_args(data_dir, tmp_path, "cls", "--m", "5")) == 2
        assert run(cluster_args(data_dir, tmp_path, "cls", "--k", "50")) == 4
        bad = ["--quiet", "--out-dir", str(tmp_path), "cluster", "cls", "--x", str(tmp_path / "nope.csv"),
               "--y", str(data_dir / "train_y.csv")]
        assert run(bad) == 3
        with pytest.raises(SystemExit) as exc:
            run(["cluster", "nomethod", "--x", "a", "--y", "b"])
        assert exc.value.code == 2


class TestEvaluate:
    def write_labels(self, path, labels, column="label"):
        path.write_text(f"id,{column}\n" + "".join(f"r{i},{v}\n" for i, v in enumerate(labels)))
        return str(path)

    def test_scores(self, tmp_path, capsys):
        truth = self.write_labels(tmp_path / "t.csv", [0, 0, 1, 1], "corr_label")
        for pred, acc in (([0, 0, 1, 1], 1.0), ([1, 1, 0, 0], 1.0), ([0, 1, 1, 1], 0.75)):
            p = self.write_labels(tmp_path / "p.csv", pred)
            assert run(["evaluate", "--pred", p, "--truth", truth]) == 0
            assert json.loads(capsys.readouterr().out)["accuracy"] == acc

    def test_generated_truth(self, data_dir, tmp_path, capsys):
        out = tmp_path / "o"
        run(cluster_args(data_dir, out, "cls"))
        capsys.readouterr()
        assert run(["evaluate", "--pred", str(out / "cls_labels.csv"), "--truth", str(data_dir / "train_labels.csv")]) == 0
        assert 0.5 <= json.loads(capsys.readouterr().out)["accuracy"] <= 1.0

    def test_mismatch(self, tmp_path):
        a = self.write_labels(tmp_path / "a.csv", [0, 1])
        b = self.write_labels(tmp_path / "b.csv", [0, 1, 1], "corr_label")
        assert run(["--quiet", "evaluate", "--pred", a, "--truth", b]) == 3


class TestElbow:
    def test_grid(self, data_dir, tmp_path):
        out = tmp_path / "e"
        args = ["--quiet", "--out-dir", str(out), "elbow", "--x", str(data_dir / "train_x.csv"),
                "--y", str(data_dir / "train_y.csv"), "--k-values", "1,2", "--m-values", "1,2", "--n-init", "2"]
        assert run(args) == 0
        rows = read_csv(out / "elbow.csv")
        assert [(r["k"], r["m"]) for r in rows] == [("1", "1"), ("1", "2"), ("2", "1"), ("2", "2")]
        single = ["--quiet", "--out-dir", str(tmp_path / "s"), "elbow", "--x", str(data_dir / "train_x.csv"),
                  "--y", str(data_dir / "train_y.csv"), "--k-values", "1", "--m-values", "1"]
        assert run(single) == 0
        assert len(read_csv(tmp_path / "s/elbow.csv")) == 1


def returns_file(path, tickers, n, start, rng, index=None):
    lines = ["date,ticker,return,volume"]
    for t in tickers:
        r = index if (index is not None and t == "IDX") else rng.normal(0, 0.01, n)
        for i in range(n):
            lines.append(f"{start + timedelta(days=i)},{t},{float(r[i])!r},{int(rng.integers(1, 1000))}")
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestFeatures:
    def make(self, tmp_path):
        rng = np.random.default_rng(0)
        n = 40
        idx = rng.normal(0, 0.01, n)
        stocks = returns_file(tmp_path / "r.csv", ["A", "B", "C", "D", "IDX"], n, date(2007, 1, 1), rng, idx)
        index = returns_file(tmp_path / "i.csv", ["IDX"], n, date(2007, 1, 1), rng, idx)
        return stocks, index

    def test_six_features_and_index_beta(self, tmp_path):
        stocks, index = self.make(tmp_path)
        out = tmp_path / "f"
        args = ["--quiet", "--out-dir", str(out), "features", "--returns", stocks, "--index", index,
                "--pre-end", "2007-01-20", "--post-start", "2007-01-21"]
        assert run(args) == 0
        pre = read_csv(out / "features_pre.csv")
        assert [r["ticker"] for r in pre] == ["A", "B", "C", "D", "IDX"]
        assert len(pre[0]) == 7
        # columns share one scale factor, so scaled beta ratios equal raw beta ratios and IDX has raw beta 1
        betas = {r["ticker"]: float(r["beta"]) for r in pre}
        ret = {t: [] for t in ("A", "IDX")}
        for row in read_csv(stocks):
            if row["ticker"] in ret and row["date"] <= "2007-01-20":
                ret[row["ticker"]].append(float(row["return"]))
        a, i = np.array(ret["A"]), np.array(ret["IDX"])
        raw_a = np.mean((a - a.mean()) * (i - i.mean())) / np.var(i)
        assert betas["A"] / betas["IDX"] == pytest.approx(raw_a, rel=1e-12)
        assert (out / "exclusions.csv").read_text() == "ticker,reason\n"

    def test_two_features(self, tmp_path):
        stocks, _ = self.make(tmp_path)
        out = tmp_path / "f2"
        args = ["--quiet", "--out-dir", str(out), "features", "--returns", stocks, "--feature-set", "two",
                "--pre-end", "2007-01-20", "--post-start", "2007-01-21"]
        assert run(args) == 0
        assert list(read_csv(out / "features_post.csv")[0]) == ["ticker", "mean", "volatility"]

    def test_beta_needs_index(self, tmp_path):
        stocks, _ = self.make(tmp_path)
        args = ["--quiet", "--out-dir", str(tmp_path), "features", "--returns", stocks,
                "--pre-end", "2007-01-20", "--post-start", "2007-01-21"]
        assert run(args) == 2


class TestDeterminism:
    def test_byte_identical_reruns(self, tmp_path):
        def snapshot(d):
            return {p.name: p.read_bytes() for p in sorted(d.iterdir())}

        for _ in range(2):
            d = tmp_path / "gen"
            run(["--quiet", "--seed", "3", "--out-dir", str(d), "generate", "--n", "60", "--n-test", "10"])
            first = snapshot(d)
            run(["--quiet", "--seed", "3", "--out-dir", str(d), "generate", "--n", "60", "--n-test", "10"])
            assert snapshot(d) == first
        out = tmp_path / "c"
        args = cluster_args(tmp_path / "gen", out, "cca")
        run(args)
        first = snapshot(out)
        run(args)
        assert snapshot(out) == first

    def test_replay(self, data_dir, tmp_path):
        out = tmp_path / "o"
        run(cluster_args(data_dir, out, "cls"))
        first = (out / "cls_labels.csv").read_bytes()
        (out / "cls_labels.csv").unlink()
        assert run(["--replay", str(out / "cluster_manifest.json")]) == 0
        assert (out / "cls_labels.csv").read_bytes() == first

    def test_timing_only_when_asked(self, tmp_path):
        run(["--quiet", "--record-timing", "--out-dir", str(tmp_path), "generate", "--n", "10"])
        assert "elapsed_seconds" in json.loads((tmp_path / "generate_manifest.json").read_text())
