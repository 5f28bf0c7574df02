"""Command-line interface.

Subcommands: generate, cluster, evaluate, elbow, features.  Every command
that writes files also writes ``<command>_manifest.json`` listing its
configuration, input digests and output digests.  ``--replay MANIFEST``
re-runs the recorded command line.

Exit status: 0 success, 2 invalid configuration, 3 data error, 4 infeasible problem.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from datetime import date
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import (
    FitConfig,
    cca_cluster,
    cls_cluster,
    cls_label_step,
    clusterwise_regression,
    kmeans_fit,
)
from .datagen import SynthConfig, generate_train_test
from .errors import ConfigError, DataError, InfeasibleError
from .ingest import (
    FEATURES,
    TWO_FEATURES,
    build_feature_views,
    load_returns_csv,
    load_two_view_csv,
    window,
    write_features_csv,
    write_two_view_csv,
)
from .linalg import standardize
from .metrics import cluster_component_r2, elbow_table, label_agreement
from .serialize import dumps, result_to_dict

log = logging.getLogger("clsclust")

EXIT_CONFIG, EXIT_DATA, EXIT_INFEASIBLE = 2, 3, 4


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Collects outputs of one command and writes its manifest."""

    def __init__(self, args, argv: list[str]):
        self.args = args
        self.argv = argv
        self.out_dir = Path(args.out_dir)
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}
        self.config: dict = {}
        self.started = time.perf_counter()
        self.manifest_name = f"{args.command}_manifest.json"

    def add_input(self, path) -> Path:
        path = Path(path)
        if not path.is_file():
            raise DataError(f"no such file: {path}")
        self.inputs[str(path)] = sha256(path)
        return path

    def path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / name

    def wrote(self, path: Path) -> None:
        self.outputs[path.name] = sha256(path)

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.write_text(text, encoding="utf-8")
        self.wrote(p)
        return p

    def finish(self) -> Path:
        manifest = {
            "command": self.args.command,
            "argv": self.argv,
            "config": self.config,
            "seed": self.args.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "version": __version__,
        }
        if self.args.record_timing:
            manifest["elapsed_seconds"] = time.perf_counter() - self.started
        p = self.path(self.manifest_name)
        p.write_text(dumps(manifest), encoding="utf-8")
        log.info("wrote %d files to %s", len(self.outputs) + 1, self.out_dir)
        return p


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _iso(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an ISO date, got {text!r}") from None


def _fit_config(args) -> FitConfig:
    return FitConfig(
        k=args.k,
        m=args.m,
        intercept=args.intercept,
        max_iter=args.max_iter,
        objective_tol=args.objective_tol,
        n_init=args.n_init,
        seed=args.seed,
        min_cluster_size=args.min_cluster_size,
    )


def _add_fit_flags(p: argparse.ArgumentParser, with_k: bool = True) -> None:
    if with_k:
        p.add_argument("--k", type=int, default=2, help="number of clusters")
        p.add_argument("--m", type=int, default=1, help="number of components")
    p.add_argument("--intercept", action="store_true", help="augment X with a column of ones")
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--objective-tol", type=float, default=1e-8)
    p.add_argument("--n-init", type=int, default=10, help="random restarts")
    p.add_argument("--min-cluster-size", type=int, default=None)
    p.add_argument("--no-scale", action="store_true", help="center only; skip unit-variance scaling")


def _write_labels(path: Path, keys, labels, column: str = "label") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", column])
        for key, lab in zip(keys, labels):
            w.writerow([key, int(lab)])


def _read_label_column(path, column: str) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or column not in reader.fieldnames:
            raise DataError(f"{path}: no column {column!r}")
        keys, vals = [], []
        for row in reader:
            keys.append(row[reader.fieldnames[0]])
            try:
                vals.append(int(row[column]))
            except ValueError:
                raise DataError(f"{path}: non-integer label {row[column]!r}") from None
    return keys, np.array(vals, dtype=int)


# -- commands --------------------------------------------------------------------

def cmd_generate(args, run: Run) -> None:
    base = SynthConfig()
    if args.config:
        try:
            base = SynthConfig(**json.loads(run.add_input(args.config).read_text()))
        except (TypeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"bad config file: {exc}") from None
    fields = base.to_dict()
    for name in ("n", "n_test", "noise_sd", "map_prob", "noise_on"):
        value = getattr(args, name)
        if value is not None:
            fields[name] = value
    fields["seed"] = args.seed
    cfg = SynthConfig(**fields)
    train, test = generate_train_test(cfg)
    run.config = cfg.to_dict()
    for split, ds in (("train", train), ("test", test)):
        keys = [f"{split}{i}" for i in range(len(ds))]
        for view, M in (("x", ds.X), ("y", ds.Y)):
            p = run.path(f"{split}_{view}.csv")
            write_two_view_csv(p, keys, M, [f"{view}{j + 1}" for j in range(M.shape[1])])
            run.wrote(p)
        p = run.path(f"{split}_labels.csv")
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "spatial_label", "corr_label"])
            for key, s, c in zip(keys, ds.spatial_labels, ds.corr_labels):
                w.writerow([key, int(s), int(c)])
        run.wrote(p)


def cmd_cluster(args, run: Run) -> None:
    pair = load_two_view_csv(run.add_input(args.x), run.add_input(args.y))
    if pair.n_dropped:
        log.warning("dropped %d rows with missing data", pair.n_dropped)
    cfg = _fit_config(args)
    run.config = {"method": args.method, "scale": not args.no_scale, **cfg.to_dict()}
    X, xs = standardize(pair.X, scale=not args.no_scale)
    Y, ys = standardize(pair.Y, scale=not args.no_scale)
    name = args.method

    if args.method == "kmeans":
        M = {"x": X, "y": Y, "both": np.hstack([X, Y])}[args.view]
        run.config["view"] = args.view
        if len(M) < cfg.k:
            raise InfeasibleError(f"k={cfg.k} exceeds the number of rows {len(M)}")
        fit = kmeans_fit(M, cfg.k, cfg)
        payload = {
            "method": "kmeans",
            "labels": [int(v) for v in fit.labels],
            "centers": fit.centers.tolist(),
            "objective": fit.inertia,
            "objective_trace": fit.inertia_trace,
            "config": run.config,
        }
        labels = fit.labels
    else:
        if args.method == "cls":
            res = cls_cluster(X, Y, cfg)
        elif args.method == "cca":
            res = cca_cluster(X, Y, cfg)
        else:
            if Y.shape[1] != 1:
                raise ConfigError("clusterwise needs a single-column y file")
            res = clusterwise_regression(X, Y, cfg.k, cfg)
        payload = result_to_dict(res, run.config, xs, ys)
        labels = res.labels
        if not res.converged:
            log.warning("%s clustering did not converge in %d iterations", args.method, res.iterations)
        if args.method == "cls" and args.test_x and args.test_y:
            test = load_two_view_csv(run.add_input(args.test_x), run.add_input(args.test_y))
            Xt, Yt = xs.apply(test.X), ys.apply(test.Y)
            test_labels = cls_label_step(res.models, Xt, Yt)
            p = run.path(f"{name}_test_labels.csv")
            _write_labels(p, test.keys, test_labels)
            run.wrote(p)
            r2 = cluster_component_r2(res.models, Xt, Yt, test_labels)
            lines = ["cluster,component,r2"]
            lines += [f"{i},{j},{r2[i, j]:.17g}" for i in range(r2.shape[0]) for j in range(r2.shape[1])]
            run.write_text(f"{name}_test_r2.csv", "\n".join(lines) + "\n")

    payload["manifest"] = run.manifest_name
    run.write_text(f"{name}_result.json", dumps(payload))
    p = run.path(f"{name}_labels.csv")
    _write_labels(p, pair.keys, labels)
    run.wrote(p)


def cmd_evaluate(args, run: Run | None) -> dict:
    kp, pred = _read_label_column(args.pred, args.pred_column)
    kt, truth = _read_label_column(args.truth, args.truth_column)
    if len(pred) != len(truth):
        raise DataError(f"label files differ in length: {len(pred)} vs {len(truth)}")
    if kp != kt:
        raise DataError("label files list different identifiers")
    k = args.k if args.k is not None else int(max(pred.max(), truth.max())) + 1
    score = label_agreement(truth, pred, k)
    print(json.dumps(score.to_dict()))
    return score.to_dict()


def cmd_elbow(args, run: Run) -> None:
    pair = load_two_view_csv(run.add_input(args.x), run.add_input(args.y))
    X, _ = standardize(pair.X, scale=not args.no_scale)
    Y, _ = standardize(pair.Y, scale=not args.no_scale)
    cfg = FitConfig(
        k=1, m=1, intercept=args.intercept, max_iter=args.max_iter, objective_tol=args.objective_tol,
        n_init=args.n_init, seed=args.seed, min_cluster_size=args.min_cluster_size,
    )
    run.config = {"k_values": args.k_values, "m_values": args.m_values, "scale": not args.no_scale, **cfg.to_dict()}
    table = elbow_table(X, Y, args.k_values, args.m_values, cfg)
    for row in table.rows:
        if row.error:
            log.warning("k=%d m=%d skipped: %s", row.k, row.m, row.error)
    run.write_text("elbow.csv", table.to_csv())


def cmd_features(args, run: Run) -> None:
    if args.features:
        features = tuple(f.strip() for f in args.features.split(",") if f.strip())
    else:
        features = TWO_FEATURES if args.feature_set == "two" else FEATURES
    unknown = set(features) - set(FEATURES)
    if unknown:
        raise ConfigError(f"unknown features {sorted(unknown)}; choose from {list(FEATURES)}")
    stocks = load_returns_csv(run.add_input(args.returns), prices=args.prices)
    index_all = load_returns_csv(run.add_input(args.index), prices=args.prices) if args.index else {}
    if "beta" in features and not index_all:
        raise ConfigError("the beta feature needs --index")
    if len(index_all) > 1 and not args.index_ticker:
        raise ConfigError("index file holds several tickers; pick one with --index-ticker")
    index = index_all.get(args.index_ticker) if args.index_ticker else next(iter(index_all.values()), None)
    if index_all and index is None:
        raise DataError(f"ticker {args.index_ticker!r} not in index file")

    pre = {t: window(s, args.pre_start, args.pre_end) for t, s in stocks.items()}
    post = {t: window(s, args.post_start, args.post_end) for t, s in stocks.items()}
    idx_pre = window(index, args.pre_start, args.pre_end) if index else None
    idx_post = window(index, args.post_start, args.post_end) if index else None
    pair = build_feature_views(pre, post, idx_pre, idx_post, features)
    run.config = {
        "features": list(features),
        "prices": args.prices,
        "pre": [str(args.pre_start), str(args.pre_end)],
        "post": [str(args.post_start), str(args.post_end)],
    }
    for view, name in (("x", "features_pre.csv"), ("y", "features_post.csv")):
        p = run.path(name)
        write_features_csv(p, pair, view)
        run.wrote(p)
    lines = ["ticker,reason"] + [f"{t},{r.replace(',', ';')}" for t, r in sorted(pair.dropped.items())]
    run.write_text("exclusions.csv", "\n".join(lines) + "\n")
    log.info("%d tickers kept, %d excluded", len(pair.keys), pair.n_dropped)


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clsclust", description="Canonical Least Squares clustering toolkit")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--out-dir", default=".", help="directory for output files")
    p.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    p.add_argument("--record-timing", action="store_true", help="store elapsed time in the manifest")
    p.add_argument("--replay", metavar="MANIFEST", help="re-run the command recorded in a manifest")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command")

    g = sub.add_parser("generate", help="write synthetic train/test two-view data")
    g.add_argument("--config", help="JSON file with generator settings")
    g.add_argument("--n", type=int, default=None, help="training rows (default 500)")
    g.add_argument("--n-test", type=int, default=None, help="test rows (default 500)")
    g.add_argument("--noise-sd", type=float, default=None)
    g.add_argument("--map-prob", type=float, default=None)
    g.add_argument("--noise-on", choices=["output", "input"], default=None)

    c = sub.add_parser("cluster", help="cluster two-view data")
    c.add_argument("method", choices=["cls", "cca", "kmeans", "clusterwise"])
    c.add_argument("--x", required=True, help="two-view CSV for the X view")
    c.add_argument("--y", required=True, help="two-view CSV for the Y view")
    c.add_argument("--test-x", help="held-out X rows (cls only)")
    c.add_argument("--test-y", help="held-out Y rows (cls only)")
    c.add_argument("--view", choices=["x", "y", "both"], default="x", help="view used by kmeans")
    _add_fit_flags(c)

    e = sub.add_parser("evaluate", help="compare predicted and true labels")
    e.add_argument("--pred", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--k", type=int, default=None)
    e.add_argument("--pred-column", default="label")
    e.add_argument("--truth-column", default="corr_label")

    el = sub.add_parser("elbow", help="average R^2 over a (k, m) grid")
    el.add_argument("--x", required=True)
    el.add_argument("--y", required=True)
    el.add_argument("--k-values", type=_int_list, required=True, help="e.g. 1,2,3,4")
    el.add_argument("--m-values", type=_int_list, required=True, help="e.g. 1,2")
    _add_fit_flags(el, with_k=False)

    f = sub.add_parser("features", help="extract pre/post-era stock features")
    f.add_argument("--returns", required=True, help="long-form CSV: date,ticker,return[,volume]")
    f.add_argument("--index", help="index series in the same format")
    f.add_argument("--index-ticker")
    f.add_argument("--prices", action="store_true", help="files hold a 'price' column; use log differences")
    f.add_argument("--feature-set", choices=["two", "six"], default="six")
    f.add_argument("--features", help=f"comma-separated subset of {','.join(FEATURES)}")
    f.add_argument("--pre-start", type=_iso)
    f.add_argument("--pre-end", type=_iso, required=True)
    f.add_argument("--post-start", type=_iso, required=True)
    f.add_argument("--post-end", type=_iso)
    return p


COMMANDS = {
    "generate": cmd_generate,
    "cluster": cmd_cluster,
    "elbow": cmd_elbow,
    "features": cmd_features,
}


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.replay:
        try:
            recorded = json.loads(Path(args.replay).read_text())["argv"]
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            log.error("cannot replay %s: %s", args.replay, exc)
            return EXIT_DATA
        return run(recorded)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "evaluate":
            cmd_evaluate(args, None)
            return 0
        r = Run(args, argv)
        COMMANDS[args.command](args, r)
        r.finish()
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        log.error("%s", exc)
        return EXIT_INFEASIBLE
    except (DataError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    return 0


def main() -> None:
    sys.exit(run())
