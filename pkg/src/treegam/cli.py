"""Command-line interface.

Subcommands: fit, predict, filter, purify, verify, simulate, report,
benchmark. Every long flag can also be supplied through a JSON config file
(--config), with explicit command-line flags taking precedence; --threads
additionally falls back to the GAMI_THREADS environment variable.

Exit codes: 0 success, 2 usage error, 3 data error, 4 model-format error,
5 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .boosting import fit_main_stage
from .dataset import TRAIN, load_csv, make_bins, split
from .errors import DataError, ModelFormatError, NumericalError
from .filtering import quadrant_filter, tree_filter
from .losses import LossSpec, initial_score
from .metrics import auc, binary_logloss, mse
from .model import FitConfig, fit, predict, predict_proba
from .persist import load_model, save_model
from .purify import purify, term_importance, verify_orthogonality
from .simulate import SimConfig, generate


class UsageError(Exception):
    pass


def _add_data_options(p):
    p.add_argument("--data", required=True, help="input CSV (header row, '.' decimals)")
    p.add_argument("--response", default=argparse.SUPPRESS,
                   help="response column name (default y)")
    p.add_argument("--delimiter", default=argparse.SUPPRESS, help="CSV delimiter")
    p.add_argument("--split", default=argparse.SUPPRESS,
                   help="train,validation,test fractions (default 0.5,0.25,0.25)")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                   help="seed for the split permutation (default 0)")
    p.add_argument("--max-bins", type=int, default=argparse.SUPPRESS,
                   help="bins per feature for split search (default 256)")


def _add_fit_options(p):
    p.add_argument("--rounds", type=int, default=argparse.SUPPRESS)
    p.add_argument("--q", type=int, default=argparse.SUPPRESS,
                   help="interaction pairs kept by the screen each round (default 10)")
    p.add_argument("--learning-rate", type=float, default=argparse.SUPPRESS)
    p.add_argument("--max-iterations", type=int, default=argparse.SUPPRESS)
    p.add_argument("--patience", type=int, default=argparse.SUPPRESS)
    p.add_argument("--depth", type=int, default=argparse.SUPPRESS,
                   help="maximum tree depth (default 2)")
    p.add_argument("--min-leaf", type=int, default=argparse.SUPPRESS,
                   help="minimum training rows per leaf (default max(20, 0.5%% of rows))")
    p.add_argument("--ridge", type=float, default=argparse.SUPPRESS)
    p.add_argument("--knots", type=int, default=argparse.SUPPRESS,
                   help="hat-spline knots for interaction leaves (default 5)")
    p.add_argument("--loss", choices=("squared", "logloss"), default=argparse.SUPPRESS)
    p.add_argument("--filter-method", choices=("tree", "quadrant"),
                   default=argparse.SUPPRESS,
                   help="pair screen used inside fitting (default tree)")
    p.add_argument("--grid-size", type=int, default=argparse.SUPPRESS,
                   help="cut grid for the quadrant screen (default 16)")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                   help="worker threads (default GAMI_THREADS or 1)")


_COMMON_DEFAULTS = {
    "response": "y",
    "delimiter": ",",
    "split": "0.5,0.25,0.25",
    "seed": 0,
    "max_bins": 256,
}

_FIT_DEFAULTS = {
    "rounds": 5,
    "q": 10,
    "learning_rate": 0.2,
    "max_iterations": 1000,
    "patience": 10,
    "depth": 2,
    "min_leaf": None,
    "ridge": 1.0,
    "knots": 5,
    "loss": "squared",
    "filter_method": "tree",
    "grid_size": 16,
    "threads": None,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="treegam",
        description="Additive models with pairwise interactions via boosted model trees",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="train a model and save it as JSON")
    _add_data_options(p)
    _add_fit_options(p)
    p.add_argument("--config", default=argparse.SUPPRESS, help="JSON file of flag values")
    p.add_argument("--out", required=True, help="path for the model file")

    p = sub.add_parser("predict", help="score a CSV with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--delimiter", default=argparse.SUPPRESS)
    p.add_argument("--config", default=argparse.SUPPRESS)
    p.add_argument("--out", required=True, help="output CSV with prediction appended")

    p = sub.add_parser("filter", help="rank feature pairs by interaction evidence")
    _add_data_options(p)
    _add_fit_options(p)
    p.add_argument("--method", choices=("tree", "quadrant"), default=argparse.SUPPRESS,
                   help="screen to run (default tree)")
    p.add_argument("--fit-mains", action=argparse.BooleanOptionalAction,
                   default=argparse.SUPPRESS,
                   help="boost main effects before screening (default on)")
    p.add_argument("--config", default=argparse.SUPPRESS)
    p.add_argument("--out", required=True, help="output CSV of ranked pairs")

    p = sub.add_parser("purify", help="decompose a model into orthogonal effects")
    _add_data_options(p)
    p.add_argument("--model", required=True)
    p.add_argument("--config", default=argparse.SUPPRESS)
    p.add_argument("--out", default=argparse.SUPPRESS,
                   help="output model path (default: overwrite --model)")

    p = sub.add_parser("verify", help="check purification orthogonality")
    _add_data_options(p)
    p.add_argument("--model", required=True)
    p.add_argument("--tolerance", type=float, default=argparse.SUPPRESS,
                   help="max allowed normalized inner product (default 1e-6)")
    p.add_argument("--config", default=argparse.SUPPRESS)

    p = sub.add_parser("simulate", help="draw a benchmark dataset")
    p.add_argument("--model", type=int, required=True, choices=(1, 2, 3, 4),
                   help="truth model id")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rho", type=float, default=argparse.SUPPRESS,
                   help="within-block feature correlation (default 0)")
    p.add_argument("--response-kind", choices=("continuous", "binary"),
                   default=argparse.SUPPRESS)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--config", default=argparse.SUPPRESS)
    p.add_argument("--out", required=True,
                   help="output CSV; true terms go to <out>.truth.json")

    p = sub.add_parser("report", help="export effect curves, grids and importances")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True,
                   help="reference rows for slice quantiles (training file)")
    p.add_argument("--response", default=argparse.SUPPRESS)
    p.add_argument("--delimiter", default=argparse.SUPPRESS)
    p.add_argument("--config", default=argparse.SUPPRESS)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("benchmark", help="rerun a simulation scenario end to end")
    p.add_argument("--model", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--n", type=int, default=argparse.SUPPRESS, help="rows (default 50000)")
    p.add_argument("--rho", type=float, default=argparse.SUPPRESS)
    p.add_argument("--response-kind", choices=("continuous", "binary"),
                   default=argparse.SUPPRESS)
    p.add_argument("--repeats", type=int, default=argparse.SUPPRESS,
                   help="number of re-splits (default 3)")
    _add_fit_options(p)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--split", default=argparse.SUPPRESS)
    p.add_argument("--max-bins", type=int, default=argparse.SUPPRESS)
    p.add_argument("--config", default=argparse.SUPPRESS)
    return parser


def _merge_options(args, defaults):
    """Layer option sources: defaults < config file < explicit flags."""
    merged = dict(defaults)
    ns = vars(args)
    config_path = ns.pop("config", None)
    if config_path is not None:
        with open(config_path) as fh:
            try:
                file_opts = json.load(fh)
            except json.JSONDecodeError as exc:
                raise UsageError(f"{config_path}: not valid JSON ({exc})") from exc
        if not isinstance(file_opts, dict):
            raise UsageError(f"{config_path}: config must be a JSON object")
        for key, value in file_opts.items():
            key = key.replace("-", "_")
            if key not in merged and key not in ns:
                raise UsageError(f"{config_path}: unknown option {key!r}")
            merged[key] = value
    merged.update(ns)
    if merged.get("threads") is None:
        env = os.environ.get("GAMI_THREADS")
        merged["threads"] = int(env) if env else 1
    return merged


def _parse_fractions(text):
    parts = [v.strip() for v in str(text).split(",")]
    if len(parts) != 3:
        raise UsageError("--split needs three comma-separated fractions")
    return tuple(float(v) for v in parts)


def _load_split_bin(opts):
    data = load_csv(opts["data"], opts["response"], delimiter=opts["delimiter"])
    data = split(data, _parse_fractions(opts["split"]), opts["seed"])
    bins = make_bins(data, opts["max_bins"])
    return data, bins


def _fit_config(opts):
    return FitConfig(
        rounds=opts["rounds"],
        q=opts["q"],
        learning_rate=opts["learning_rate"],
        max_iterations=opts["max_iterations"],
        patience=opts["patience"],
        max_depth=opts["depth"],
        min_leaf=opts["min_leaf"],
        ridge=opts["ridge"],
        knots=opts["knots"],
        loss=LossSpec(opts["loss"]),
        filter_method=opts["filter_method"],
        grid_size=opts["grid_size"],
        seed=opts["seed"],
        threads=opts["threads"],
    )


def cmd_fit(args):
    opts = _merge_options(args, {**_COMMON_DEFAULTS, **_FIT_DEFAULTS})
    data, bins = _load_split_bin(opts)
    model = fit(data, bins, _fit_config(opts))
    save_model(model, opts["out"])
    n_main = sum(1 for t in model.trees if t.stage == "main")
    print(f"fitted {len(model.rounds)} round(s), {n_main} main-effect trees, "
          f"{len(model.trees) - n_main} interaction trees -> {opts['out']}")
    return 0


def _read_table(path, delimiter):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))
    rows = [r for r in rows if r]
    if len(rows) < 2:
        raise DataError(f"{path}: need a header row and at least one data row")
    return rows[0], rows[1:]


def _feature_matrix(header, body, names, path):
    missing = [n for n in names if n not in header]
    if missing:
        raise DataError(f"{path}: missing model feature column(s): {', '.join(missing)}")
    cols = [header.index(n) for n in names]
    x = np.empty((len(body), len(names)))
    for i, row in enumerate(body):
        for jj, c in enumerate(cols):
            try:
                x[i, jj] = float(row[c])
            except (ValueError, IndexError):
                raise DataError(
                    f"{path}: row {i + 1}, column '{names[jj]}': "
                    f"cannot parse a number"
                ) from None
    if not np.isfinite(x).all():
        raise DataError(f"{path}: non-finite feature values")
    return x


def cmd_predict(args):
    opts = _merge_options(args, {"delimiter": ","})
    model = load_model(opts["model"])
    header, body = _read_table(opts["data"], opts["delimiter"])
    x = _feature_matrix(header, body, model.feature_names, opts["data"])
    scores = predict(model, x)
    extra_names = ["prediction"]
    extra_cols = [scores]
    if model.loss.kind == "logloss":
        extra_names.append("probability")
        extra_cols.append(predict_proba(model, x))
    with open(opts["out"], "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=opts["delimiter"])
        writer.writerow(header + extra_names)
        for i, row in enumerate(body):
            writer.writerow(row + [repr(float(col[i])) for col in extra_cols])
    print(f"wrote {len(body)} prediction(s) -> {opts['out']}")
    return 0


def cmd_filter(args):
    opts = _merge_options(args, {**_COMMON_DEFAULTS, **_FIT_DEFAULTS,
                                 "method": "tree", "fit_mains": True})
    data, bins = _load_split_bin(opts)
    loss = LossSpec(opts["loss"])
    config = _fit_config(opts)
    g = np.full(data.n_rows,
                initial_score(loss, data.response[data.rows(TRAIN)]))
    if opts["fit_mains"]:
        fit_main_stage(data, bins, loss, g,
                       learning_rate=opts["learning_rate"],
                       max_iterations=opts["max_iterations"],
                       patience=opts["patience"],
                       template=config.template,
                       n_threads=opts["threads"])
    if opts["method"] == "tree":
        result = tree_filter(data, bins, loss, g, opts["q"],
                             template=config.template, seed=opts["seed"],
                             n_threads=opts["threads"])
    else:
        result = quadrant_filter(data, loss, g, opts["q"],
                                 grid_size=opts["grid_size"], seed=opts["seed"],
                                 n_threads=opts["threads"])
    names = data.feature_names
    with open(opts["out"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "feature_j", "feature_k",
                         "sse_jk", "sse_kj", "score", "selected"])
        for rank, s in enumerate(result.scores, start=1):
            writer.writerow([
                rank, names[s.pair[0]], names[s.pair[1]],
                repr(s.sse_jk), repr(s.sse_kj), repr(s.score),
                int(rank <= opts["q"]),
            ])
    print(f"ranked {len(result.scores)} pairs ({opts['method']} screen) -> {opts['out']}")
    return 0


def cmd_purify(args):
    opts = _merge_options(args, {**_COMMON_DEFAULTS, "out": None})
    model = load_model(opts["model"])
    data = load_csv(opts["data"], opts["response"], delimiter=opts["delimiter"])
    data = split(data, _parse_fractions(opts["split"]), opts["seed"])
    x_train = data.features[data.rows(TRAIN)]
    model.effects = purify(model, x_train)
    out = opts["out"] or opts["model"]
    save_model(model, out)
    print(f"purified {len(model.effects.interactions)} interaction(s), "
          f"{len(model.effects.mains)} main effect(s) -> {out}")
    return 0


def cmd_verify(args):
    opts = _merge_options(args, {**_COMMON_DEFAULTS, "tolerance": 1e-6})
    model = load_model(opts["model"])
    if model.effects is None:
        raise UsageError("model has no purified effects; run purify first")
    data = load_csv(opts["data"], opts["response"], delimiter=opts["delimiter"])
    data = split(data, _parse_fractions(opts["split"]), opts["seed"])
    x_train = data.features[data.rows(TRAIN)]
    report = verify_orthogonality(model.effects, x_train,
                                  knots=model.config.knots)
    names = model.feature_names
    for check in report.checks:
        j, k = check.pair
        print(f"{names[j]}:{names[k]} max |<residual, basis>| = "
              f"{check.max_abs_inner:.3e} (normalized {check.max_ratio:.3e})")
    if not report.passed(opts["tolerance"]):
        print(f"FAILED: worst normalized inner product {report.max_ratio:.3e} "
              f"> {opts['tolerance']:.1e}", file=sys.stderr)
        return 5
    print(f"orthogonality verified at tolerance {opts['tolerance']:.1e}")
    return 0


def cmd_simulate(args):
    opts = _merge_options(args, {"rho": 0.0, "response_kind": "continuous", "seed": 0})
    config = SimConfig(opts["model"], opts["n"], rho=opts["rho"],
                       response=opts["response_kind"], seed=opts["seed"])
    data, oracle = generate(config)
    with open(opts["out"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(data.feature_names) + ["y"])
        for i in range(data.n_rows):
            writer.writerow([repr(float(v)) for v in data.features[i]]
                            + [repr(float(data.response[i]))])
    names = data.feature_names
    truth = {
        "model_id": oracle.model_id,
        "main_features": [names[j] for j in oracle.main_features],
        "pairs": [[names[j], names[k]] for j, k in oracle.pairs],
        "rho": opts["rho"],
        "response": opts["response_kind"],
        "seed": opts["seed"],
    }
    with open(f"{opts['out']}.truth.json", "w") as fh:
        json.dump(truth, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {data.n_rows} rows -> {opts['out']}")
    return 0


def _interaction_grid(eff, model, j, k, points):
    lo_j, hi_j = model.train_ranges[j]
    lo_k, hi_k = model.train_ranges[k]
    gj = np.linspace(lo_j, hi_j, points)
    gk = np.linspace(lo_k, hi_k, points)
    rows = np.zeros((points * points, model.n_features))
    mesh_j, mesh_k = np.meshgrid(gj, gk, indexing="ij")
    rows[:, j] = mesh_j.ravel()
    rows[:, k] = mesh_k.ravel()
    return gj, gk, eff.evaluate(rows).reshape(points, points)


def cmd_report(args):
    opts = _merge_options(args, {"response": "y", "delimiter": ","})
    model = load_model(opts["model"])
    if model.effects is None:
        raise UsageError("model has no purified effects; run purify first")
    store = model.effects
    header, body = _read_table(opts["data"], opts["delimiter"])
    ref_names = [n for n in model.feature_names if n in header]
    if len(ref_names) != len(model.feature_names):
        raise DataError(f"{opts['data']}: reference data lacks model features")
    x_ref = _feature_matrix(header, body, model.feature_names, opts["data"])
    os.makedirs(opts["out_dir"], exist_ok=True)
    names = model.feature_names

    importance = term_importance(store, x_ref)
    with open(os.path.join(opts["out_dir"], "importance.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "kind", "term", "importance"])
        for rank, (kind, key, value) in enumerate(importance, start=1):
            term = names[key[0]] if kind == "main" else f"{names[key[0]]}:{names[key[1]]}"
            writer.writerow([rank, kind, term, repr(value)])

    for j, pl in sorted(store.mains.items()):
        lo, hi = model.train_ranges[j]
        grid = np.linspace(lo, hi, 256)
        values = pl.evaluate(grid)
        with open(os.path.join(opts["out_dir"], f"main_{names[j]}.csv"),
                  "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([names[j], "effect"])
            for v, e in zip(grid, values):
                writer.writerow([repr(float(v)), repr(float(e))])

    quantiles = (0.1, 0.3, 0.5, 0.7, 0.9)
    for (j, k), eff in sorted(store.interactions.items()):
        gj, gk, surface = _interaction_grid(eff, model, j, k, 64)
        stem = f"interaction_{names[j]}_{names[k]}"
        with open(os.path.join(opts["out_dir"], f"{stem}_grid.csv"),
                  "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([names[j], names[k], "effect"])
            for a in range(64):
                for b in range(64):
                    writer.writerow([repr(float(gj[a])), repr(float(gk[b])),
                                     repr(float(surface[a, b]))])
        cut_values = np.quantile(x_ref[:, k], quantiles)
        with open(os.path.join(opts["out_dir"], f"{stem}_slices.csv"),
                  "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([names[j]] + [f"{names[k]}_q{int(q * 100)}" for q in quantiles])
            rows = np.zeros((64 * len(quantiles), model.n_features))
            rows[:, j] = np.tile(gj, len(quantiles))
            rows[:, k] = np.repeat(cut_values, 64)
            slices = eff.evaluate(rows).reshape(len(quantiles), 64)
            for a in range(64):
                writer.writerow([repr(float(gj[a]))]
                                + [repr(float(slices[qi, a])) for qi in range(len(quantiles))])
    n_files = 1 + len(store.mains) + 2 * len(store.interactions)
    print(f"wrote {n_files} file(s) -> {opts['out_dir']}")
    return 0


def cmd_benchmark(args):
    opts = _merge_options(args, {**_FIT_DEFAULTS, "n": 50000, "rho": 0.0,
                                 "response_kind": "continuous", "repeats": 3,
                                 "seed": 0, "split": "0.5,0.25,0.25",
                                 "max_bins": 256})
    sim = SimConfig(opts["model"], opts["n"], rho=opts["rho"],
                    response=opts["response_kind"], seed=opts["seed"])
    base, oracle = generate(sim)
    loss_kind = "squared" if opts["response_kind"] == "continuous" else "logloss"
    opts["loss"] = loss_kind
    fractions = _parse_fractions(opts["split"])
    results = []
    last = None
    for rep in range(opts["repeats"]):
        data = split(base, fractions, opts["seed"] + rep)
        bins = make_bins(data, opts["max_bins"])
        model = fit(data, bins, _fit_config(opts))
        test = data.rows(2)
        scores = predict(model, data.features[test])
        y_test = data.response[test]
        if loss_kind == "squared":
            value = mse(y_test, scores)
            print(f"repeat {rep}: test_mse={value:.4f}")
            results.append(value)
        else:
            value = auc(y_test, scores)
            ll = binary_logloss(y_test, scores)
            print(f"repeat {rep}: test_auc={value:.4f} test_logloss={ll:.4f}")
            results.append(value)
        last = (model, data)
    metric = "test_mse" if loss_kind == "squared" else "test_auc"
    print(f"{metric} mean={np.mean(results):.4f} std={np.std(results):.4f} "
          f"over {opts['repeats']} splits")

    model, data = last
    x_train = data.features[data.rows(TRAIN)]
    store = purify(model, x_train)
    mains = [key[0] for kind, key, _ in store.importance if kind == "main"]
    pairs = [key for kind, key, _ in store.importance if kind == "interaction"]
    names = data.feature_names
    print("top mains: " + ", ".join(names[j] for j in mains[:10]))
    print("top pairs: " + ", ".join(f"{names[j]}:{names[k]}" for j, k in pairs[:10]))
    true_names = {tuple(sorted(p)) for p in oracle.pairs}
    hit = sum(1 for p in pairs[:len(true_names)] if p in true_names)
    print(f"true pairs in top-{len(true_names)}: {hit}/{len(true_names)}")
    return 0


_HANDLERS = {
    "fit": cmd_fit,
    "predict": cmd_predict,
    "filter": cmd_filter,
    "purify": cmd_purify,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "report": cmd_report,
    "benchmark": cmd_benchmark,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ModelFormatError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 4
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 5
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"file error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
