"""Command-line interface.

Subcommands mirror the pipeline: synth, ingest, metrics, cluster, assign,
train, eval, explain, whatif, serve. Exit codes: 0 success, 1 usage
error, 2 data error. All randomized commands take --seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from datetime import datetime
from pathlib import Path

import numpy as np

from . import clustering, explain, metrics, predictor, store, synth, whatif
from .distribution import BinningSpec, NormalizationMode, smooth
from .errors import RunvarError
from .features import (
    TimeWindow,
    build_schema,
    extract_features,
    group_pmf,
    split_by_time,
    timeline_windows,
    window_label_pmf,
)
from .forest import ForestParams
from .telemetry import format_rfc3339, load_dataset, parse_rfc3339, save_dataset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1; argparse's default of 2 is reserved for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _parse_time(text: str) -> datetime:
    dt = parse_rfc3339(text if "T" in text or " " in text else text + "T00:00:00Z")
    return dt


def _parse_window(text: str) -> TimeWindow:
    try:
        a, b = text.split(",")
    except ValueError:
        raise RunvarError(f"window must be 'START,END', got {text!r}")
    return TimeWindow(_parse_time(a), _parse_time(b))


def _parse_fracs(text: str) -> tuple[float, ...]:
    fracs = tuple(float(p) for p in text.split(","))
    if len(fracs) != 3:
        raise RunvarError("--split-fracs needs three comma-separated fractions")
    return fracs


def _spec_for(args) -> BinningSpec:
    return BinningSpec.for_mode(NormalizationMode(args.mode), args.bins)


def _windows_for(args, dataset):
    """Resolve (train, test) windows from explicit flags or fractions."""
    if args.train_window and args.test_window:
        return _parse_window(args.train_window), _parse_window(args.test_window)
    _, w2, w3 = timeline_windows(dataset, _parse_fracs(args.split_fracs))
    return w2, w3


def _fit_windows_pmfs(dataset, spec, window=None):
    pmfs, values = [], []
    for g in dataset.groups:
        if window is None:
            pmf, vals, _ = group_pmf(g, spec, smooth_fn=smooth)
        else:
            got = window_label_pmf(g, window, spec)
            if got is None:
                continue
            raw, vals, _ = got
            pmf = smooth(raw)
        pmfs.append(pmf)
        values.append(vals)
    return pmfs, values


def _forest_params(args, n_trees_default=50) -> ForestParams:
    return ForestParams(
        n_trees=getattr(args, "trees", n_trees_default) or n_trees_default,
        max_depth=getattr(args, "depth", 12) or 12,
        min_leaf=getattr(args, "min_leaf", 1) or 1,
        seed=args.seed,
    )


# --- subcommand handlers ----------------------------------------------------

def _cmd_synth(args) -> int:
    if args.config:
        cfg = synth.SynthConfig.from_json_file(args.config)
        overrides = {}
    else:
        overrides = {}
        if args.groups:
            overrides["n_groups"] = args.groups
        if args.k_true:
            overrides["k_true"] = args.k_true
            overrides["shape_params"] = synth.default_shape_params(args.k_true)
        if args.noise is not None:
            overrides["feature_noise"] = args.noise
        cfg = synth.preset_config(args.preset, **overrides)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    dataset = synth.generate_workload(cfg)
    save_dataset(dataset, args.out)
    print(
        f"wrote {dataset.n_instances} instances in {len(dataset.groups)} groups "
        f"(k_true={cfg.k_true}, seed={cfg.seed}) to {args.out}"
    )
    return EXIT_OK


def _cmd_ingest(args) -> int:
    dataset = load_dataset(args.dataset, role=args.role, min_support=args.support)
    supports = [g.support for g in dataset.groups]
    print(
        f"{len(dataset.groups)} groups, {dataset.n_instances} instances "
        f"(support >= {args.support})"
    )
    if supports:
        lo, hi = dataset.time_span()
        print(f"support: min={min(supports)} median={sorted(supports)[len(supports) // 2]} "
              f"max={max(supports)}")
        print(f"span: {format_rfc3339(lo)} .. {format_rfc3339(hi)}")
    if args.out:
        save_dataset(dataset, args.out)
        print(f"normalized copy written to {args.out}")
    return EXIT_OK


def _cmd_metrics(args) -> int:
    dataset = load_dataset(args.dataset, min_support=args.support)
    if args.split:
        split = _parse_time(args.split)
    else:
        lo, hi = dataset.time_span()
        split = lo + (hi - lo) / 2
    pairs = []
    for g in dataset.groups:
        try:
            pairs.extend(metrics.historic_vs_future_pairs(g, split, args.metric))
        except RunvarError:
            continue
    runtimes = [i.runtime for i in dataset.all_instances()]
    summary = metrics.scalar_summary(runtimes)
    print(
        f"pooled: mean={summary.mean:.3g}s median={summary.median:.3g}s "
        f"cov={summary.cov:.3g} p95={summary.p95:.3g}s outlier_rate={summary.outlier_rate:.3%}"
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            metrics.pairs_to_csv(pairs, fh)
        print(f"{len(pairs)} {args.metric} pairs written to {args.out}")
    return EXIT_OK


def _cmd_cluster(args) -> int:
    dataset = load_dataset(args.dataset, min_support=args.support)
    spec = _spec_for(args)
    pmfs, values = _fit_windows_pmfs(dataset, spec)
    if args.inertia:
        lo, hi = (int(p) for p in args.inertia.split(":"))
        curve = clustering.inertia_curve(pmfs, range(lo, hi + 1), seed=args.seed)
        for k, inertia in curve:
            print(f"k={k:<3} inertia={inertia:.6g}")
        print(f"elbow (max second difference): k={clustering.elbow_k(curve)}")
        return EXIT_OK
    model = clustering.kmeans_fit(pmfs, args.k, seed=args.seed, group_values=values)
    out = args.out or store.ProjectStore().ensure().shape_model_path("model")
    store.save_shape_model(model, out)
    print(clustering.format_cluster_table(model))
    print(f"shape model written to {out}")
    return EXIT_OK


def _cmd_assign(args) -> int:
    dataset = load_dataset(args.dataset, min_support=args.support)
    model = store.load_shape_model(args.model)
    rows = []
    for g in dataset.groups:
        pmf, _, _ = group_pmf(g, model.spec)
        label = clustering.assign_membership(pmf, model)
        rows.append(
            {
                "group": g.key.as_string(),
                "cluster": label.cluster_id,
                "n_samples": label.n_samples,
                "log_likelihoods": [float(v) for v in label.log_likelihoods],
            }
        )
        print(f"{g.key.as_string():<48} -> cluster {label.cluster_id} (n={label.n_samples})")
    if args.out:
        store.write_json({"assignments": rows}, args.out)
    return EXIT_OK


def _cmd_train(args) -> int:
    dataset = load_dataset(args.dataset, min_support=args.support)
    shape_model = store.load_shape_model(args.model)
    train_w, test_w = _windows_for(args, dataset)
    schema = build_schema(dataset.groups)
    train, test = split_by_time(dataset, shape_model, train_w, test_w, schema)
    params = _forest_params(args)
    clf = predictor.train_classifier(train, params)
    windows = {
        "train_window": [format_rfc3339(train_w.start), format_rfc3339(train_w.end)],
        "test_window": [format_rfc3339(test_w.start), format_rfc3339(test_w.end)],
    }
    out = args.out or store.ProjectStore().ensure().classifier_path("model")
    store.save_classifier(clf, schema, out, windows=windows)
    print(f"classifier trained on {len(train)} instances -> {out}")
    if args.regression_out:
        reg_params = dataclasses.replace(params, n_trees=max(10, params.n_trees // 2))
        reg = predictor.train_regression_baseline(train, reg_params)
        store.save_classifier(reg, schema, args.regression_out, windows=windows)
        print(f"regression baseline -> {args.regression_out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    dataset = load_dataset(args.dataset, min_support=args.support)
    shape_model = store.load_shape_model(args.model)
    clf, schema, windows = store.load_classifier(args.classifier)
    if args.train_window and args.test_window:
        train_w, test_w = _parse_window(args.train_window), _parse_window(args.test_window)
    elif windows.get("train_window"):
        train_w = TimeWindow(*(parse_rfc3339(t) for t in windows["train_window"]))
        test_w = TimeWindow(*(parse_rfc3339(t) for t in windows["test_window"]))
    else:
        train_w, test_w = _windows_for(args, dataset)
    _, test = split_by_time(dataset, shape_model, train_w, test_w, schema)
    regression = None
    if args.regression:
        regression, _, _ = store.load_classifier(args.regression, kind="regressor")
    report = predictor.evaluate(clf, regression, shape_model, test)
    print(report.to_text())
    if args.out:
        store.write_json(report.to_dict(), args.out)
        print(f"report written to {args.out}")
    return EXIT_OK


def _cmd_explain(args) -> int:
    dataset = load_dataset(args.dataset, min_support=args.support)
    clf, schema, _ = store.load_classifier(args.classifier)
    rng = np.random.default_rng(args.seed)
    fvs = []
    for g in dataset.groups:
        for inst in g.instances:
            fvs.append(extract_features(g, inst, schema))
    if not fvs:
        raise RunvarError("dataset has no instances")
    take = min(args.background, len(fvs))
    background = [fvs[i] for i in rng.choice(len(fvs), size=take, replace=False)]
    if args.feature:
        sample = fvs[: args.limit] if args.limit else fvs
        pairs = explain.shap_summary(
            clf, sample, args.feature, args.cluster,
            background=np.asarray([b.values for b in background]),
            n_permutations=args.permutations, seed=args.seed,
        )
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                explain.summary_to_csv(
                    pairs, args.feature, args.cluster, fh,
                    instance_ids=[fv.instance_id for fv in sample],
                )
            print(f"{len(pairs)} pairs written to {args.out}")
        else:
            for fval, sval in pairs[:20]:
                print(f"{fval:<16.6g} {sval:+.6f}")
        return EXIT_OK
    target = None
    if args.group:
        for fv in fvs:
            if fv.group_key.as_string() == args.group:
                target = fv
        if target is None:
            raise RunvarError(f"group {args.group!r} not found")
    else:
        target = fvs[-1]
    report = explain.shapley_sampled(
        clf, target, args.cluster, background,
        n_permutations=args.permutations, seed=args.seed,
    )
    ranked = sorted(
        zip(report.feature_names, report.values), key=lambda kv: -abs(kv[1])
    )
    print(f"instance {report.instance_id}  class {args.cluster}  "
          f"fx={report.fx:.4f} baseline={report.baseline:.4f}")
    for name, val in ranked[:15]:
        print(f"  {name:<32} {val:+.6f}")
    if args.out:
        store.write_json(report.to_dict(), args.out)
    return EXIT_OK


def _cmd_whatif(args) -> int:
    dataset = load_dataset(args.dataset, min_support=args.support)
    clf, schema, windows = store.load_classifier(args.classifier)
    scenarios = whatif.builtin_scenarios(schema, args.sku_from, args.sku_to)
    if args.list_scenarios:
        for name, intervention in sorted(scenarios.items()):
            print(f"{name}\t{intervention.to_json()}")
        return EXIT_OK
    if not args.model:
        raise RunvarError("--model is required to run a scenario")
    shape_model = store.load_shape_model(args.model)
    if args.scenario in scenarios:
        intervention = scenarios[args.scenario]
    elif Path(args.scenario).exists():
        intervention = store.load_intervention(args.scenario)
    else:
        raise RunvarError(
            f"scenario {args.scenario!r} is neither builtin {sorted(scenarios)} nor a file"
        )
    if windows.get("train_window"):
        train_w = TimeWindow(*(parse_rfc3339(t) for t in windows["train_window"]))
        test_w = TimeWindow(*(parse_rfc3339(t) for t in windows["test_window"]))
    else:
        train_w, test_w = _windows_for(args, dataset)
    _, test = split_by_time(dataset, shape_model, train_w, test_w, schema)
    report = whatif.run_scenario(test, clf, shape_model, intervention)
    print(report.to_text())
    if args.out:
        store.write_json(report.to_dict(), args.out)
        print(f"scenario report written to {args.out}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    from .service import ServingBundle, serve

    dataset = load_dataset(args.dataset, min_support=args.support)
    shape_model = store.load_shape_model(args.model)
    clf, schema, _ = store.load_classifier(args.classifier)
    bundle = ServingBundle.build(dataset, shape_model, clf, schema)
    ui_dir = args.ui or (Path(__file__).resolve().parents[2] / "frontend" / "dist")
    print(f"serving on http://{args.host}:{args.port} (ui: {ui_dir})")
    serve(bundle, port=args.port, host=args.host, ui_dir=ui_dir)
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="runvar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset=True, support=True, seed=True):
        if dataset:
            p.add_argument("--dataset", required=True, help="telemetry JSONL path")
        if support:
            p.add_argument("--support", type=int, default=1, help="minimum group support")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("synth", help="generate a synthetic workload")
    p.add_argument("--preset", default="separable", choices=sorted(synth.PRESETS))
    p.add_argument("--config", help="SynthConfig JSON file (overrides --preset)")
    p.add_argument("--groups", type=int, help="override n_groups")
    p.add_argument("--k-true", type=int, dest="k_true", help="override planted shape count")
    p.add_argument("--noise", type=float, help="override feature_noise")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest", help="load, group, and summarize telemetry")
    common(p, seed=False)
    p.add_argument("--role", default="cluster_fit", choices=["cluster_fit", "train", "test"])
    p.add_argument("--out", help="write the grouped/normalized JSONL copy here")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("metrics", help="scalar baselines and historic-vs-future pairs")
    common(p, seed=False)
    p.add_argument("--metric", default="median", choices=["median", "cov", "p95"])
    p.add_argument("--split", help="RFC3339 split time (default: midpoint)")
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("cluster", help="fit the shape model (k-means over PMFs)")
    common(p)
    p.add_argument("--mode", default="ratio", choices=["ratio", "delta"])
    p.add_argument("--bins", type=int, default=200, help="interior bin count")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--inertia", help="K1:K2 - print the inertia curve instead of fitting")
    p.add_argument("--out", help="shape model JSON path")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("assign", help="posterior membership per group")
    common(p, seed=False)
    p.add_argument("--model", required=True, help="shape model JSON")
    p.add_argument("--out", help="assignments JSON path")
    p.set_defaults(func=_cmd_assign)

    p = sub.add_parser("train", help="train the cluster-membership classifier")
    common(p)
    p.add_argument("--model", required=True, help="shape model JSON")
    p.add_argument("--train-window", help="START,END (RFC3339)")
    p.add_argument("--test-window", help="START,END (RFC3339)")
    p.add_argument("--split-fracs", default="0.4,0.3,0.3",
                   help="history,train,test fractions when windows are not given")
    p.add_argument("--trees", type=int, default=50)
    p.add_argument("--depth", type=int, default=12)
    p.add_argument("--min-leaf", type=int, dest="min_leaf", default=1)
    p.add_argument("--out", help="classifier JSON path")
    p.add_argument("--regression-out", help="also train the regression baseline")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate classifier plus regression baseline")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--regression")
    p.add_argument("--train-window")
    p.add_argument("--test-window")
    p.add_argument("--split-fracs", default="0.4,0.3,0.3")
    p.add_argument("--out", help="EvalReport JSON path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("explain", help="Shapley attributions")
    common(p)
    p.add_argument("--classifier", required=True)
    p.add_argument("--cluster", type=int, default=0, help="target cluster id")
    p.add_argument("--group", help="group key to explain (default: last instance)")
    p.add_argument("--feature", help="summary mode: per-instance pairs for this feature")
    p.add_argument("--limit", type=int, default=200, help="summary mode instance cap")
    p.add_argument("--background", type=int, default=64)
    p.add_argument("--permutations", type=int, default=128)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("whatif", help="counterfactual scenario over the test split")
    common(p)
    p.add_argument("--model", help="shape model JSON")
    p.add_argument("--classifier", required=True)
    p.add_argument("--scenario", default="spare-tokens-off",
                   help="builtin name or intervention JSON file")
    p.add_argument("--sku-from", default="Gen3.5")
    p.add_argument("--sku-to", default="Gen5.2")
    p.add_argument("--list-scenarios", action="store_true")
    p.add_argument("--train-window")
    p.add_argument("--test-window")
    p.add_argument("--split-fracs", default="0.4,0.3,0.3")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_whatif)

    p = sub.add_parser("serve", help="run the HTTP service")
    common(p, seed=False)
    p.add_argument("--model", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui", help="static UI directory (default: frontend/dist)")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except RunvarError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_DATA
    except OSError as e:
        sys.stderr.write(f"io error: {e}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
