"""Batch command-line interface.

Subcommands: train, explain, global, compare, synth, experiment. Every
report-producing command writes into a run directory (attribution.csv,
attribution.json, bars.svg, summary.svg where applicable, run_meta.json)
and is byte-reproducible for a fixed seed; SVG timestamps are opt-in.

Exit codes: 0 ok, 2 usage, 3 data error, 4 model error, 5 explanation
error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import bench
from .errors import CafaError, IngestionError, InvalidInputError, UsageError
from .experiment import run_experiment
from .explain import derive_seed, global_explanation, lime_explain
from .forest import ForestParams, RandomForest, accuracy, train_forest
from .pipeline import CafaConfig, cafa_global, cafa_local, compare_with_shap, standard_shap
from .reports import (
    render_global_charts,
    render_local_charts,
    write_attribution_csv,
    write_attribution_json,
    write_global_csv,
    write_run_meta,
)
from .schema import (
    IngestionSpec,
    dataset_to_raw_csv,
    encode_instance,
    ingestion_spec_for,
    load_csv,
    validate_instance,
)


def _add_data_args(p):
    p.add_argument("--data", required=True, help="training CSV path")
    p.add_argument("--spec", required=True, help="ingestion spec JSON path")


def _add_cafa_args(p):
    p.add_argument("--k", type=int, default=200, help="per-class neighborhood size")
    p.add_argument("--pi", default="estimate", help="proximity threshold or 'estimate'")
    p.add_argument("--n-perms", type=int, default=10, help="permutations per explained row")
    p.add_argument("--n-locals", type=int, default=None, help="neighborhood rows to explain")
    p.add_argument("--background", type=int, default=100, help="background sample size")
    p.add_argument("--explainer", choices=("mc", "exact"), default="mc")
    p.add_argument("--surrogate-trees", type=int, default=100)
    p.add_argument("--surrogate-depth", type=int, default=8)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cafa", description="attribution toolkit for controllable features"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a forest on a CSV and save it as JSON")
    _add_data_args(p)
    p.add_argument("--out", required=True, help="model JSON output path")
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--min-leaf", type=int, default=2)
    p.add_argument("--mtry", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("explain", help="explain one instance")
    _add_data_args(p)
    p.add_argument("--model", required=True, help="trained model JSON")
    p.add_argument("--method", choices=("cafa", "shap", "lime"), default="cafa")
    p.add_argument("--instance", required=True, help="row index or raw-values JSON file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lime-samples", type=int, default=1000)
    p.add_argument("--timestamp", action="store_true", help="embed generation time in SVGs")
    _add_cafa_args(p)

    p = sub.add_parser("global", help="aggregate explanations over a row sample")
    _add_data_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--sample", type=int, required=True, help="number of rows to explain")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timestamp", action="store_true")
    _add_cafa_args(p)

    p = sub.add_parser("compare", help="run cafa and standard shap side by side")
    _add_data_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--instance", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timestamp", action="store_true")
    _add_cafa_args(p)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--kind", choices=("synth", "covid", "lung"), default="synth")
    p.add_argument("--rows", type=int, default=1000)
    p.add_argument("--controllable", type=int, default=4)
    p.add_argument("--uncontrollable", type=int, default=2)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--spec-out", default=None, help="ingestion spec output path")

    p = sub.add_parser("experiment", help="run a JSON experiment config")
    p.add_argument("config", help="experiment config JSON path")
    p.add_argument("--timestamp", action="store_true")

    return parser


def _load_model(path) -> RandomForest:
    return RandomForest.load(path)


def _resolve_instance(arg: str, data, model: RandomForest) -> np.ndarray:
    """Row index into the dataset, or a JSON file of raw feature values."""
    try:
        idx = int(arg)
    except ValueError:
        idx = None
    if idx is not None:
        if not 0 <= idx < data.n_rows:
            raise UsageError(f"instance index {idx} out of range (0..{data.n_rows - 1})")
        return data.X[idx]
    path = Path(arg)
    if not path.exists():
        raise UsageError(f"instance {arg!r} is neither a row index nor an existing file")
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise InvalidInputError("instance file must hold a feature-name -> value object")
    return encode_instance(model.schema, model.norm_params, raw)


def _check_model_matches(model: RandomForest, data):
    if model.schema is None:
        raise UsageError("model file carries no schema; retrain with this toolkit")
    if tuple(model.schema.names) != tuple(data.schema.names):
        raise UsageError(
            "model schema does not match the dataset "
            f"({list(model.schema.names)[:3]}... vs {list(data.schema.names)[:3]}...)"
        )


def _config_from_args(args) -> CafaConfig:
    pi = args.pi
    if pi != "estimate":
        try:
            pi = float(pi)
        except ValueError:
            raise UsageError(f"--pi must be a float or 'estimate', got {pi!r}") from None
    return CafaConfig(
        k=args.k,
        pi=pi,
        n_perms=args.n_perms,
        n_locals=args.n_locals,
        background_size=args.background,
        explainer=args.explainer,
        surrogate_params=ForestParams(
            n_trees=args.surrogate_trees, max_depth=args.surrogate_depth
        ),
        seed=args.seed,
    )


def cmd_train(args) -> int:
    spec = IngestionSpec.from_json(args.spec)
    data = load_csv(args.data, spec)
    params = ForestParams(
        n_trees=args.trees,
        max_depth=args.depth,
        min_leaf=args.min_leaf,
        features_per_split=args.mtry,
        seed=args.seed,
    )
    model = train_forest(data, params)
    model.save(args.out)
    print(f"trained {params.n_trees} trees on {data.n_rows} rows; "
          f"training accuracy {accuracy(model, data):.4f}; saved to {args.out}")
    return 0


def cmd_explain(args) -> int:
    spec = IngestionSpec.from_json(args.spec)
    data = load_csv(args.data, spec)
    model = _load_model(args.model)
    _check_model_matches(model, data)
    x = _resolve_instance(args.instance, data, model)
    x = validate_instance(data.schema, x)
    cfg = _config_from_args(args)
    names = data.schema.names

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "command": f"explain.{args.method}",
        "instance": args.instance,
        "seed": args.seed,
        "data": str(args.data),
        "model": str(args.model),
    }
    per_row = None
    if args.method == "cafa":
        res = cafa_local(x, model, data.schema, cfg, data=data)
        attr = res.attribution
        per_row = res.per_row_phi
        meta.update(
            {
                "config": cfg.to_dict(),
                "pi": res.pi,
                "neighborhood_stats": res.neighborhood.stats,
                "surrogate_accuracy": res.surrogate_quality,
                "zeros_enforced": [names[j] for j in data.schema.uncontrollable_idx],
            }
        )
    elif args.method == "shap":
        attr = standard_shap(x, model, data.schema, cfg, data=data)
        meta["config"] = cfg.to_dict()
    else:
        attr = lime_explain(
            model, x, data.schema, n_samples=args.lime_samples, seed=derive_seed(args.seed, 20)
        )
        meta["n_samples"] = args.lime_samples

    write_attribution_csv(out_dir / "attribution.csv", attr, names)
    write_attribution_json(out_dir / "attribution.json", attr, names)
    render_local_charts(out_dir, attr, names, per_row_phi=per_row, timestamp=args.timestamp)
    write_run_meta(out_dir / "run_meta.json", meta)
    print(f"{args.method} attribution written to {out_dir}")
    return 0


def cmd_global(args) -> int:
    spec = IngestionSpec.from_json(args.spec)
    data = load_csv(args.data, spec)
    model = _load_model(args.model)
    _check_model_matches(model, data)
    cfg = _config_from_args(args)
    names = data.schema.names
    if not 1 <= args.sample <= data.n_rows:
        raise UsageError(f"--sample must be in 1..{data.n_rows}")
    rng = np.random.default_rng(derive_seed(args.seed, 100))
    sample_idx = np.sort(rng.choice(data.n_rows, size=args.sample, replace=False))

    res = cafa_global(data.X[sample_idx], model, data.schema, cfg, data=data)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_global_csv(out_dir / "attribution.csv", names, res.mean_phi, res.mean_abs_phi)
    doc = {
        "method": "cafa-global",
        "n_explained": res.n_explained,
        "skipped": [[int(i), msg] for i, msg in res.skipped],
        "pi": res.pi,
        "seed": args.seed,
        "phi": [
            {"feature": n, "mean": float(v), "mean_abs": float(a)}
            for n, v, a in zip(names, res.mean_phi, res.mean_abs_phi)
        ],
    }
    with open(out_dir / "attribution.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    per_instance_phi = np.stack([r.attribution.phi for _, r in res.per_instance])
    render_global_charts(out_dir, names, res.mean_phi, per_instance_phi, timestamp=args.timestamp)
    write_run_meta(
        out_dir / "run_meta.json",
        {
            "command": "global",
            "sample_rows": [int(i) for i in sample_idx],
            "config": cfg.to_dict(),
            "pi": res.pi,
            "n_explained": res.n_explained,
            "skipped": [[int(i), msg] for i, msg in res.skipped],
        },
    )
    print(f"global attribution over {res.n_explained} instances written to {out_dir} "
          f"({len(res.skipped)} skipped)")
    return 0


def cmd_compare(args) -> int:
    spec = IngestionSpec.from_json(args.spec)
    data = load_csv(args.data, spec)
    model = _load_model(args.model)
    _check_model_matches(model, data)
    x = _resolve_instance(args.instance, data, model)
    cfg = _config_from_args(args)
    names = data.schema.names

    res = compare_with_shap(x, model, data.schema, cfg, data=data)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_attribution_csv(out_dir / "attribution.csv", res.cafa.attribution, names)
    write_attribution_json(
        out_dir / "attribution.json",
        res.cafa.attribution,
        names,
        extra={"pearson_controllable": res.pearson_controllable},
    )
    write_attribution_csv(out_dir / "shap.csv", res.shap, names)
    write_attribution_json(out_dir / "shap.json", res.shap, names)
    render_local_charts(
        out_dir, res.cafa.attribution, names,
        per_row_phi=res.cafa.per_row_phi, timestamp=args.timestamp,
    )
    write_run_meta(
        out_dir / "run_meta.json",
        {
            "command": "compare",
            "instance": args.instance,
            "config": cfg.to_dict(),
            "pi": res.cafa.pi,
            "pearson_controllable": res.pearson_controllable,
            "controllable": [names[j] for j in data.schema.controllable_idx],
        },
    )
    print(f"pearson over controllable features: {res.pearson_controllable:+.4f} "
          f"(reports in {out_dir})")
    return 0


def cmd_synth(args) -> int:
    if args.kind == "covid":
        data = bench.covid_preset(seed=args.seed)
    elif args.kind == "lung":
        data = bench.lung_preset(seed=args.seed)
    else:
        spec = bench.SynthSpec(
            m_controllable=args.controllable,
            m_uncontrollable=args.uncontrollable,
            n_rows=args.rows,
            noise=args.noise,
            seed=args.seed,
        )
        data = bench.generate_synth(spec)
    dataset_to_raw_csv(data, args.out)
    if args.spec_out:
        with open(args.spec_out, "w", encoding="utf-8") as fh:
            json.dump(ingestion_spec_for(data).to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"wrote {data.n_rows} rows x {len(data.schema.features)} features to {args.out}")
    return 0


def cmd_experiment(args) -> int:
    out_dir = run_experiment(args.config, timestamp=args.timestamp)
    print(f"experiment reports written to {out_dir}")
    return 0


_COMMANDS = {
    "train": cmd_train,
    "explain": cmd_explain,
    "global": cmd_global,
    "compare": cmd_compare,
    "synth": cmd_synth,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CafaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
