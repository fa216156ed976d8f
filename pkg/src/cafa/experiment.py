"""JSON-config experiment driver.

A config names a dataset source, forest hyperparameters, attribution
settings, a local instance, and a global sample size; the driver trains the
model, explains locally and globally with both the controllable-factor
pipeline and standard Shapley, and writes the full report tree:

    out_dir/
      local/cafa/   attribution.csv  attribution.json  bars.svg  summary.svg  run_meta.json
      local/shap/   attribution.csv  attribution.json  bars.svg  run_meta.json
      global/cafa/  attribution.csv  attribution.json  bars.svg  summary.svg  run_meta.json
      global/shap/  attribution.csv  attribution.json  bars.svg  summary.svg  run_meta.json
      run_meta.json

Reports embed the resolved config and seeds; nothing in them depends on
wall-clock time.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from . import bench
from .errors import IngestionError, UsageError
from .explain import derive_seed, global_explanation
from .forest import ForestParams, accuracy, train_forest
from .pipeline import CafaConfig, cafa_global, cafa_local, standard_shap
from .reports import (
    render_global_charts,
    render_local_charts,
    write_attribution_csv,
    write_attribution_json,
    write_global_csv,
    write_run_meta,
)
from .schema import IngestionSpec, load_csv

REQUIRED_KEYS = ("dataset", "model", "cafa", "sample", "out_dir")


def load_dataset(ds_cfg: dict):
    """Resolve a dataset config to a Dataset; kinds: csv | synth | preset names."""
    kind = ds_cfg.get("kind")
    if kind == "csv":
        spec = IngestionSpec.from_json(ds_cfg["spec"])
        return load_csv(ds_cfg["path"], spec)
    if kind == "covid_preset":
        return bench.covid_preset(seed=int(ds_cfg.get("seed", 0)))
    if kind == "lung_preset":
        return bench.lung_preset(seed=int(ds_cfg.get("seed", 0)))
    if kind == "synth":
        fields = {k: v for k, v in ds_cfg.items() if k != "kind"}
        for key in ("kinds", "rule_features", "rule_weights"):
            if key in fields and fields[key] is not None:
                fields[key] = tuple(fields[key])
        return bench.generate_synth(bench.SynthSpec(**fields))
    raise UsageError(
        f"dataset.kind must be one of csv|synth|covid_preset|lung_preset, got {kind!r}"
    )


def _cafa_config(doc: dict, seed: int) -> CafaConfig:
    fields = dict(doc)
    sp = fields.pop("surrogate_params", None)
    if sp is not None:
        fields["surrogate_params"] = ForestParams(**sp)
    fields.setdefault("seed", seed)
    try:
        return CafaConfig(**fields)
    except TypeError as exc:
        raise UsageError(f"bad cafa config: {exc}") from None


def run_experiment(config_path, timestamp: bool = False) -> Path:
    """Execute one experiment config; returns the output directory."""
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise IngestionError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or not doc:
        raise UsageError(f"empty experiment config; required keys: {', '.join(REQUIRED_KEYS)}")
    missing = [k for k in REQUIRED_KEYS if k not in doc]
    if missing:
        raise UsageError(
            f"experiment config missing keys: {', '.join(missing)} "
            f"(required: {', '.join(REQUIRED_KEYS)})"
        )

    seed = int(doc.get("seed", 0))
    data = load_dataset(doc["dataset"])
    schema = data.schema
    names = schema.names

    model_params = ForestParams(**{**doc["model"], "seed": doc["model"].get("seed", seed)})
    model = train_forest(data, model_params)
    train_acc = accuracy(model, data)

    cfg = _cafa_config(doc["cafa"], seed)
    out_dir = Path(doc["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    instance_idx = int(doc.get("instance", 0))
    if not 0 <= instance_idx < data.n_rows:
        raise UsageError(f"instance index {instance_idx} out of range (0..{data.n_rows - 1})")
    x = data.X[instance_idx]

    # Local pass: both methods on the named instance.
    local_res = cafa_local(x, model, schema, cfg, data=data)
    ldir = out_dir / "local" / "cafa"
    ldir.mkdir(parents=True, exist_ok=True)
    write_attribution_csv(ldir / "attribution.csv", local_res.attribution, names)
    write_attribution_json(
        ldir / "attribution.json",
        local_res.attribution,
        names,
        extra={
            "zeros_enforced": [names[j] for j in schema.uncontrollable_idx],
            "neighborhood": {**local_res.neighborhood.stats, "pi": local_res.pi, "k": cfg.k},
            "surrogate_accuracy": local_res.surrogate_quality,
        },
    )
    render_local_charts(
        ldir, local_res.attribution, names, per_row_phi=local_res.per_row_phi, timestamp=timestamp
    )
    write_run_meta(
        ldir / "run_meta.json",
        {
            "command": "experiment.local.cafa",
            "instance": instance_idx,
            "config": cfg.to_dict(),
            "pi": local_res.pi,
            "neighborhood_stats": local_res.neighborhood.stats,
            "surrogate_accuracy": local_res.surrogate_quality,
        },
    )

    shap_attr = standard_shap(x, model, schema, cfg, data=data)
    sdir = out_dir / "local" / "shap"
    sdir.mkdir(parents=True, exist_ok=True)
    write_attribution_csv(sdir / "attribution.csv", shap_attr, names)
    write_attribution_json(sdir / "attribution.json", shap_attr, names)
    render_local_charts(sdir, shap_attr, names, per_row_phi=None, timestamp=timestamp)
    write_run_meta(
        sdir / "run_meta.json",
        {"command": "experiment.local.shap", "instance": instance_idx, "config": cfg.to_dict()},
    )

    # Global pass over a seeded sample of training rows.
    n_sample = int(doc["sample"])
    if not 1 <= n_sample <= data.n_rows:
        raise UsageError(f"sample must be in 1..{data.n_rows}, got {n_sample}")
    rng = np.random.default_rng(derive_seed(seed, 100))
    sample_idx = np.sort(rng.choice(data.n_rows, size=n_sample, replace=False))

    gres = cafa_global(data.X[sample_idx], model, schema, cfg, data=data)
    gdir = out_dir / "global" / "cafa"
    gdir.mkdir(parents=True, exist_ok=True)
    write_global_csv(gdir / "attribution.csv", names, gres.mean_phi, gres.mean_abs_phi)
    per_instance_phi = np.stack([r.attribution.phi for _, r in gres.per_instance])
    _write_global_json(gdir / "attribution.json", "cafa", names, gres.mean_phi, gres.mean_abs_phi,
                       n_explained=gres.n_explained, skipped=list(gres.skipped), seed=seed)
    render_global_charts(gdir, names, gres.mean_phi, per_instance_phi, timestamp=timestamp)
    write_run_meta(
        gdir / "run_meta.json",
        {
            "command": "experiment.global.cafa",
            "sample_rows": [int(i) for i in sample_idx],
            "config": cfg.to_dict(),
            "pi": gres.pi,
            "n_explained": gres.n_explained,
            "skipped": [[int(i), msg] for i, msg in gres.skipped],
        },
    )

    shap_attrs = []
    for pos, i in enumerate(sample_idx):
        sub = dataclasses.replace(cfg, seed=derive_seed(seed, 101, pos))
        shap_attrs.append(standard_shap(data.X[i], model, schema, sub, data=data))
    sagg = global_explanation(shap_attrs)
    sgdir = out_dir / "global" / "shap"
    sgdir.mkdir(parents=True, exist_ok=True)
    write_global_csv(sgdir / "attribution.csv", names, sagg.mean_phi, sagg.mean_abs_phi)
    _write_global_json(sgdir / "attribution.json", "shap", names, sagg.mean_phi,
                       sagg.mean_abs_phi, n_explained=sagg.n_instances, skipped=[], seed=seed)
    render_global_charts(
        sgdir, names, sagg.mean_phi, np.stack([a.phi for a in shap_attrs]), timestamp=timestamp
    )
    write_run_meta(
        sgdir / "run_meta.json",
        {
            "command": "experiment.global.shap",
            "sample_rows": [int(i) for i in sample_idx],
            "config": cfg.to_dict(),
        },
    )

    write_run_meta(
        out_dir / "run_meta.json",
        {
            "command": "experiment",
            "config": {
                "dataset": doc["dataset"],
                "model": model_params.to_dict(),
                "cafa": cfg.to_dict(),
                "sample": n_sample,
                "instance": instance_idx,
                "out_dir": str(out_dir),
                "seed": seed,
            },
            "train_accuracy": train_acc,
            "n_rows": data.n_rows,
            "n_features": len(names),
        },
    )
    return out_dir


def _write_global_json(path, method, names, mean_phi, mean_abs_phi, n_explained, skipped, seed):
    doc = {
        "method": method,
        "aggregate": "mean over instances",
        "n_explained": int(n_explained),
        "skipped": [[int(i), str(m)] for i, m in skipped],
        "seed": int(seed),
        "phi": [
            {"feature": n, "mean": float(v), "mean_abs": float(a)}
            for n, v, a in zip(names, mean_phi, mean_abs_phi)
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
