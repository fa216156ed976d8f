"""Batch CLI: flows, artifacts, reproducibility, exit codes."""

import csv
import json

import numpy as np
import pytest

from cafa.bench import SynthSpec, generate_synth
from cafa.cli import main
from cafa.forest import RandomForest
from cafa.schema import dataset_to_raw_csv, ingestion_spec_for

FAST = [
    "--k", "25", "--pi", "0.5", "--n-perms", "4", "--background", "30",
    "--surrogate-trees", "25", "--surrogate-depth", "6",
]


def _read(p):
    return p.read_bytes()


def _json(p):
    return json.loads(p.read_text())


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    """Shared workspace: synthetic CSV + spec + trained model, all via the CLI."""
    root = tmp_path_factory.mktemp("cli")
    data, spec, model = root / "data.csv", root / "spec.json", root / "model.json"
    assert main(["synth", "--rows", "300", "--controllable", "3", "--uncontrollable", "1",
                 "--seed", "0", "--out", str(data), "--spec-out", str(spec)]) == 0
    assert main(["train", "--data", str(data), "--spec", str(spec),
                 "--out", str(model), "--trees", "30", "--depth", "6", "--seed", "0"]) == 0
    return {"root": root, "data": str(data), "spec": str(spec), "model": str(model)}


def _explain(ws, out_dir, *extra):
    return main(["explain", "--data", ws["data"], "--spec", ws["spec"],
                 "--model", ws["model"], "--out-dir", str(out_dir),
                 "--seed", "7", *FAST, *extra])


def test_synth_is_reproducible(ws, tmp_path):
    data2, spec2 = tmp_path / "d.csv", tmp_path / "s.json"
    assert main(["synth", "--rows", "300", "--controllable", "3", "--uncontrollable", "1",
                 "--seed", "0", "--out", str(data2), "--spec-out", str(spec2)]) == 0
    root = ws["root"]
    assert _read(data2) == _read(root / "data.csv")
    assert _read(spec2) == _read(root / "spec.json")


def test_synth_covid_kind(tmp_path):
    out = tmp_path / "covid.csv"
    assert main(["synth", "--kind", "covid", "--out", str(out)]) == 0
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 3937 and len(rows[0]) == 18  # header + 17 features + label


def test_train_model_round_trips(ws, tmp_path):
    model = RandomForest.load(ws["model"])
    assert model.schema.names == ("u0", "c0", "c1", "c2")
    again = tmp_path / "model2.json"
    assert main(["train", "--data", ws["data"], "--spec", ws["spec"],
                 "--out", str(again), "--trees", "30", "--depth", "6", "--seed", "0"]) == 0
    assert _read(again) == _read(ws["root"] / "model.json")


def test_explain_cafa_artifacts_and_reruns(ws, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _explain(ws, a, "--method", "cafa", "--instance", "5") == 0
    assert _explain(ws, b, "--method", "cafa", "--instance", "5") == 0
    names = ("attribution.csv", "attribution.json", "bars.svg", "summary.svg", "run_meta.json")
    for name in names:
        assert (a / name).exists(), name
        assert _read(a / name) == _read(b / name), name
    doc = _json(a / "attribution.json")
    assert doc["method"] == "cafa"
    by_name = {e["feature"]: e["value"] for e in doc["phi"]}
    assert by_name["u0"] == 0.0
    meta = _json(a / "run_meta.json")
    assert meta["zeros_enforced"] == ["u0"]
    assert meta["config"]["seed"] == 7


def test_explain_seed_changes_output(ws, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _explain(ws, a, "--method", "cafa", "--instance", "5") == 0
    assert main(["explain", "--data", ws["data"], "--spec", ws["spec"],
                 "--model", ws["model"], "--out-dir", str(b),
                 "--seed", "8", *FAST, "--method", "cafa", "--instance", "5"]) == 0
    assert _read(a / "attribution.csv") != _read(b / "attribution.csv")


def test_explain_shap(ws, tmp_path):
    out = tmp_path / "s"
    assert _explain(ws, out, "--method", "shap", "--instance", "5") == 0
    doc = _json(out / "attribution.json")
    assert doc["method"] == "exact-shap"  # 4 features, exact path
    assert not (out / "summary.svg").exists()  # no per-row attributions here


def test_explain_lime(ws, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert _explain(ws, d, "--method", "lime", "--instance", "5",
                        "--lime-samples", "400") == 0
    assert _json(a / "attribution.json")["method"] == "lime"
    assert _read(a / "attribution.csv") == _read(b / "attribution.csv")


def test_explain_instance_from_json_file(ws, tmp_path):
    with open(ws["data"], newline="") as fh:
        rows = list(csv.DictReader(fh))
    raw = {k: v for k, v in rows[0].items() if k != "class"}
    inst = tmp_path / "instance.json"
    inst.write_text(json.dumps(raw))
    a, b = tmp_path / "a", tmp_path / "b"
    assert _explain(ws, a, "--method", "shap", "--instance", str(inst)) == 0
    assert _explain(ws, b, "--method", "shap", "--instance", "0") == 0
    assert _read(a / "attribution.csv") == _read(b / "attribution.csv")


def test_global_flow(ws, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    argv = ["global", "--data", ws["data"], "--spec", ws["spec"], "--model", ws["model"],
            "--sample", "4", "--seed", "1", *FAST]
    assert main(argv + ["--out-dir", str(a)]) == 0
    assert main(argv + ["--out-dir", str(b)]) == 0
    for name in ("attribution.csv", "attribution.json", "bars.svg", "summary.svg",
                 "run_meta.json"):
        assert _read(a / name) == _read(b / name), name
    meta = _json(a / "run_meta.json")
    assert len(meta["sample_rows"]) == 4
    doc = _json(a / "attribution.json")
    assert doc["method"] == "cafa-global"
    assert doc["n_explained"] + len(doc["skipped"]) == 4
    assert {e["feature"]: e["mean_abs"] for e in doc["phi"]}["u0"] == 0.0


def test_compare_flow(ws, tmp_path):
    out = tmp_path / "cmp"
    assert main(["compare", "--data", ws["data"], "--spec", ws["spec"],
                 "--model", ws["model"], "--instance", "5", "--out-dir", str(out),
                 "--seed", "7", *FAST]) == 0
    for name in ("attribution.csv", "attribution.json", "shap.csv", "shap.json",
                 "bars.svg", "summary.svg", "run_meta.json"):
        assert (out / name).exists(), name
    meta = _json(out / "run_meta.json")
    assert -1.0 <= meta["pearson_controllable"] <= 1.0
    assert meta["controllable"] == ["c0", "c1", "c2"]


def test_timestamp_flag_changes_only_svg_comment(ws, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _explain(ws, a, "--method", "cafa", "--instance", "5") == 0
    assert _explain(ws, b, "--method", "cafa", "--instance", "5", "--timestamp") == 0
    assert _read(a / "attribution.csv") == _read(b / "attribution.csv")
    assert _read(a / "attribution.json") == _read(b / "attribution.json")
    sa = (a / "bars.svg").read_text()
    sb = (b / "bars.svg").read_text()
    assert "<!-- generated " not in sa and "<!-- generated " in sb
    strip = lambda s: [l for l in s.splitlines() if not l.startswith("<!--")]
    assert strip(sa) == strip(sb)


# -- experiment driver -------------------------------------------------------


def _experiment_config(out_dir):
    return {
        "dataset": {"kind": "synth", "m_controllable": 3, "m_uncontrollable": 1,
                    "n_rows": 250, "seed": 2},
        "model": {"n_trees": 25, "max_depth": 6},
        "cafa": {"k": 20, "pi": 0.5, "n_perms": 4, "background_size": 25,
                 "surrogate_params": {"n_trees": 20, "max_depth": 5}},
        "sample": 3,
        "instance": 1,
        "out_dir": str(out_dir),
        "seed": 0,
    }


def test_experiment_flow(tmp_path):
    outs = []
    for tag in ("e1", "e2"):
        cfg = tmp_path / f"{tag}.json"
        out = tmp_path / tag
        cfg.write_text(json.dumps(_experiment_config(out)))
        assert main(["experiment", str(cfg)]) == 0
        outs.append(out)
    a, b = outs
    tree = {
        "local/cafa": ("attribution.csv", "attribution.json", "bars.svg", "summary.svg",
                       "run_meta.json"),
        "local/shap": ("attribution.csv", "attribution.json", "bars.svg", "run_meta.json"),
        "global/cafa": ("attribution.csv", "attribution.json", "bars.svg", "summary.svg",
                        "run_meta.json"),
        "global/shap": ("attribution.csv", "attribution.json", "bars.svg", "summary.svg",
                        "run_meta.json"),
    }
    for sub, names in tree.items():
        for name in names:
            assert (a / sub / name).exists(), f"{sub}/{name}"
            fa, fb = (a / sub / name).read_bytes(), (b / sub / name).read_bytes()
            assert fa == fb, f"{sub}/{name}"
    meta_a = _json(a / "run_meta.json")
    meta_b = _json(b / "run_meta.json")
    meta_a["config"]["out_dir"] = meta_b["config"]["out_dir"] = ""
    assert meta_a == meta_b
    doc = _json(a / "local" / "cafa" / "attribution.json")
    assert doc["zeros_enforced"] == ["u0"]


def test_experiment_empty_config(tmp_path, capsys):
    cfg = tmp_path / "empty.json"
    cfg.write_text("{}")
    assert main(["experiment", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "required" in err
    for key in ("dataset", "model", "cafa", "sample", "out_dir"):
        assert key in err


def test_experiment_missing_keys_listed(tmp_path, capsys):
    cfg = tmp_path / "partial.json"
    cfg.write_text(json.dumps({"dataset": {"kind": "synth"}, "model": {}}))
    assert main(["experiment", str(cfg)]) == 2
    assert "missing keys" in capsys.readouterr().err


def test_experiment_invalid_json(tmp_path):
    cfg = tmp_path / "broken.json"
    cfg.write_text("{not json")
    assert main(["experiment", str(cfg)]) == 3


# -- exit codes ---------------------------------------------------------------


def test_usage_errors_exit_2(ws, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["explain", "--data", ws["data"]])  # missing required flags
    assert exc.value.code == 2
    out = str(tmp_path / "o")
    assert main(["global", "--data", ws["data"], "--spec", ws["spec"],
                 "--model", ws["model"], "--sample", "0", "--out-dir", out]) == 2
    assert _explain(ws, tmp_path / "x", "--instance", "9999") == 2
    assert main(["explain", "--data", ws["data"], "--spec", ws["spec"],
                 "--model", ws["model"], "--out-dir", out, "--instance", "0",
                 "--pi", "bogus"]) == 2


def test_data_errors_exit_3(ws, tmp_path):
    out = str(tmp_path / "o")
    assert main(["explain", "--data", str(tmp_path / "missing.csv"), "--spec", ws["spec"],
                 "--model", ws["model"], "--out-dir", out, "--instance", "0"]) == 3
    assert main(["train", "--data", ws["data"], "--spec", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path / "m.json")]) == 3


def test_model_errors_exit_4(ws, tmp_path):
    garbage = tmp_path / "model.json"
    garbage.write_text("this is not a model")
    assert _explain(ws, tmp_path / "o", "--instance", "0",
                    "--model", str(garbage)) == 4
    assert _explain(ws, tmp_path / "o2", "--instance", "0",
                    "--model", str(tmp_path / "absent.json")) == 4


def test_explanation_error_exit_5(tmp_path, capsys):
    # label depends only on the uncontrollable feature, so with it pinned the
    # model is constant and no balanced neighborhood exists
    data = generate_synth(SynthSpec(
        m_controllable=1, m_uncontrollable=1, n_rows=300, seed=3,
        kinds=("cont", "cont"), rule_features=(0,), rule_weights=(1.0,),
    ))
    csv_path, spec_path = tmp_path / "d.csv", tmp_path / "s.json"
    dataset_to_raw_csv(data, csv_path)
    spec_path.write_text(json.dumps(ingestion_spec_for(data).to_dict()))
    model_path = tmp_path / "m.json"
    assert main(["train", "--data", str(csv_path), "--spec", str(spec_path),
                 "--out", str(model_path), "--trees", "30", "--depth", "6"]) == 0
    idx = int(np.argmin(data.X[:, 0]))  # far from the label boundary
    rc = main(["explain", "--data", str(csv_path), "--spec", str(spec_path),
               "--model", str(model_path), "--out-dir", str(tmp_path / "o"),
               "--instance", str(idx), "--method", "cafa",
               "--k", "10", "--pi", "0.3", "--n-perms", "2", "--background", "10"])
    assert rc == 5
    assert "attempts" in capsys.readouterr().err
