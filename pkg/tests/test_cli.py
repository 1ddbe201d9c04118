import csv
import json
import subprocess
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np
import pytest
import yaml

from eta_stack import cli
from eta_stack.config import ConfigError, from_dict, load_config, profile

SMALL = {
    "profile": "desk",
    "data": {"synthetic": {"n_trips": 3000}},
    "xai": {"lime_samples": 300, "shap_coalitions": 1024, "background_size": 8, "bl_background_size": 8},
    "scenarios": {"n_per_side": 3},
}
STAGES = ["prepare", "train", "evaluate", "explain", "join", "scenario", "export"]


def write_config(path: Path, out: Path, **over) -> Path:
    cfg = json.loads(json.dumps(SMALL))
    cfg.update(over)
    cfg["out"] = str(out)
    path.write_text(yaml.safe_dump(cfg))
    return path


def run_all(cfg_path):
    codes = []
    for stage in STAGES:
        argv = [stage, "--config", str(cfg_path)] + (["--synthetic"] if stage == "prepare" else [])
        codes.append(cli.main(argv))
    return codes


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    cfg = write_config(root / "config.yaml", root / "out")
    assert run_all(cfg) == [0] * len(STAGES)
    return root / "out", cfg


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# configuration

def test_default_profile():
    cfg = profile("paper-nyc")
    assert [s.name for s in cfg.l1_specs()] == ["L1-RF", "L1-XGBoost", "L1-NN"]
    assert [s.name for s in cfg.l2_specs()] == ["L2-MLR", "L2-RF", "L2-XGBoost", "L2-NN"]
    assert cfg.l1_specs()[0].hyper["n_trees"] == 300 and cfg.l2_specs()[3].hyper["hidden"] == [50, 25]
    assert cfg.joining.beta == 0.5 and cfg.xai.background_size == 100


def test_config_hash_ignores_out():
    a, b = profile("desk"), profile("desk")
    b.out = "elsewhere"
    assert a.config_hash() == b.config_hash()
    b.seed = 1
    assert a.config_hash() != b.config_hash()


@pytest.mark.parametrize("bad", [
    {"nonsense": 1},
    {"xai": {"methods": ["anchors"]}},
    {"joining": {"beta": -1}},
    {"l1": [{"name": "only", "family": "linear", "params": {}}]},
    {"xai": {"explain_l2": "L2-missing"}},
    {"scenarios": {"ids": ["SC9"]}},
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        from_dict(bad)


def test_load_config_errors(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_config(p)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.yaml")


# exit codes

def test_exit_usage(capsys):
    assert cli.main(["frobnicate"]) == 2
    assert cli.main([]) == 2


def test_exit_config(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("xai: {methods: [anchors]}\n")
    assert cli.main(["train", "--config", str(bad)]) == 3


def test_exit_missing_artifact(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", tmp_path / "empty")
    for stage in ("train", "evaluate", "explain", "join", "scenario", "export"):
        assert cli.main([stage, "--config", str(cfg)]) == 4
    # a failed stage leaves no published or staged output behind
    assert sorted(p.name for p in (tmp_path / "empty").iterdir()) == []


def test_prepare_without_inputs_is_missing(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", tmp_path / "o")
    assert cli.main(["prepare", "--config", str(cfg)]) == 4


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "eta_stack", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "prepare" in r.stdout


def test_lock_refuses_concurrent_run(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", tmp_path / "o")
    (tmp_path / "o").mkdir()
    (tmp_path / "o" / ".lock").write_text("1")
    assert cli.main(["prepare", "--synthetic", "--config", str(cfg)]) == 1


# pipeline artifacts

def test_all_stage_directories(pipeline_run):
    out, _ = pipeline_run
    for d in ("data", "models", "reports", "explain", "join", "scenarios", "export"):
        assert (out / d).is_dir()
    assert not list(out.glob(".staging-*")) and not (out / ".lock").exists()


def test_evaluate_seven_rows(pipeline_run):
    out, cfg = pipeline_run
    rows = read_csv(out / "reports" / "metrics.csv")
    assert [r["model"] for r in rows] == ["L1-RF", "L1-XGBoost", "L1-NN", "L2-MLR", "L2-RF", "L2-XGBoost", "L2-NN"]
    assert all(float(r["mae_s"]) > 0 and float(r["mre"]) > 0 and float(r["mape_pct"]) > 0 for r in rows)
    h = load_config(cfg).config_hash()
    assert all(r["config_hash"] == h and r["seed"] == "0" for r in rows)


def test_training_report_has_validation_metrics(pipeline_run):
    out, _ = pipeline_run
    rep = json.loads((out / "models" / "training_report.json").read_text())
    assert len(rep["l1"]) == 3 and len(rep["l2"]) == 4
    assert all(m["validation"]["mae_s"] > 0 for m in rep["l1"] + rep["l2"])
    assert "out" not in rep["provenance"]


def test_filter_report_and_rejects(pipeline_run):
    out, _ = pipeline_run
    rep = json.loads((out / "data" / "filter_report.json").read_text())
    assert rep["n_kept"] == rep["n_in"] - len(rep["rejects"]) > 0
    assert set(rep["counts"]) >= {"zero distance", "speed out of bounds"}
    assert (out / "data" / "parse_rejects.csv").read_text().startswith("row,reason")


def test_explanations_local_accuracy(pipeline_run):
    out, _ = pipeline_run
    docs = sorted((out / "explain" / "shap").glob("sample_*.json"))
    assert len(docs) > 0
    for p in docs:
        d = json.loads(p.read_text())
        for part in [d["l2"], d["bl"]]:
            assert part["extra"]["mode"] == "exact"
            total = part["base_value"] + sum(f["attribution"] for f in part["features"])
            assert total == pytest.approx(d["prediction"], rel=1e-8)


def test_jm2_equals_jm1_column_sums(pipeline_run):
    out, _ = pipeline_run
    for method in ("lime", "shap"):
        sums = defaultdict(float)
        for r in read_csv(out / "join" / f"{method}_jm1.csv"):
            sums[(r["sample_id"], r["feature"])] += float(r["value"])
        jm2 = read_csv(out / "join" / f"{method}_jm2.csv")
        assert len(jm2) == len(sums)
        for r in jm2:
            assert float(r["value"]) == pytest.approx(sums[(r["sample_id"], r["feature"])], rel=1e-12, abs=1e-9)


def test_scenario_reports(pipeline_run):
    out, _ = pipeline_run
    rep = json.loads((out / "scenarios" / "separation.json").read_text())
    models = {r["model"] for r in rep["reports"]}
    assert models == {"L1-RF", "L1-XGBoost", "L1-NN", "JM2", "JM3", "BL"}
    assert {r["scenario"] for r in rep["reports"]} == {"SC1", "SC2", "SC3", "SC4"}
    rows = read_csv(out / "scenarios" / "samples_SC2.csv")
    assert len(rows) == 6 and {r["characteristic"] for r in rows} == {"lower", "higher"}


def test_export_tables(pipeline_run):
    out, _ = pipeline_run
    joined = read_csv(out / "export" / "joined_shap.csv")
    assert {r["method"] for r in joined} == {"JM1", "JM2", "JM3", "BL"}
    l1 = read_csv(out / "export" / "l1_lime.csv")
    assert {r["model"] for r in l1} == {"L1-RF", "L1-XGBoost", "L1-NN"}


def test_explain_single_sample(pipeline_run, tmp_path):
    out, cfg = pipeline_run
    sid = json.loads(next((out / "explain" / "shap").glob("sample_*.json")).read_text())["sample_id"]
    assert cli.main(["explain", "--config", str(cfg), "--sample", str(sid), "--method", "shap",
                     "--out", str(out)]) == 0
    files = list((out / "explain").rglob("sample_*.json"))
    assert [p.name for p in files] == [f"sample_{sid}.json"]
    d = json.loads(files[0].read_text())
    total = d["bl"]["base_value"] + sum(f["attribution"] for f in d["bl"]["features"])
    assert total == pytest.approx(d["prediction"], rel=1e-8)
    # scenarios now lack explanations for their trips
    assert cli.main(["scenario", "--config", str(cfg)]) == 4
    assert cli.main(["explain", "--config", str(cfg), "--sample", "-5"]) == 4
    # restore the full explanation set for later tests
    assert cli.main(["explain", "--config", str(cfg)]) == 0


def test_byte_identical_reruns(pipeline_run, tmp_path):
    out, _ = pipeline_run
    cfg2 = write_config(tmp_path / "c.yaml", tmp_path / "again")
    assert run_all(cfg2) == [0] * len(STAGES)
    first = {p.relative_to(out): p.read_bytes() for p in out.rglob("*") if p.is_file() and p.suffix == ".csv"}
    second = {p.relative_to(tmp_path / "again"): p.read_bytes()
              for p in (tmp_path / "again").rglob("*") if p.is_file() and p.suffix == ".csv"}
    assert first.keys() == second.keys() and len(first) > 10
    assert [k for k in first if first[k] != second[k]] == []
