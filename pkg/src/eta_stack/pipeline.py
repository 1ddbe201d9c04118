"""Pipeline stages behind the command line.

Each stage reads the published artifacts of earlier stages from ``root``
and writes its own into ``stage`` (a scratch directory the caller
publishes atomically). Artifacts carry the config hash and seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import joining, metrics, scenarios, stack
from .config import RunConfig
from .explain import BackgroundSet, Explanation, explain, explanations_long_csv
from .ingest import (
    DatasetBundle,
    Dataset,
    attach_temperature,
    build_dataset,
    default_schema,
    filter_outliers,
    load_bundle,
    parse_trips,
    read_weather,
    save_bundle,
    write_trips_csv,
    write_weather,
)
from .synthetic import generate

DATA_DIR, MODEL_DIR, REPORT_DIR = "data", "models", "reports"
EXPLAIN_DIR, JOIN_DIR, SCENARIO_DIR, EXPORT_DIR = "explain", "join", "scenarios", "export"
STAGE_OUTPUT = {"prepare": DATA_DIR, "train": MODEL_DIR, "evaluate": REPORT_DIR, "explain": EXPLAIN_DIR,
                "join": JOIN_DIR, "scenario": SCENARIO_DIR, "export": EXPORT_DIR}


class MissingArtifactError(FileNotFoundError):
    pass


@dataclass
class Context:
    config: RunConfig
    root: Path
    stage: Path

    @property
    def tags(self) -> dict:
        return {"config_hash": self.config.config_hash(), "seed": self.config.seed}

    def provenance(self) -> dict:
        d = self.config.to_dict()
        d.pop("out")
        return {**self.tags, "config": d}

    def need(self, *parts) -> Path:
        p = self.root.joinpath(*parts)
        if not p.exists():
            raise MissingArtifactError(f"missing upstream artifact {p}; run the earlier stage first")
        return p

    def write_json(self, name: str, obj) -> None:
        path = self.stage / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")

    def write_text(self, name: str, text: str) -> None:
        path = self.stage / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def _read_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))


# prepare

def prepare(ctx: Context, synthetic: bool = False) -> dict:
    cfg = ctx.config
    if synthetic:
        data = generate(cfg.synthetic_config())
        raw = ctx.stage / "raw"
        raw.mkdir(parents=True, exist_ok=True)
        trips_path, weather_path = raw / "trips.csv", raw / "weather.csv"
        write_trips_csv(trips_path, data.trips)
        write_weather(weather_path, data.weather)
        ctx.write_json("raw/synthetic.json", {**ctx.tags, "constants": data.constants(),
                                              "planted": {str(k): v for k, v in data.planted.items()}})
        fmt, label = "generic", "synthetic"
    else:
        if not cfg.data.trips or not cfg.data.weather:
            raise MissingArtifactError("data.trips and data.weather must name input files (or use --synthetic)")
        trips_path, weather_path = Path(cfg.data.trips), Path(cfg.data.weather)
        for p in (trips_path, weather_path):
            if not p.exists():
                raise MissingArtifactError(f"missing input file {p}")
        fmt, label = cfg.data.format, trips_path.stem

    parsed = parse_trips(trips_path, fmt)
    weather = read_weather(weather_path)
    trips, no_weather = attach_temperature(parsed.records, weather)
    kept, report = filter_outliers(trips, cfg.outlier_criteria())
    schema = default_schema(cfg.box(), cfg.schema.cell_size)
    train, val, test = build_dataset(kept, schema, cfg.split_spec())
    save_bundle(ctx.stage, DatasetBundle(train, val, test, meta={**ctx.tags, "dataset": label,
                                                                         "split": cfg.split_spec().to_dict(),
                                                                         "filter": report.to_dict()["counts"]}))
    rejects = ["row,reason"] + [f"{r.row},{r.reason}" for r in parsed.rejects + no_weather]
    ctx.write_text("parse_rejects.csv", "\n".join(rejects) + "\n")
    ctx.write_json("filter_report.json", {**ctx.tags, **report.to_dict(),
                                          "parse_rejects": len(parsed.rejects), "no_weather": len(no_weather)})
    return {"train": len(train), "validation": len(val), "test": len(test), "filtered": report.n_in - report.n_kept}


def load_data(ctx: Context) -> DatasetBundle:
    ctx.need(DATA_DIR, "dataset.json")
    return load_bundle(ctx.root / DATA_DIR)


# train / evaluate

def train(ctx: Context) -> dict:
    bundle = load_data(ctx)
    ensembles = stack.train_stacked_ensembles(bundle.train, bundle.validation, ctx.config.l1_specs(),
                                              ctx.config.l2_specs())
    stack.save(ensembles, ctx.stage / "ensemble.json")
    first = ensembles[0]
    val = bundle.validation
    P = first.level1(val)

    def scores(pred):
        m = metrics.compute_metrics(val.y, pred)
        return {"mae_s": m.mae, "mre": m.mre, "mape_pct": m.mape_pct, "n": m.n}

    # level-2 scores on validation are in-sample: the combiner was fitted on these rows
    report = {**ctx.tags,
              "l1": [{"name": m.name, "family": m.spec.family, "validation": scores(P[:, j]), "meta": m.meta}
                     for j, m in enumerate(first.l1_models)],
              "l2": [{"name": e.name, "family": e.l2_model.spec.family,
                      "validation": scores(e.l2_model.predict(P)), "meta": e.l2_model.meta} for e in ensembles],
              "provenance": ctx.provenance()}
    ctx.write_json("training_report.json", report)
    return {"l2_models": [e.name for e in ensembles]}


def load_ensembles(ctx: Context, bundle: DatasetBundle | None = None) -> list[stack.StackedEnsemble]:
    path = ctx.need(MODEL_DIR, "ensemble.json")
    fp = bundle.train.schema.fingerprint() if bundle is not None else None
    return stack.load_all(path, fp)


def evaluate(ctx: Context) -> dict:
    bundle = load_data(ctx)
    ensembles = load_ensembles(ctx, bundle)
    test = bundle.test
    label = bundle.meta.get("dataset", "test")
    P = ensembles[0].level1(test)
    rows = [metrics.ReportRow(m.name, label, metrics.compute_metrics(test.y, P[:, j]))
            for j, m in enumerate(ensembles[0].l1_models)]
    rows += [metrics.ReportRow(e.name, label, metrics.compute_metrics(test.y, e.l2_model.predict(P)))
             for e in ensembles]
    ctx.write_text("metrics.csv", metrics.report_csv(rows, ctx.tags))
    ctx.write_text("metrics.txt", metrics.report_text(rows))
    return {"rows": len(rows)}


# explain

def _select(ensembles, name: str) -> stack.StackedEnsemble:
    for e in ensembles:
        if e.name == name:
            return e
    raise MissingArtifactError(f"level-2 model {name!r} not found in the trained ensembles")


def scenario_samples(bundle: DatasetBundle, cfg: RunConfig) -> dict[str, scenarios.ScenarioSamples]:
    specs = scenarios.builtin_scenarios(cfg.scenarios.n_per_side, cfg.scenarios.seed)
    return {sid: scenarios.select_scenario_samples(bundle.test, specs[sid]) for sid in cfg.scenarios.ids}


def explain_sample(ensemble: stack.StackedEnsemble, x: np.ndarray, sample_id: int, method: str,
                   background: BackgroundSet, bl_background: BackgroundSet, cfg: RunConfig) -> dict:
    """Level-1, level-2 and baseline explanations of one schema row."""
    xai = cfg.xai
    seed = cfg.seed
    kw = dict(seed=seed, lime_samples=xai.lime_samples, kernel_width=xai.kernel_width,
              shap_coalitions=xai.shap_coalitions, sample_id=sample_id)
    names = ensemble.schema.names
    l1 = []
    for m in ensemble.l1_models:
        cols = [names.index(n) for n in m.features]
        l1.append(explain(method, m.predict_features, x[cols], background.select(m.features), model=m.name, **kw))
    P_bg = ensemble.level1(background.rows)
    l2_bg = BackgroundSet.from_data(P_bg, ensemble.l1_names, k=P_bg.shape[0], seed=seed)
    p = ensemble.level1(x[None, :])[0]
    l2 = explain(method, ensemble.l2_model.predict_features, p, l2_bg, model=ensemble.name, **kw)
    bl = joining.baseline_explain(ensemble, x, method, bl_background, **{k: v for k, v in kw.items()})
    return {"sample_id": int(sample_id), "method": method, "prediction": float(l2.prediction),
            "l1": [e.to_dict() for e in l1], "l2": l2.to_dict(), "bl": bl.to_dict()}


def explain_stage(ctx: Context, sample_ids=None, methods=None) -> dict:
    cfg = ctx.config
    bundle = load_data(ctx)
    ensemble = _select(load_ensembles(ctx, bundle), cfg.xai.explain_l2)
    test = bundle.test
    if sample_ids:
        pos = {int(t): i for i, t in enumerate(test.ids)}
        missing = [s for s in sample_ids if s not in pos]
        if missing:
            raise MissingArtifactError(f"sample ids not in the test split: {missing}")
        rows = [pos[s] for s in sample_ids]
    else:
        picked = scenario_samples(bundle, cfg)
        rows = sorted({int(r) for s in picked.values() for side in scenarios.SIDES for r in s.side(side)})
    methods = methods or cfg.xai.methods
    names = bundle.train.schema.names
    background = BackgroundSet.from_data(bundle.train.X, names, k=cfg.xai.background_size, seed=cfg.seed)
    bl_background = BackgroundSet.from_data(bundle.train.X, names, k=cfg.xai.bl_background_size,
                                            seed=cfg.seed).select(joining.baseline_features(bundle.train.schema))
    flat = []
    for method in methods:
        for r in rows:
            sid = int(test.ids[r])
            doc = explain_sample(ensemble, test.X[r], sid, method, background, bl_background, cfg)
            ctx.write_json(f"{method}/sample_{sid}.json", {**ctx.tags, "l2_model": ensemble.name, **doc})
            flat += [Explanation.from_dict(d) for d in doc["l1"]]
            flat.append(Explanation.from_dict(doc["l2"]))
            flat.append(Explanation.from_dict(doc["bl"]))
    ctx.write_text("explanations.csv", _tag_csv(explanations_long_csv(flat), ctx.tags))
    return {"samples": len(rows), "methods": list(methods)}


def _tag_csv(text: str, tags: dict) -> str:
    lines = text.splitlines()
    head = lines[0] + "," + ",".join(tags)
    tail = "," + ",".join(str(v) for v in tags.values())
    return "\n".join([head] + [ln + tail for ln in lines[1:]]) + "\n"


def load_explanations(ctx: Context) -> dict:
    """(method, sample_id) -> explanation document."""
    base = ctx.need(EXPLAIN_DIR)
    out = {}
    for p in sorted(base.glob("*/sample_*.json")):
        doc = _read_json(p)
        out[(doc["method"], int(doc["sample_id"]))] = doc
    if not out:
        raise MissingArtifactError(f"no explanations under {base}")
    return out


# join

JM_CHOICES = ("1", "2", "3", "bl")


def join_sample(doc: dict, cfg: RunConfig, schema) -> dict[str, joining.JoinedExplanation]:
    l1 = [Explanation.from_dict(d) for d in doc["l1"]]
    l2 = Explanation.from_dict(doc["l2"])
    w = joining.normalize_level2(l2)
    jc = cfg.joining
    return {
        "1": joining.join_jm1(l1, w, schema),
        "2": joining.join_jm2(l1, w, schema),
        "3": joining.join_jm3(l1, w, jc.beta, jc.shrink, jc.redistribute, schema),
        "bl": joining.JoinedExplanation.from_explanation(Explanation.from_dict(doc["bl"])),
        "weights": w,
    }


def join_stage(ctx: Context, jms=None) -> dict:
    bundle = load_data(ctx)
    schema = bundle.train.schema
    docs = load_explanations(ctx)
    jms = jms or list(JM_CHOICES)
    per = {(m, j): [] for m in sorted({k[0] for k in docs}) for j in jms}
    weights = []
    for (method, sid), doc in sorted(docs.items()):
        joined = join_sample(doc, ctx.config, schema)
        w = joined["weights"]
        weights.append({"method": method, "sample_id": sid, **w.to_dict()})
        for j in jms:
            per[(method, j)].append(joined[j])
    for (method, j), items in per.items():
        ctx.write_text(f"{method}_jm{j}.csv" if j != "bl" else f"{method}_bl.csv",
                       joining.joined_long_csv(items, ctx.tags))
    ctx.write_json("weights.json", {**ctx.tags, "joining": ctx.config.to_dict()["joining"], "weights": weights})
    return {"files": len(per)}


# scenario

def scenario_stage(ctx: Context) -> dict:
    cfg = ctx.config
    bundle = load_data(ctx)
    docs = load_explanations(ctx)
    schema = bundle.train.schema
    picked = scenario_samples(bundle, cfg)
    reports = []
    methods = sorted({k[0] for k in docs})
    for sid, smp in picked.items():
        ctx.write_text(f"samples_{sid}.csv", scenarios.samples_csv(bundle.test, smp, ctx.tags))
        for method in methods:
            side_docs = {}
            for side in scenarios.SIDES:
                ids = [int(bundle.test.ids[r]) for r in smp.side(side)]
                missing = [i for i in ids if (method, i) not in docs]
                if missing:
                    raise MissingArtifactError(f"{sid}: no {method} explanations for trips {missing}; "
                                               "run explain without --sample")
                side_docs[side] = [docs[(method, i)] for i in ids]
            for label, pick in explanation_views(side_docs["lower"][0], cfg, schema):
                lo = [pick(d) for d in side_docs["lower"]]
                hi = [pick(d) for d in side_docs["higher"]]
                reports.append(scenarios.scenario_separation_report(lo, hi, smp.spec, label, method))
    ctx.write_text("separation.csv", scenarios.separation_csv(reports, ctx.tags))
    summary = [{"scenario": r.scenario, "model": r.model, "method": r.method, "margins": r.margins,
                "sign_correct": r.sign_correct} for r in reports]
    ctx.write_json("separation.json", {**ctx.tags, "reports": summary})
    return {"reports": len(reports)}


def explanation_views(doc, cfg, schema):
    """(label, doc -> attribution vector) for every level-1 model and joined method."""
    views = []
    for k, d in enumerate(doc["l1"]):
        views.append((d["model"], lambda dd, k=k: Explanation.from_dict(dd["l1"][k])))
    for j, label in (("2", "JM2"), ("3", "JM3"), ("bl", "BL")):
        views.append((label, lambda dd, j=j: join_sample(dd, cfg, schema)[j]))
    return views


# export

def export_stage(ctx: Context) -> dict:
    """Long-format tables: level-1 and joined attributions per scenario cohort."""
    cfg = ctx.config
    bundle = load_data(ctx)
    docs = load_explanations(ctx)
    schema = bundle.train.schema
    picked = scenario_samples(bundle, cfg)
    tags = ctx.tags
    tag_head = ",".join(tags)
    tag_vals = ",".join(str(v) for v in tags.values())
    methods = sorted({k[0] for k in docs})
    n = 0
    for method in methods:
        l1_lines = ["scenario,characteristic,sample_id,model,feature,value,attribution," + tag_head]
        joined_lines = ["scenario,characteristic,sample_id,method,model,feature,attribution," + tag_head]
        for sid, smp in picked.items():
            for side in scenarios.SIDES:
                for r in smp.side(side):
                    tid = int(bundle.test.ids[r])
                    doc = docs.get((method, tid))
                    if doc is None:
                        raise MissingArtifactError(f"no {method} explanation for trip {tid}")
                    for d in doc["l1"]:
                        for f in d["features"]:
                            l1_lines.append(f"{sid},{side},{tid},{d['model']},{f['name']},{f['value']!r},"
                                            f"{f['attribution']!r},{tag_vals}")
                    joined = join_sample(doc, cfg, schema)
                    for j in JM_CHOICES:
                        je = joined[j]
                        if je.method == "JM1":
                            for mdl, row in zip(je.models, je.attributions):
                                for fn, a in zip(je.feature_names, row):
                                    joined_lines.append(f"{sid},{side},{tid},JM1,{mdl},{fn},{float(a)!r},{tag_vals}")
                        else:
                            for fn, a in zip(je.feature_names, je.attributions):
                                joined_lines.append(f"{sid},{side},{tid},{je.method},,{fn},{float(a)!r},{tag_vals}")
        ctx.write_text(f"l1_{method}.csv", "\n".join(l1_lines) + "\n")
        ctx.write_text(f"joined_{method}.csv", "\n".join(joined_lines) + "\n")
        n += 2
    return {"files": n}
