"""Scenario separation margins for every level-1 model, JM2, JM3 and BL.

Trains the desk ensembles on a synthetic trip set, explains the scenario
cohorts and prints one margin per (scenario, model, method).

    python scripts/scenario_study.py --n-trips 5000 --background 50
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

from eta_stack import config, pipeline, stack
from eta_stack.explain import BackgroundSet
from eta_stack.ingest import attach_temperature, build_dataset, default_schema, filter_outliers
from eta_stack.joining import baseline_features
from eta_stack.scenarios import SIDES, builtin_scenarios, scenario_separation_report, select_scenario_samples
from eta_stack.synthetic import SyntheticConfig, generate


@dataclass
class StudyConfig:
    n_trips: int = 5000
    seed: int = 0
    n_per_side: int = 10
    background: int = 50
    bl_background: int = 20
    l2: str = "L2-NN"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for f, v in vars(StudyConfig()).items():
        ap.add_argument("--" + f.replace("_", "-"), type=type(v), default=v)
    cfg = StudyConfig(**vars(ap.parse_args(argv)))

    run = config.profile("desk")
    run.seed = cfg.seed
    run.xai.background_size = cfg.background
    run.xai.bl_background_size = cfg.bl_background
    data = generate(SyntheticConfig(n_trips=cfg.n_trips, seed=cfg.seed))
    trips, _ = attach_temperature(data.trips, data.weather)
    trips, _ = filter_outliers(trips, run.outlier_criteria())
    schema = default_schema()
    train, val, test = build_dataset(trips, schema, run.split_spec())
    ens = next(e for e in stack.train_stacked_ensembles(train, val, run.l1_specs(), run.l2_specs())
               if e.name == cfg.l2)
    bg = BackgroundSet.from_data(train.X, schema.names, k=cfg.background, seed=cfg.seed)
    bl_bg = BackgroundSet.from_data(train.X, schema.names, k=cfg.bl_background,
                                    seed=cfg.seed).select(baseline_features(schema))

    print("scenario,model,method,feature,margin,sign_correct")
    for sid, spec in builtin_scenarios(cfg.n_per_side, cfg.seed).items():
        smp = select_scenario_samples(test, spec)
        for method in ("lime", "shap"):
            docs = {s: [pipeline.explain_sample(ens, test.X[r], int(test.ids[r]), method, bg, bl_bg, run)
                        for r in smp.side(s)] for s in SIDES}
            for label, pick in pipeline.explanation_views(docs["lower"][0], run, schema):
                rep = scenario_separation_report([pick(d) for d in docs["lower"]],
                                                 [pick(d) for d in docs["higher"]], spec, label, method)
                for feat, margin in rep.margins.items():
                    print(f"{sid},{label},{method},{feat},{margin:.3f},{rep.sign_correct}")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
