"""Level-1 versus level-2 test MAE on the synthetic trip set over several seeds.

    python scripts/stacking_dominance.py --n-trips 50000 --seeds 0 1 2 3 4
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field

import numpy as np

from eta_stack import config, stack
from eta_stack.ingest import attach_temperature, build_dataset, default_schema, filter_outliers
from eta_stack.metrics import compute_metrics
from eta_stack.synthetic import SyntheticConfig, generate


@dataclass
class DominanceConfig:
    n_trips: int = 50_000
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    profile: str = "desk"
    level2: list = field(default_factory=lambda: ["L2-MLR", "L2-RF", "L2-XGBoost", "L2-NN"])


def run_seed(cfg: DominanceConfig, seed: int) -> list[dict]:
    run = config.profile(cfg.profile)
    run.seed = seed
    data = generate(SyntheticConfig(n_trips=cfg.n_trips, seed=seed))
    trips, _ = attach_temperature(data.trips, data.weather)
    trips, _ = filter_outliers(trips, run.outlier_criteria())
    train, val, test = build_dataset(trips, default_schema(), run.split_spec())
    l2 = [s for s in run.l2_specs() if s.name in cfg.level2]
    ensembles = stack.train_stacked_ensembles(train, val, run.l1_specs(), l2)
    P = ensembles[0].level1(test)
    rows = [{"seed": seed, "model": m.name, **_m(test.y, P[:, j])} for j, m in enumerate(ensembles[0].l1_models)]
    rows += [{"seed": seed, "model": e.name, **_m(test.y, e.l2_model.predict(P))} for e in ensembles]
    return rows


def _m(y, p):
    m = compute_metrics(y, p)
    return {"mae_s": round(m.mae, 4), "mre": round(m.mre, 4), "mape_pct": round(m.mape_pct, 4)}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-trips", type=int, default=DominanceConfig.n_trips)
    ap.add_argument("--seeds", type=int, nargs="+", default=DominanceConfig().seeds)
    ap.add_argument("--profile", default="desk", choices=config.PROFILES)
    a = ap.parse_args(argv)
    cfg = DominanceConfig(a.n_trips, a.seeds, a.profile)
    rows = [r for s in cfg.seeds for r in run_seed(cfg, s)]
    w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    for s in cfg.seeds:
        l1 = [r["mae_s"] for r in rows if r["seed"] == s and r["model"].startswith("L1")]
        mlr = next(r["mae_s"] for r in rows if r["seed"] == s and r["model"] == "L2-MLR")
        print(f"# seed {s}: L2-MLR {mlr:.1f} vs L1 mean {np.mean(l1):.1f}, best {min(l1):.1f}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
