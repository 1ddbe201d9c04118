"""Bagged CART regression forest."""

from __future__ import annotations

import numpy as np

from .base import Frame, LearnerError, RegressorSpec, TrainedRegressor, check_finite_xy, max_features_for
from .trees import Binner, Ensemble, Tree, grow_tree


class RandomForestModel(TrainedRegressor):
    family = "random_forest"

    def __init__(self, spec, input_names, trees: list[Tree], meta=None):
        super().__init__(spec, input_names, meta)
        self.trees = trees
        self._ens = Ensemble.of(trees)

    def _predict(self, Z):
        return self._ens.leaf_sum(Z) / len(self.trees)

    def _params_doc(self):
        return {"trees": [t.to_nested() for t in self.trees]}

    @classmethod
    def from_params(cls, spec, input_names, params, meta):
        return cls(spec, input_names, [Tree.from_nested(t) for t in params["trees"]], meta)


def fit_random_forest(train, spec: RegressorSpec) -> RandomForestModel:
    """Fit ``n_trees`` variance-reduction trees, each on a seeded bootstrap sample."""
    if spec.family != "random_forest":
        raise LearnerError(f"spec family is {spec.family}, not random_forest")
    data = Frame.of(train)
    model = RandomForestModel(spec, data.names, [])
    Z = data.X[:, model._cols]
    y = data.y
    check_finite_xy(spec.name, Z, y)
    h = spec.hyper
    n, m = Z.shape
    if n < int(h["min_samples_split"]):
        raise LearnerError(f"{spec.name}: {n} training rows < min_samples_split={h['min_samples_split']}")
    binner = Binner.fit(Z, int(h["max_bins"]))
    Xb = binner.transform(Z)
    k = max_features_for(h["max_features"], m)
    depth = -1 if h["max_depth"] is None else int(h["max_depth"])
    seeds = np.random.SeedSequence(spec.seed).spawn(int(h["n_trees"]))
    g = -y
    ones = np.ones(n)
    trees = []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        rows = rng.integers(0, n, size=n) if h["bootstrap"] else np.arange(n)
        trees.append(grow_tree(
            Xb, g, ones, rows, binner, max_features=k, max_depth=depth,
            min_samples_split=int(h["min_samples_split"]), min_samples_leaf=int(h["min_samples_leaf"]),
            seed=int(rng.integers(0, 2**31 - 1)),
        ))
    return RandomForestModel(spec, data.names, trees,
                             {"n_train": n, "max_features": k, "n_nodes": int(sum(t.n_nodes for t in trees))})
