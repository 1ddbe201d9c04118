"""Second-order gradient boosted regression trees for squared loss."""

from __future__ import annotations

import numpy as np

from .base import Frame, LearnerError, RegressorSpec, TrainedRegressor, check_finite_xy
from .trees import Binner, Ensemble, Tree, grow_tree


class GradientBoostingModel(TrainedRegressor):
    family = "gradient_boosting"

    def __init__(self, spec, input_names, base_score: float, learning_rate: float,
                 trees: list[Tree], meta=None):
        super().__init__(spec, input_names, meta)
        self.base_score = float(base_score)
        self.learning_rate = float(learning_rate)
        self.trees = trees
        self._ens = Ensemble.of(trees)

    def _predict(self, Z):
        return self.staged_predict(Z, len(self.trees))

    def staged_predict(self, Z, n_trees: int) -> np.ndarray:
        """Prediction using only the first ``n_trees`` trees (0 gives the base score)."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if n_trees == 0 or not self.trees:
            return np.full(Z.shape[0], self.base_score)
        return self.base_score + self.learning_rate * self._ens.leaf_sum(Z, n_trees)

    def _params_doc(self):
        return {"base_score": self.base_score, "learning_rate": self.learning_rate,
                "trees": [t.to_nested() for t in self.trees]}

    @classmethod
    def from_params(cls, spec, input_names, params, meta):
        return cls(spec, input_names, params["base_score"], params["learning_rate"],
                   [Tree.from_nested(t) for t in params["trees"]], meta)


def fit_gradient_boosting(train, spec: RegressorSpec) -> GradientBoostingModel:
    """Boost regression trees on squared loss.

    Starts from the mean target; each tree is grown on the gradients
    ``F - y`` and unit hessians with the regularised gain, ``min_child_weight``
    bounding each child's hessian sum and ``gamma`` the minimum gain.
    """
    if spec.family != "gradient_boosting":
        raise LearnerError(f"spec family is {spec.family}, not gradient_boosting")
    data = Frame.of(train)
    shell = GradientBoostingModel(spec, data.names, 0.0, 1.0, [])
    Z = data.X[:, shell._cols]
    y = data.y
    check_finite_xy(spec.name, Z, y)
    h = spec.hyper
    n, m = Z.shape
    if n == 0:
        raise LearnerError(f"{spec.name}: no training rows")
    binner = Binner.fit(Z, int(h["max_bins"]))
    Xb = binner.transform(Z)
    lr = float(h["learning_rate"])
    depth = -1 if h["max_depth"] is None else int(h["max_depth"])
    base = float(np.mean(y))
    F = np.full(n, base)
    hess = np.ones(n)
    rng = np.random.default_rng(spec.seed)
    n_rows = max(1, int(round(float(h["subsample"]) * n)))
    n_cols = max(1, int(round(float(h["colsample_bytree"]) * m)))
    trees = []
    train_loss = [float(np.mean((y - F) ** 2))]
    for t in range(int(h["n_trees"])):
        grad = F - y
        if not np.all(np.isfinite(grad)):
            raise LearnerError(f"{spec.name}: non-finite residuals at tree {t} "
                               f"(max |F| = {np.nanmax(np.abs(F)):.3g})")
        rows = np.arange(n) if n_rows == n else np.sort(rng.choice(n, n_rows, replace=False))
        cols = np.arange(m) if n_cols == m else np.sort(rng.choice(m, n_cols, replace=False))
        tree = grow_tree(
            Xb, grad, hess, rows, binner, features=cols, max_depth=depth,
            min_samples_split=2, min_samples_leaf=1, min_child_weight=float(h["min_child_weight"]),
            reg_lambda=float(h["reg_lambda"]), gamma=float(h["gamma"]), seed=int(rng.integers(0, 2**31 - 1)),
        )
        trees.append(tree)
        F = F + lr * Ensemble.of([tree]).leaf_sum(Z)
        train_loss.append(float(np.mean((y - F) ** 2)))
    return GradientBoostingModel(spec, data.names, base, lr, trees,
                                 {"n_train": n, "train_mse": train_loss})
