"""Multiple linear regression with a ridge fallback for ill-conditioned designs."""

from __future__ import annotations

import numpy as np

from .base import Frame, LearnerError, RegressorSpec, TrainedRegressor, check_finite_xy


class LinearModel(TrainedRegressor):
    family = "linear"

    def __init__(self, spec, input_names, coef, intercept, meta=None):
        super().__init__(spec, input_names, meta)
        self.coef = np.asarray(coef, dtype=float)
        self.intercept = float(intercept)

    def _predict(self, Z):
        return Z @ self.coef + self.intercept

    def _params_doc(self):
        return {"coef": self.coef.tolist(), "intercept": self.intercept}

    @classmethod
    def from_params(cls, spec, input_names, p, meta):
        return cls(spec, input_names, p["coef"], p["intercept"], meta)


def fit_mlr(train, spec: RegressorSpec) -> LinearModel:
    """Ordinary least squares with intercept.

    If the design matrix's condition number exceeds ``cond_limit`` the
    system is solved with an added ``ridge * I`` term instead, and the
    fallback is recorded in ``meta``.
    """
    if spec.family != "linear":
        raise LearnerError(f"spec family is {spec.family}, not linear")
    data = Frame.of(train)
    shell = LinearModel(spec, data.names, np.zeros(0), 0.0)
    Z = data.X[:, shell._cols]
    y = data.y
    check_finite_xy(spec.name, Z, y)
    h = spec.hyper
    A = np.column_stack([Z, np.ones(len(y))])
    cond = float(np.linalg.cond(A)) if A.shape[0] else np.inf
    ridge = not np.isfinite(cond) or cond > float(h["cond_limit"])
    if ridge:
        # ridge solve as an augmented least-squares problem: [A; sqrt(r) I] beta = [y; 0]
        k = A.shape[1]
        Aug = np.vstack([A, np.sqrt(float(h["ridge"])) * np.eye(k)])
        beta = np.linalg.lstsq(Aug, np.concatenate([y, np.zeros(k)]), rcond=None)[0]
    else:
        beta = np.linalg.lstsq(A, y, rcond=None)[0]
    return LinearModel(spec, data.names, beta[:-1], beta[-1],
                       {"n_train": len(y), "condition_number": cond if np.isfinite(cond) else None, "ridge_fallback": bool(ridge)})
