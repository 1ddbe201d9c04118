"""Fully-connected ReLU regression network trained with Adam."""

from __future__ import annotations

import numpy as np

from .base import Frame, LearnerError, RegressorSpec, TrainedRegressor, check_finite_xy


class DivergenceError(LearnerError):
    pass


def init_params(sizes: list[int], rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """He-normal weights for ReLU layers, zero biases."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        params.append((W, np.zeros(fan_out)))
    return params


def forward(params, A0: np.ndarray) -> np.ndarray:
    a = A0
    last = len(params) - 1
    for i, (W, b) in enumerate(params):
        z = a @ W + b
        a = z if i == last else np.maximum(z, 0.0)
    return a[:, 0]


def loss_and_grad(params, A0: np.ndarray, t: np.ndarray):
    """Mean squared error of the network output against ``t`` and its gradients."""
    acts = [A0]
    zs = []
    a = A0
    last = len(params) - 1
    for i, (W, b) in enumerate(params):
        z = a @ W + b
        zs.append(z)
        a = z if i == last else np.maximum(z, 0.0)
        acts.append(a)
    n = A0.shape[0]
    resid = a[:, 0] - t
    loss = float(np.mean(resid ** 2))
    delta = (2.0 / n) * resid[:, None]
    grads = [None] * len(params)
    for i in range(last, -1, -1):
        W, _ = params[i]
        grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ W.T) * (zs[i - 1] > 0)
    return loss, grads


def best_epoch(history) -> int:
    """1-based index of the epoch with the lowest validation error (first on ties)."""
    return int(np.argmin(np.asarray(history, dtype=float))) + 1


class MLPModel(TrainedRegressor):
    family = "feedforward_net"

    def __init__(self, spec, input_names, params, x_mean, x_std, y_mean, y_std, meta=None):
        super().__init__(spec, input_names, meta)
        self.params = [(np.asarray(W, dtype=float), np.asarray(b, dtype=float)) for W, b in params]
        self.x_mean = np.asarray(x_mean, dtype=float)
        self.x_std = np.asarray(x_std, dtype=float)
        self.y_mean = float(y_mean)
        self.y_std = float(y_std)

    def _predict(self, Z):
        out = forward(self.params, (Z - self.x_mean) / self.x_std)
        return out * self.y_std + self.y_mean

    def _params_doc(self):
        return {
            "layers": [{"W": W.tolist(), "b": b.tolist()} for W, b in self.params],
            "x_mean": self.x_mean.tolist(), "x_std": self.x_std.tolist(),
            "y_mean": self.y_mean, "y_std": self.y_std,
        }

    @classmethod
    def from_params(cls, spec, input_names, p, meta):
        layers = [(np.array(l["W"], dtype=float).reshape(len(l["W"]), -1), np.array(l["b"], dtype=float))
                  for l in p["layers"]]
        return cls(spec, input_names, layers, p["x_mean"], p["x_std"], p["y_mean"], p["y_std"], meta)


def _standardizer(Z):
    mu = Z.mean(axis=0)
    sd = Z.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return mu, sd


def fit_mlp(train, validation, spec: RegressorSpec) -> MLPModel:
    """Mini-batch Adam on squared loss; keeps the epoch with the best validation MAE.

    Inputs (and, by default, the target) are standardised with training-split
    statistics inside the model, so callers always work in raw units.
    """
    if spec.family != "feedforward_net":
        raise LearnerError(f"spec family is {spec.family}, not feedforward_net")
    data = Frame.of(train)
    val = Frame.of(validation)
    shell = MLPModel(spec, data.names, [], 0.0, 1.0, 0.0, 1.0)
    Z = data.X[:, shell._cols]
    Zv = val.X[:, [val.names.index(n) for n in shell.features]]
    y, yv = data.y, val.y
    check_finite_xy(spec.name, Z, y)
    if len(yv) == 0:
        raise LearnerError(f"{spec.name}: best-epoch selection needs validation rows")
    h = spec.hyper
    rng = np.random.default_rng(spec.seed)
    mu, sd = _standardizer(Z)
    if h["standardize_target"]:
        y_mu, y_sd = float(y.mean()), float(y.std()) or 1.0
    else:
        y_mu, y_sd = 0.0, 1.0
    A = (Z - mu) / sd
    t = (y - y_mu) / y_sd
    sizes = [Z.shape[1], *[int(s) for s in h["hidden"]], 1]
    params = init_params(sizes, rng)
    lr, b1, b2, eps = float(h["learning_rate"]), float(h["beta1"]), float(h["beta2"]), float(h["eps"])
    m_state = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    v_state = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    batch = int(h["batch_size"])
    n = len(y)
    step = 0
    history, train_loss = [], []
    best_params, best_mae = None, np.inf
    for epoch in range(1, int(h["epochs"]) + 1):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            rows = perm[start:start + batch]
            loss, grads = loss_and_grad(params, A[rows], t[rows])
            if not np.isfinite(loss):
                raise DivergenceError(f"{spec.name}: loss became non-finite in epoch {epoch}; "
                                      f"last finite epoch {epoch - 1}")
            total += loss * rows.size
            step += 1
            new = []
            for i, ((W, b), (gW, gb)) in enumerate(zip(params, grads)):
                mW, mb = m_state[i]
                vW, vb = v_state[i]
                mW = b1 * mW + (1 - b1) * gW
                mb = b1 * mb + (1 - b1) * gb
                vW = b2 * vW + (1 - b2) * gW * gW
                vb = b2 * vb + (1 - b2) * gb * gb
                m_state[i] = (mW, mb)
                v_state[i] = (vW, vb)
                c1 = 1 - b1 ** step
                c2 = 1 - b2 ** step
                W = W - lr * (mW / c1) / (np.sqrt(vW / c2) + eps)
                b = b - lr * (mb / c1) / (np.sqrt(vb / c2) + eps)
                new.append((W, b))
            params = new
        train_loss.append(total / n)
        pv = forward(params, (Zv - mu) / sd) * y_sd + y_mu
        mae = float(np.mean(np.abs(pv - yv)))
        if not np.isfinite(mae):
            raise DivergenceError(f"{spec.name}: validation output non-finite in epoch {epoch}; "
                                  f"last finite epoch {epoch - 1}")
        history.append(mae)
        if mae < best_mae:
            best_mae = mae
            best_params = [(W.copy(), b.copy()) for W, b in params]
    meta = {"n_train": n, "epochs_run": len(history), "best_epoch": best_epoch(history),
            "val_mae": history, "train_loss": train_loss}
    return MLPModel(spec, data.names, best_params, mu, sd, y_mu, y_sd, meta)
