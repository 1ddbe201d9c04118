"""Local surrogate explanations: weighted ridge regression around one sample."""

from __future__ import annotations

import numpy as np

from .types import BackgroundSet, Explanation


class ExplainError(ValueError):
    pass


def default_kernel_width(m: int) -> float:
    return 0.75 * np.sqrt(m)


def lime_explain(f, x, background: BackgroundSet, n_samples: int = 5000, kernel_width: float | None = None,
                 seed: int = 0, alpha: float = 1.0, sample_id=None, model: str = "") -> Explanation:
    """Explain ``f`` at ``x`` with a locally weighted linear surrogate.

    Perturbations are ``x + std * N(0, 1)`` per feature, weighted by
    ``exp(-d^2 / kernel_width^2)`` with ``d`` the Euclidean distance to ``x``
    in background-standardised units. The surrogate is a ridge fit (penalty
    ``alpha`` on standardised coefficients). Attribution j is the raw-unit
    coefficient times ``x_j - mean_j``, i.e. output units.
    """
    x = np.asarray(x, dtype=float).ravel()
    m = x.size
    if m != len(background.feature_names):
        raise ExplainError("x and background disagree on the number of features")
    if n_samples < m + 2:
        raise ExplainError(f"n_samples must be at least m + 2 = {m + 2}")
    width = default_kernel_width(m) if kernel_width is None else float(kernel_width)
    if width <= 0:
        raise ExplainError("kernel_width must be positive")
    sd = np.where(background.std > 0, background.std, 1.0)
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((n_samples, m))
    eps[0] = 0.0
    Z = x + eps * background.std
    d2 = np.sum(((Z - x) / sd) ** 2, axis=1)
    w = np.exp(-d2 / width ** 2)
    # the unperturbed anchor always has weight 1, so judge the perturbed rows alone
    if w[1:].sum() <= 1e-8 * (n_samples - 1):
        raise ExplainError(f"perturbation weights are degenerate; increase kernel_width (now {width:.3g})")
    yz = np.asarray(f(Z), dtype=float).ravel()

    S = (Z - background.mean) / sd
    sw = w.sum()
    s_bar = w @ S / sw
    y_bar = w @ yz / sw
    Sc = S - s_bar
    yc = yz - y_bar
    G = (Sc * w[:, None]).T @ Sc + alpha * np.eye(m)
    beta = np.linalg.solve(G, (Sc * w[:, None]).T @ yc)
    coef = beta / sd
    intercept_at_mean = float(y_bar - beta @ s_bar)
    attributions = coef * (x - background.mean)
    fx = float(yz[0])
    r2_den = float(w @ yc ** 2)
    r2 = 1.0 - float(w @ (yc - Sc @ beta) ** 2) / r2_den if r2_den > 0 else 1.0
    return Explanation(attributions, background.feature_names, x, "lime", sample_id,
                       intercept_at_mean, fx, model,
                       {"coefficients": coef.tolist(), "kernel_width": width, "n_samples": n_samples,
                        "alpha": alpha, "weighted_r2": r2})
