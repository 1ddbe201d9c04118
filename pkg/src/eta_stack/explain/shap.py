"""Kernel SHAP and a brute-force Shapley oracle with interventional masking.

The value of a coalition S is the mean of f over the background rows with
the features in S replaced by those of x.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .lime import ExplainError
from .types import BackgroundSet, Explanation

EXACT_MAX_FEATURES = 12
_CHUNK_ROWS = 200_000


def shapley_kernel(m: int, s: int) -> float:
    """Kernel SHAP weight of one coalition of size ``s`` among ``m`` features (0 < s < m)."""
    return (m - 1) / (math.comb(m, s) * s * (m - s))


def coalition_values(f, x: np.ndarray, background: BackgroundSet, masks: np.ndarray) -> np.ndarray:
    """Mean of f over the background with ``x`` filled in where ``masks`` is True."""
    masks = np.asarray(masks, dtype=bool)
    k, m = background.rows.shape
    per_chunk = max(1, _CHUNK_ROWS // k)
    out = np.empty(masks.shape[0])
    for start in range(0, masks.shape[0], per_chunk):
        mk = masks[start:start + per_chunk]
        rows = np.repeat(background.rows[None, :, :], mk.shape[0], axis=0)
        rows = np.where(mk[:, None, :], x[None, None, :], rows)
        vals = np.asarray(f(rows.reshape(-1, m)), dtype=float).reshape(mk.shape[0], k)
        out[start:start + mk.shape[0]] = vals.mean(axis=1)
    return out


def _all_masks(m: int) -> np.ndarray:
    """Every proper, non-empty coalition as a boolean matrix."""
    codes = np.arange(1, 2 ** m - 1, dtype=np.int64)
    return ((codes[:, None] >> np.arange(m)) & 1).astype(bool)


def _sampled_masks(m: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Coalitions drawn with size probability proportional to the kernel's layer mass, paired with complements."""
    sizes = np.arange(1, m)
    p = (m - 1) / (sizes * (m - sizes))
    p = p / p.sum()
    n_pairs = (n + 1) // 2
    masks = np.zeros((2 * n_pairs, m), dtype=bool)
    drawn = rng.choice(sizes, size=n_pairs, p=p)
    for i, s in enumerate(drawn):
        on = rng.choice(m, size=s, replace=False)
        masks[2 * i, on] = True
        masks[2 * i + 1] = ~masks[2 * i]
    return masks[:n]


def _solve_constrained(masks: np.ndarray, v: np.ndarray, w: np.ndarray, base: float, fx: float) -> np.ndarray:
    """Weighted least squares for phi with sum(phi) = fx - base, by eliminating the last feature."""
    m = masks.shape[1]
    total = fx - base
    if m == 1:
        return np.array([total])
    Z = masks.astype(float)
    target = v - base - Z[:, -1] * total
    A = Z[:, :-1] - Z[:, -1:]
    sw = np.sqrt(w)
    phi_head = np.linalg.lstsq(A * sw[:, None], target * sw, rcond=None)[0]
    return np.append(phi_head, total - phi_head.sum())


def kernel_shap(f, x, background: BackgroundSet, n_coalitions: int = 2048, seed: int = 0,
                sample_id=None, model: str = "") -> Explanation:
    """Shapley values of ``f`` at ``x`` by the Shapley-kernel regression.

    With ``m <= 12`` features and ``n_coalitions >= 2**m`` every coalition is
    enumerated and the result is exact; otherwise ``n_coalitions`` paired
    coalitions are sampled. Efficiency holds by construction in both modes.
    """
    x = np.asarray(x, dtype=float).ravel()
    m = x.size
    if m < 1:
        raise ExplainError("need at least one feature")
    if m != len(background.feature_names):
        raise ExplainError("x and background disagree on the number of features")
    fx = float(np.asarray(f(x[None, :]), dtype=float).ravel()[0])
    base = float(np.mean(np.asarray(f(background.rows), dtype=float)))
    exact = m <= EXACT_MAX_FEATURES and n_coalitions >= 2 ** m
    if m == 1:
        phi = np.array([fx - base])
        mode = "exact"
    elif exact:
        masks = _all_masks(m)
        sizes = masks.sum(axis=1)
        w = np.array([shapley_kernel(m, int(s)) for s in sizes])
        phi = _solve_constrained(masks, coalition_values(f, x, background, masks), w, base, fx)
        mode = "exact"
    else:
        if n_coalitions < m + 2:
            raise ExplainError(f"sampling mode needs n_coalitions >= m + 2 = {m + 2}")
        masks = _sampled_masks(m, n_coalitions, np.random.default_rng(seed))
        v = coalition_values(f, x, background, masks)
        phi = _solve_constrained(masks, v, np.ones(masks.shape[0]), base, fx)
        mode = "sampled"
    return Explanation(phi, background.feature_names, x, "shap", sample_id, base, fx, model,
                       {"mode": mode, "n_coalitions": int(n_coalitions), "background_rows": background.k})


def exact_shap_oracle(f, x, background: BackgroundSet, sample_id=None, model: str = "") -> Explanation:
    """Shapley values as the literal weighted sum of marginal contributions over all subsets."""
    x = np.asarray(x, dtype=float).ravel()
    m = x.size
    if m > EXACT_MAX_FEATURES:
        cost = 2 ** m * background.k
        raise ExplainError(f"brute force over {m} features needs 2^{m} coalitions x {background.k} "
                           f"background rows = {cost:,} model evaluations; limit is {EXACT_MAX_FEATURES} features")
    value = {}
    for r in range(m + 1):
        for S in itertools.combinations(range(m), r):
            rows = background.rows.copy()
            rows[:, list(S)] = x[list(S)]
            value[frozenset(S)] = float(np.mean(np.asarray(f(rows), dtype=float)))
    phi = np.zeros(m)
    fact = math.factorial
    for i in range(m):
        others = [j for j in range(m) if j != i]
        for r in range(m):
            wgt = fact(r) * fact(m - r - 1) / fact(m)
            for S in itertools.combinations(others, r):
                S = frozenset(S)
                phi[i] += wgt * (value[S | {i}] - value[S])
    full = float(np.asarray(f(x[None, :]), dtype=float).ravel()[0])
    return Explanation(phi, background.feature_names, x, "shap", sample_id, value[frozenset()], full, model,
                       {"mode": "oracle"})
