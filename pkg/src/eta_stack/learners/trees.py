"""Histogram regression trees shared by the forest and the boosting learner.

One builder covers both: a node's statistics are the sums ``G`` and ``H`` of
per-row first and second derivatives, the leaf value is ``-G / (H + lambda)``
and a split is scored by

    0.5 * (GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda)) - gamma.

With ``g = -y``, ``h = 1`` and ``lambda = gamma = 0`` this is half the
squared-error reduction of a CART regression split and the leaf value is
the mean target, which is what the forest uses.

Candidate thresholds come from per-feature binning of the training matrix
(all distinct values when there are at most ``max_bins`` of them). Ties in
gain keep the lowest feature index, then the lowest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

MAX_BINS = 255


@dataclass
class Binner:
    thresholds: list[np.ndarray]

    @classmethod
    def fit(cls, X: np.ndarray, max_bins: int = MAX_BINS) -> "Binner":
        if not 2 <= max_bins <= 256:
            raise ValueError("max_bins must be in [2, 256]")
        out = []
        for j in range(X.shape[1]):
            u = np.unique(X[:, j])
            if u.size <= max_bins:
                t = 0.5 * (u[:-1] + u[1:])
            else:
                q = np.quantile(X[:, j], np.linspace(0.0, 1.0, max_bins + 1)[1:-1])
                t = np.unique(q)
            out.append(t.astype(float))
        return cls(out)

    @property
    def n_bins(self) -> np.ndarray:
        return np.array([t.size + 1 for t in self.thresholds], dtype=np.int64)

    def transform(self, X: np.ndarray) -> np.ndarray:
        Xb = np.empty(X.shape, dtype=np.uint8)
        for j, t in enumerate(self.thresholds):
            Xb[:, j] = np.searchsorted(t, X[:, j], side="left")
        return Xb


@numba.njit(cache=True)
def _build(Xb, g, h, rows, n_bins, features, max_features, max_depth,
           min_samples_split, min_samples_leaf, min_child_weight, reg_lambda, gamma, seed):
    np.random.seed(seed)
    n = rows.size
    cap = 2 * n + 1
    feat = np.full(cap, -1, np.int64)
    tbin = np.zeros(cap, np.int64)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap, np.float64)

    idx = rows.copy()
    buf = np.empty_like(idx)
    st_node = np.empty(cap, np.int64)
    st_lo = np.empty(cap, np.int64)
    st_hi = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    sp = 0
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n
    st_depth[0] = 0
    sp = 1
    n_nodes = 1

    pool = features.copy()
    n_pool = pool.size
    k = min(max_features, n_pool)
    max_nb = 0
    for f in range(n_bins.size):
        if n_bins[f] > max_nb:
            max_nb = n_bins[f]
    hg = np.zeros(max_nb)
    hh = np.zeros(max_nb)
    hc = np.zeros(max_nb, np.int64)

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        lo = st_lo[sp]
        hi = st_hi[sp]
        depth = st_depth[sp]
        G = 0.0
        H = 0.0
        for p in range(lo, hi):
            r = idx[p]
            G += g[r]
            H += h[r]
        value[node] = -G / (H + reg_lambda)
        cnt = hi - lo
        if max_depth >= 0 and depth >= max_depth:
            continue
        if cnt < min_samples_split or cnt < 2 * min_samples_leaf:
            continue

        if k < n_pool:
            for i in range(k):
                j = i + np.random.randint(0, n_pool - i)
                tmp = pool[i]
                pool[i] = pool[j]
                pool[j] = tmp
            cands = np.sort(pool[:k])
        else:
            cands = pool

        parent = G * G / (H + reg_lambda)
        best = 1e-12 * (abs(parent) + 1.0)
        best_f = -1
        best_b = -1
        for ci in range(cands.size):
            f = cands[ci]
            nb = n_bins[f]
            if nb < 2:
                continue
            for b in range(nb):
                hg[b] = 0.0
                hh[b] = 0.0
                hc[b] = 0
            for p in range(lo, hi):
                r = idx[p]
                b = Xb[r, f]
                hg[b] += g[r]
                hh[b] += h[r]
                hc[b] += 1
            GL = 0.0
            HL = 0.0
            CL = 0
            for b in range(nb - 1):
                GL += hg[b]
                HL += hh[b]
                CL += hc[b]
                if CL < min_samples_leaf:
                    continue
                if cnt - CL < min_samples_leaf:
                    break
                HR = H - HL
                if HL < min_child_weight or HR < min_child_weight:
                    continue
                GR = G - GL
                gain = 0.5 * (GL * GL / (HL + reg_lambda) + GR * GR / (HR + reg_lambda) - parent) - gamma
                if gain > best:
                    best = gain
                    best_f = f
                    best_b = b
        if best_f < 0:
            continue

        nl = 0
        nr = 0
        for p in range(lo, hi):
            r = idx[p]
            if Xb[r, best_f] <= best_b:
                idx[lo + nl] = r
                nl += 1
            else:
                buf[nr] = r
                nr += 1
        for q in range(nr):
            idx[lo + nl + q] = buf[q]

        feat[node] = best_f
        tbin[node] = best_b
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        st_node[sp] = rc
        st_lo[sp] = lo + nl
        st_hi[sp] = hi
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = lc
        st_lo[sp] = lo
        st_hi[sp] = lo + nl
        st_depth[sp] = depth + 1
        sp += 1

    return feat[:n_nodes], tbin[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@dataclass
class Tree:
    """Flat binary tree; ``feature == -1`` marks a leaf. Rows go left when ``x <= threshold``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def depth(self) -> int:
        d = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                d[self.left[i]] = d[i] + 1
                d[self.right[i]] = d[i] + 1
        return int(d.max())

    def to_nested(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"value": float(self.value[node])}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "value": float(self.value[node]),
            "left": self.to_nested(int(self.left[node])),
            "right": self.to_nested(int(self.right[node])),
        }

    @classmethod
    def from_nested(cls, doc: dict) -> "Tree":
        feat, thr, left, right, val = [], [], [], [], []

        def visit(d):
            i = len(feat)
            feat.append(d.get("feature", -1) if "left" in d else -1)
            thr.append(d.get("threshold", 0.0))
            val.append(d["value"])
            left.append(-1)
            right.append(-1)
            if "left" in d:
                left[i] = visit(d["left"])
                right[i] = visit(d["right"])
            return i

        visit(doc)
        return cls(np.array(feat, dtype=np.int64), np.array(thr, dtype=float),
                   np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                   np.array(val, dtype=float))


def grow_tree(Xb, g, h, rows, binner: Binner, *, features=None, max_features=None, max_depth=-1,
              min_samples_split=2, min_samples_leaf=1, min_child_weight=0.0, reg_lambda=0.0,
              gamma=0.0, seed=0) -> Tree:
    """Grow one tree on ``rows`` (may repeat, for bootstrap samples) of the binned matrix."""
    m = Xb.shape[1]
    features = np.arange(m, dtype=np.int64) if features is None else np.asarray(features, dtype=np.int64)
    k = features.size if max_features is None else int(max_features)
    feat, tbin, left, right, value = _build(
        Xb, np.asarray(g, dtype=float), np.asarray(h, dtype=float), np.asarray(rows, dtype=np.int64),
        binner.n_bins, features, k, int(max_depth), int(min_samples_split), int(min_samples_leaf),
        float(min_child_weight), float(reg_lambda), float(gamma), int(seed) % (2**32),
    )
    thr = np.zeros(feat.size)
    split = feat >= 0
    for i in np.flatnonzero(split):
        thr[i] = binner.thresholds[feat[i]][tbin[i]]
    return Tree(feat, thr, left, right, value)


@dataclass
class Ensemble:
    """Concatenated trees for fast batch prediction."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray

    @classmethod
    def of(cls, trees: list[Tree]) -> "Ensemble":
        offs = np.cumsum([0] + [t.n_nodes for t in trees])[:-1].astype(np.int64)
        shift = lambda a, o: np.where(a >= 0, a + o, -1)  # noqa: E731
        return cls(
            np.concatenate([t.feature for t in trees]) if trees else np.zeros(0, np.int64),
            np.concatenate([t.threshold for t in trees]) if trees else np.zeros(0),
            np.concatenate([shift(t.left, o) for t, o in zip(trees, offs)]) if trees else np.zeros(0, np.int64),
            np.concatenate([shift(t.right, o) for t, o in zip(trees, offs)]) if trees else np.zeros(0, np.int64),
            np.concatenate([t.value for t in trees]) if trees else np.zeros(0),
            offs,
        )

    def leaf_sum(self, X: np.ndarray, n_trees: int | None = None) -> np.ndarray:
        n_trees = self.roots.size if n_trees is None else min(n_trees, self.roots.size)
        X = np.ascontiguousarray(X, dtype=float)
        return _leaf_sum(X, self.feature, self.threshold, self.left, self.right, self.value,
                         self.roots[:n_trees])


@numba.njit(cache=True)
def _leaf_sum(X, feature, threshold, left, right, value, roots):
    # trees in the outer loop keep one tree hot in cache; per-row summation
    # order is still tree order
    n = X.shape[0]
    out = np.zeros(n)
    for t in range(roots.size):
        r0 = roots[t]
        for i in range(n):
            node = r0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i] += value[node]
    return out
