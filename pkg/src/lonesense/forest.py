"""Random-forest regression built on variance-reduction CART trees.

Feature importance is mean decrease in impurity (variance), normalized per tree
and averaged over the forest: the regression counterpart of Gini importance.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Union

import numpy as np
from numba import njit


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 300
    max_depth: Optional[int] = None
    min_samples_leaf: int = 2
    # None: ceil(F / 3). A float in (0, 1] is a fraction of F, an int a count.
    features_per_split: Union[int, float, None] = None
    bootstrap: bool = True
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        fps = self.features_per_split
        if fps is not None:
            if isinstance(fps, bool):
                raise ValueError("features_per_split must be a number")
            if isinstance(fps, int):
                if fps < 1:
                    raise ValueError("features_per_split count must be >= 1")
            elif not 0.0 < float(fps) <= 1.0:
                raise ValueError("features_per_split fraction must lie in (0, 1]")

    def candidates(self, n_features: int) -> int:
        fps = self.features_per_split
        if fps is None:
            k = math.ceil(n_features / 3)
        elif isinstance(fps, int):
            k = fps
        else:
            k = math.ceil(float(fps) * n_features)
        return max(1, min(n_features, k))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Tree:
    """Flat array tree; ``feature[i] < 0`` marks a leaf. Rows with
    ``x[feature] <= threshold`` go left."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    importances: np.ndarray  # raw impurity decrease per feature

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        rows = np.arange(X.shape[0])
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            go_left = X[rows, np.where(inner, f, 0)] <= self.threshold[node]
            nxt = np.where(go_left, self.left[node], self.right[node])
            node = np.where(inner, nxt, node)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


@njit(cache=True)
def _grow(X, y, n_candidates, min_leaf, max_depth, seed):  # pragma: no cover - compiled
    n, n_features = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    start = np.zeros(cap, np.int64)
    stop = np.zeros(cap, np.int64)
    depth = np.zeros(cap, np.int64)
    importances = np.zeros(n_features)

    np.random.seed(seed)
    perm = np.arange(n_features)
    idx = np.arange(n)
    scratch = np.empty(n, np.int64)
    xv = np.empty(n)
    yv = np.empty(n)

    value[0] = y.mean()
    stop[0] = n
    n_nodes = 1
    stack = np.empty(cap, np.int64)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        s = start[node]
        e = stop[node]
        m = e - s
        if m < 2 * min_leaf or (max_depth >= 0 and depth[node] >= max_depth):
            continue
        total = 0.0
        lo_y = np.inf
        hi_y = -np.inf
        for i in range(s, e):
            v = y[idx[i]]
            total += v
            lo_y = min(lo_y, v)
            hi_y = max(hi_y, v)
        if hi_y - lo_y <= 0.0:
            continue

        best = -np.inf
        best_f = -1
        best_lo = 0.0
        best_hi = 0.0
        for c in range(n_candidates):
            j = c + np.random.randint(0, n_features - c)
            tmp = perm[c]
            perm[c] = perm[j]
            perm[j] = tmp
            f = perm[c]
            for i in range(m):
                xv[i] = X[idx[s + i], f]
            order = np.argsort(xv[:m], kind="mergesort")
            for i in range(m):
                yv[i] = y[idx[s + order[i]]]
            acc = 0.0
            for i in range(m - min_leaf):
                acc += yv[i]
                n_left = i + 1
                if n_left < min_leaf:
                    continue
                a = xv[order[i]]
                b = xv[order[i + 1]]
                if not a < b:
                    continue
                n_right = m - n_left
                proxy = acc * acc / n_left + (total - acc) * (total - acc) / n_right
                if proxy > best:
                    best = proxy
                    best_f = f
                    best_lo = a
                    best_hi = b
        if best_f < 0:
            continue
        gain = best - total * total / m
        if not gain > 0.0:
            continue
        thr = best_lo + (best_hi - best_lo) / 2.0
        if not (best_lo < thr and thr < best_hi):
            thr = best_lo

        # stable partition of idx[s:e]
        n_l = 0
        for i in range(s, e):
            if X[idx[i], best_f] <= thr:
                scratch[n_l] = idx[i]
                n_l += 1
        k = n_l
        for i in range(s, e):
            if not X[idx[i], best_f] <= thr:
                scratch[k] = idx[i]
                k += 1
        sum_l = 0.0
        for i in range(m):
            idx[s + i] = scratch[i]
            if i < n_l:
                sum_l += y[scratch[i]]

        li = n_nodes
        ri = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = thr
        left[node] = li
        right[node] = ri
        start[li] = s
        stop[li] = s + n_l
        start[ri] = s + n_l
        stop[ri] = e
        depth[li] = depth[node] + 1
        depth[ri] = depth[node] + 1
        value[li] = sum_l / n_l
        sum_r = 0.0
        for i in range(s + n_l, e):
            sum_r += y[idx[i]]
        value[ri] = sum_r / (m - n_l)
        importances[best_f] += gain
        stack[sp] = ri
        stack[sp + 1] = li
        sp += 2

    return (
        feature[:n_nodes],
        threshold[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        value[:n_nodes],
        importances,
    )


def build_tree(
    X: np.ndarray,
    y: np.ndarray,
    seed: int,
    n_candidates: int,
    min_samples_leaf: int = 2,
    max_depth: Optional[int] = None,
) -> Tree:
    """Grow one tree depth-first. Each node draws ``n_candidates`` features without
    replacement and takes the split with the largest drop in squared error;
    thresholds sit midway between adjacent distinct values."""
    arrays = _grow(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        int(n_candidates),
        int(min_samples_leaf),
        -1 if max_depth is None else int(max_depth),
        int(seed),
    )
    return Tree(*arrays)


@dataclass(frozen=True)
class TrainedForest:
    trees: tuple[Tree, ...]
    feature_importances: np.ndarray
    n_features: int
    config: ForestConfig

    def predict(self, X) -> np.ndarray:
        return predict(self, X)


def _check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError("X must be a non-empty 2-D matrix")
    if y.shape != (X.shape[0],):
        raise ValueError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("X and y must be finite")
    return X, y


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    """Independent stream per (seed, tree) so results do not depend on scheduling."""
    return np.random.default_rng(np.random.SeedSequence([seed, tree_index]))


def train_forest(X, y, cfg: ForestConfig = ForestConfig()) -> TrainedForest:
    X, y = _check_xy(X, y)
    n, n_features = X.shape
    k = cfg.candidates(n_features)
    trees = []
    for t in range(cfg.n_trees):
        rng = tree_rng(cfg.rng_seed, t)
        node_seed = int(rng.integers(0, 2**31 - 1))
        if cfg.bootstrap:
            sample = rng.integers(0, n, size=n)
            Xb, yb = X[sample], y[sample]
        else:
            Xb, yb = X, y
        trees.append(build_tree(Xb, yb, node_seed, k, cfg.min_samples_leaf, cfg.max_depth))

    acc = np.zeros(n_features)
    for tree in trees:
        s = tree.importances.sum()
        if s > 0:
            acc += tree.importances / s
    total = acc.sum()
    importances = acc / total if total > 0 else np.full(n_features, 1.0 / n_features)
    return TrainedForest(tuple(trees), importances, n_features, cfg)


def predict(forest: TrainedForest, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise ValueError(f"expected {forest.n_features} columns, got shape {X.shape}")
    out = np.zeros(X.shape[0])
    for tree in forest.trees:
        out += tree.predict(X)
    return out / len(forest.trees)
