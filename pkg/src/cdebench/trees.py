"""Regression trees, bagged forests, and gradient boosting.

The split search runs in a numba kernel: per node it argsorts the candidate
feature, scans prefix sums for the variance-optimal threshold, and partitions
the row index buffer in place. Prediction walks all rows through the node
arrays level by level in vectorized numpy, so no per-row Python loop exists
anywhere on the hot path.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from numba import njit


@njit(cache=True)
def _grow(X, y, max_depth, min_leaf, n_sub, seed):
    n, d = X.shape
    # a tree on n rows has at most 2n - 1 nodes regardless of depth
    max_nodes = 2 * n
    if max_depth < 60 and 2 ** (max_depth + 1) < max_nodes:
        max_nodes = 2 ** (max_depth + 1)
    feat = np.full(max_nodes, -1, np.int64)
    thr = np.zeros(max_nodes, np.float64)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    val = np.zeros(max_nodes, np.float64)
    leaf_of = np.empty(n, np.int64)
    idx = np.arange(n)
    tmp = np.empty(n, np.int64)
    feats = np.empty(d, np.int64)
    xs = np.empty(n, np.float64)
    sy = np.empty(n, np.float64)

    np.random.seed(seed)

    stack_node = np.empty(max_nodes, np.int64)
    stack_lo = np.empty(max_nodes, np.int64)
    stack_hi = np.empty(max_nodes, np.int64)
    stack_dep = np.empty(max_nodes, np.int64)
    stack_node[0], stack_lo[0], stack_hi[0], stack_dep[0] = 0, 0, n, 0
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        lo = stack_lo[sp]
        hi = stack_hi[sp]
        dep = stack_dep[sp]
        m = hi - lo

        total = 0.0
        for i in range(lo, hi):
            total += y[idx[i]]
        val[node] = total / m

        if dep >= max_depth or m < 2 * min_leaf:
            for i in range(lo, hi):
                leaf_of[idx[i]] = node
            continue

        # feature subsample by partial Fisher-Yates, then ascending order so
        # gain ties resolve to the lowest feature index
        if n_sub >= d:
            k_feats = d
            for j in range(d):
                feats[j] = j
        else:
            for j in range(d):
                feats[j] = j
            for j in range(n_sub):
                swap = j + np.random.randint(0, d - j)
                t = feats[j]
                feats[j] = feats[swap]
                feats[swap] = t
            k_feats = n_sub
            for a in range(1, k_feats):
                key = feats[a]
                b = a - 1
                while b >= 0 and feats[b] > key:
                    feats[b + 1] = feats[b]
                    b -= 1
                feats[b + 1] = key

        base = total * total / m
        guard = 1e-12 * (1.0 + abs(base))  # rejects round-off "gains" on constant y
        best_gain = guard
        best_f = -1
        best_thr = 0.0
        for jf in range(k_feats):
            f = feats[jf]
            for i in range(m):
                xs[i] = X[idx[lo + i], f]
            order = np.argsort(xs[:m])
            # prefix-sum scan over rows sorted by the feature; thresholds sit
            # between adjacent distinct values, scanned ascending so ties in
            # gain keep the lowest threshold
            for i in range(m):
                sy[i] = y[idx[lo + order[i]]]
            cum = np.cumsum(sy[:m])
            for k in range(min_leaf, m - min_leaf + 1):
                a = xs[order[k - 1]]
                b = xs[order[k]]
                if a == b:
                    continue
                ls = cum[k - 1]
                rs = total - ls
                gain = ls * ls / k + rs * rs / (m - k) - base
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_thr = 0.5 * (a + b)

        if best_f < 0:
            for i in range(lo, hi):
                leaf_of[idx[i]] = node
            continue

        # stable in-place partition of the row buffer
        p = lo
        q = 0
        for i in range(lo, hi):
            r = idx[i]
            if X[r, best_f] <= best_thr:
                idx[p] = r
                p += 1
            else:
                tmp[q] = r
                q += 1
        for i in range(q):
            idx[p + i] = tmp[i]

        if p == lo or p == hi:  # midpoint rounded onto a data value
            for i in range(lo, hi):
                leaf_of[idx[i]] = node
            continue

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feat[node] = best_f
        thr[node] = best_thr
        left[node] = lid
        right[node] = rid
        stack_node[sp], stack_lo[sp], stack_hi[sp], stack_dep[sp] = lid, lo, p, dep + 1
        sp += 1
        stack_node[sp], stack_lo[sp], stack_hi[sp], stack_dep[sp] = rid, p, hi, dep + 1
        sp += 1

    return feat[:n_nodes], thr[:n_nodes], left[:n_nodes], right[:n_nodes], val[:n_nodes], leaf_of


@dataclass(frozen=True)
class RegressionTree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # node means; prediction reads it at the reached leaf
    leaf_of_train: np.ndarray


@dataclass(frozen=True)
class RegressionForest:
    trees: tuple
    feature_fraction: float


@dataclass(frozen=True)
class GbtModel:
    trees: tuple
    learning_rate: float
    loss: str  # "squared" | "pinball"
    tau: float | None
    init: float


def fit_regression_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int,
    min_leaf: int = 1,
    feature_fraction: float = 1.0,
    seed: int = 0,
) -> RegressionTree:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, d = X.shape
    if n == 0:
        raise ValueError("cannot grow a tree on empty data")
    if n < 2 * min_leaf and max_depth > 0:
        # still legal: the root just becomes a leaf
        pass
    n_sub = d if feature_fraction >= 1.0 else max(1, int(np.ceil(feature_fraction * d)))
    parts = _grow(X, y, int(max_depth), int(min_leaf), n_sub, int(seed) & 0x7FFFFFFF)
    return RegressionTree(*parts)


def _apply_tree(tree: RegressionTree, X: np.ndarray) -> np.ndarray:
    node = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        f = tree.feature[node]
        rows = np.nonzero(f >= 0)[0]
        if rows.size == 0:
            return node
        cur = node[rows]
        go_left = X[rows, f[rows]] <= tree.threshold[cur]
        node[rows] = np.where(go_left, tree.left[cur], tree.right[cur])


def tree_predict(tree: RegressionTree, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return tree.value[_apply_tree(tree, X)]


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    seed: int = 0,
    n_trees: int = 100,
    max_depth: int = 8,
    feature_fraction: float = 1.0 / 3.0,
    min_leaf: int = 1,
) -> RegressionForest:
    """Bagged variance-reduction trees; one bootstrap resample per tree."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = len(y)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    trees = []
    for _ in range(n_trees):
        rows = rng.integers(0, n, n)
        tree_seed = int(rng.integers(0, 2**31 - 1))
        trees.append(fit_regression_tree(X[rows], y[rows], max_depth, min_leaf, feature_fraction, tree_seed))
    return RegressionForest(tuple(trees), feature_fraction)


def forest_predict(forest: RegressionForest, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    acc = np.zeros(X.shape[0])
    for tree in forest.trees:
        acc += tree.value[_apply_tree(tree, X)]
    return acc / len(forest.trees)


def empirical_quantile(v: np.ndarray, tau: float) -> float:
    """Lower empirical quantile: the smallest order statistic at or past tau."""
    return float(np.quantile(v, tau, method="inverted_cdf"))


def fit_gbt(
    X: np.ndarray,
    y: np.ndarray,
    loss: str = "squared",
    rounds: int = 100,
    depth: int = 4,
    lr: float = 0.1,
    seed: int = 0,
    tau: float | None = None,
) -> GbtModel:
    """Gradient-boosted trees with squared or pinball loss.

    Pinball rounds fit each tree to the sign gradient tau - 1{y < F} and then
    refit every leaf to the empirical tau-quantile of that leaf's residuals;
    plain gradient leaves would only ever step by multiples of lr.
    """
    if loss not in ("squared", "pinball"):
        raise ValueError(f"unknown loss {loss!r}")
    if loss == "pinball":
        if tau is None or not (0.0 < tau < 1.0):
            raise ValueError("pinball loss needs tau inside (0, 1)")
    if rounds < 1:
        raise ValueError("need at least one boosting round")
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = len(y)

    init = float(np.mean(y)) if loss == "squared" else empirical_quantile(y, tau)
    F = np.full(n, init)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    trees = []
    for _ in range(rounds):
        tree_seed = int(rng.integers(0, 2**31 - 1))
        if loss == "squared":
            tree = fit_regression_tree(X, y - F, depth, 1, 1.0, tree_seed)
        else:
            g = tau - (y < F).astype(np.float64)
            tree = fit_regression_tree(X, g, depth, 1, 1.0, tree_seed)
            resid = y - F
            new_val = tree.value.copy()
            for leaf in np.unique(tree.leaf_of_train):
                new_val[leaf] = empirical_quantile(resid[tree.leaf_of_train == leaf], tau)
            tree = dataclasses.replace(tree, value=new_val)
        F = F + lr * tree.value[tree.leaf_of_train]
        trees.append(tree)
    return GbtModel(tuple(trees), lr, loss, tau, init)


def gbt_predict(model: GbtModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    acc = np.full(X.shape[0], model.init)
    for tree in model.trees:
        acc += model.learning_rate * tree.value[_apply_tree(tree, X)]
    return acc
