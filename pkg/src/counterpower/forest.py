"""Regression trees and random forests with mean-decrease-in-impurity importance.

Trees are grown on bootstrap samples with variance reduction as the split
criterion.  At each node ``max(1, n_features // 3)`` candidate features are
examined (constant features are skipped and do not count, so a node only
becomes a leaf when no sampled-or-remaining feature can split it).  Nodes with
fewer than ``MIN_NODE_SIZE`` samples or zero target variance become leaves.

Every tree draws its randomness from ``SeedSequence([rng_seed, tree_index])``,
so a forest is reproducible tree by tree regardless of build order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .core import CounterVector, Dataset
from .errors import SchemaError

MIN_NODE_SIZE = 5
LEAF = -1
GAIN_RTOL = 1e-12


@dataclass(frozen=True)
class TreeNode:
    """Nested view of one node; ``feature`` is ``None`` for leaves."""

    value: float
    feature: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    n_samples: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass(frozen=True)
class RegressionTree:
    """Flat array encoding of a fitted tree.

    Node 0 is the root.  For split nodes ``feature[k] >= 0`` and samples with
    ``x[feature] <= threshold`` go to ``left[k]``; leaves have
    ``feature[k] == -1`` and predict ``value[k]`` (the mean target of the
    training samples that reached them).
    """

    feature: np.ndarray = field(repr=False)
    threshold: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)
    value: np.ndarray = field(repr=False)
    n_samples: np.ndarray = field(repr=False)

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def n_splits(self) -> int:
        return int(np.sum(self.feature != LEAF))

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            active = f != LEAF
            if not active.any():
                return self.value[node]
            a_rows, a_node = rows[active], node[active]
            go_left = X[a_rows, f[active]] <= self.threshold[a_node]
            node[active] = np.where(go_left, self.left[a_node], self.right[a_node])

    def root(self) -> TreeNode:
        def build(k):
            if self.feature[k] == LEAF:
                return TreeNode(float(self.value[k]), n_samples=int(self.n_samples[k]))
            return TreeNode(float(self.value[k]), int(self.feature[k]),
                            float(self.threshold[k]), build(self.left[k]),
                            build(self.right[k]), int(self.n_samples[k]))
        return build(0)

    def to_bytes(self) -> bytes:
        return b"".join(a.tobytes() for a in (self.feature, self.threshold, self.left,
                                              self.right, self.value, self.n_samples))


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[RegressionTree, ...]
    importance: np.ndarray = field(repr=False)
    n_features: int = 0

    @property
    def ntree(self) -> int:
        return len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise SchemaError(f"forest expects {self.n_features} features, got {X.shape[1]}")
        return np.mean([t.predict(X) for t in self.trees], axis=0)

    def to_bytes(self) -> bytes:
        return b"".join(t.to_bytes() for t in self.trees) + self.importance.tobytes()


def n_candidate_features(n_features: int) -> int:
    return max(1, n_features // 3)


def _best_split(x: np.ndarray, y: np.ndarray):
    """Best variance-reduction split of one feature at one node.

    ``y`` must be centred on the node mean.  Returns ``(gain, threshold)``
    or ``None`` when the feature is constant here.
    """
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    n = len(ys)
    csum = np.cumsum(ys)[:-1]
    n_left = np.arange(1, n, dtype=np.float64)
    # SSE_parent - SSE_left - SSE_right with sum(y) == 0 at this node
    gain = csum * csum * (1.0 / n_left + 1.0 / (n - n_left))
    gain = np.where(valid, gain, -np.inf)
    k = int(np.argmax(gain))
    lo, hi = xs[k], xs[k + 1]
    threshold = lo + (hi - lo) / 2.0
    if threshold >= hi:
        threshold = lo
    return float(gain[k]), float(threshold)


def _better(gain, f, best_gain, best_f, Xn) -> bool:
    """Whether feature ``f`` beats ``best_f`` at a node with rows ``Xn``.

    Gains equal up to rounding are broken on the node's column values
    (lexicographically smaller wins), so the choice depends neither on the
    order candidates were sampled in nor on column positions.
    """
    if abs(gain - best_gain) > GAIN_RTOL * max(abs(gain), abs(best_gain)):
        return gain > best_gain
    a, b = Xn[:, f], Xn[:, best_f]
    differ = np.flatnonzero(a != b)
    if len(differ) == 0:
        return f < best_f
    k = differ[0]
    return bool(a[k] < b[k])


def train_tree(X: np.ndarray, y: np.ndarray, rng: np.random.Generator,
               max_features: Optional[int] = None,
               min_node_size: int = MIN_NODE_SIZE):
    """Grow one tree on ``(X, y)`` as given (no resampling here).

    Returns the tree and its per-feature impurity decrease (un-normalized).
    """
    n, n_features = X.shape
    mtry = n_candidate_features(n_features) if max_features is None else max_features
    importance = np.zeros(n_features)
    feature, threshold, left, right, value, count = [], [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        yi = y[idx]
        # a constant node keeps its exact value rather than a rounded mean
        value.append(float(yi[0]) if np.all(yi == yi[0]) else float(np.mean(yi)))
        count.append(len(idx))
        return len(feature) - 1

    stack = [(new_node(np.arange(n)), np.arange(n))]
    while stack:
        k, idx = stack.pop()
        yk = y[idx]
        if len(idx) < min_node_size or np.all(yk == yk[0]):
            continue
        yc = yk - value[k]
        best = None
        tried = 0
        Xn = X[idx]
        for f in rng.permutation(n_features):
            if tried >= mtry:
                break
            split = _best_split(Xn[:, f], yc)
            if split is None:
                continue
            tried += 1
            if best is None or _better(split[0], int(f), best[0], best[1], Xn):
                best = (split[0], int(f), split[1])
        if best is None:
            continue
        gain, f, thr = best
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[k], threshold[k] = f, thr
        importance[f] += max(gain, 0.0)
        left[k] = new_node(li)
        right[k] = new_node(ri)
        stack.append((right[k], ri))
        stack.append((left[k], li))

    tree = RegressionTree(np.array(feature, dtype=np.intp), np.array(threshold),
                          np.array(left, dtype=np.intp), np.array(right, dtype=np.intp),
                          np.array(value), np.array(count, dtype=np.intp))
    return tree, importance


def fit_forest(X: np.ndarray, y: np.ndarray, ntree: int, rng_seed: int = 0, *,
               bootstrap: bool = True, max_features: Optional[int] = None,
               min_node_size: int = MIN_NODE_SIZE) -> ForestModel:
    """Array-level forest training; see :func:`train_forest`.

    ``bootstrap=False`` and ``max_features=n_features`` give a deterministic
    greedy forest, useful for checking structural properties.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, n_features = X.shape
    if n < 2:
        raise ValueError("a forest needs at least 2 training vectors")
    if ntree < 1:
        raise ValueError("ntree must be at least 1")
    trees = []
    total = np.zeros(n_features)
    for t in range(ntree):
        rng = np.random.default_rng(np.random.SeedSequence([rng_seed, t]))
        sample = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        tree, imp = train_tree(X[sample], y[sample], rng, max_features, min_node_size)
        trees.append(tree)
        total += imp
    s = total.sum()
    importance = total / s if s > 0 else np.zeros(n_features)
    importance.setflags(write=False)
    return ForestModel(tuple(trees), importance, n_features)


def train_forest(data: Dataset, ntree: int, rng_seed: int = 0, **kwargs) -> ForestModel:
    """Train a regression forest mapping (normalized) counters to power.

    Importance is the total variance decrease attributed to each feature,
    summed over all trees and scaled to sum to 1 (all zeros if no tree split).
    """
    if len(data) < 2:
        raise ValueError("a forest needs at least 2 training vectors")
    return fit_forest(data.counters, data.power, ntree, rng_seed, **kwargs)


def predict_forest(m: ForestModel, v: Union[CounterVector, np.ndarray]) -> float:
    x = np.asarray(v.counters if isinstance(v, CounterVector) else v, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict_forest takes a single vector; use ForestModel.predict")
    return float(m.predict(x.reshape(1, -1))[0])
