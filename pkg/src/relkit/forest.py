"""Gini decision trees and a bagged random forest.

The forest is the reference black-box classifier of the simulated
experiment; the toolkit itself only ever sees its recorded predictions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitError, InputShapeError, ParameterError


def _best_split(X, y, min_samples_leaf, features):
    n = len(y)
    best = (np.inf, -1, 0.0)
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        pos_left = np.cumsum(ys)[:-1].astype(np.float64)
        n_left = np.arange(1, n, dtype=np.float64)
        n_right = n - n_left
        pos_right = ys.sum() - pos_left
        p_l = pos_left / n_left
        p_r = pos_right / n_right
        # weighted Gini of the two children (times n)
        score = n_left * 2.0 * p_l * (1.0 - p_l) + n_right * 2.0 * p_r * (1.0 - p_r)
        valid = (xs[1:] != xs[:-1]) & (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
        if not valid.any():
            continue
        score = np.where(valid, score, np.inf)
        i = int(np.argmin(score))
        if score[i] < best[0]:
            best = (score[i] / n, f, 0.5 * (xs[i] + xs[i + 1]))
    return best


@dataclass
class DecisionTree:
    """Array-encoded binary tree; ``value[i]`` is P(class 1) at node i."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int

    @classmethod
    def fit(cls, X, y, max_depth=12, min_samples_leaf=1, max_features=None, rng=None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y).astype(np.int64)
        if X.ndim != 2 or len(y) != X.shape[0] or len(y) == 0:
            raise InputShapeError(f"bad training shapes {X.shape} / {y.shape}")
        d = X.shape[1]
        n_feat = d if max_features is None else max(1, min(d, int(max_features)))
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node(p1):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(p1)
            return len(value) - 1

        stack = [(np.arange(len(y)), 0, new_node(float(y.mean())))]
        while stack:
            idx, depth, node = stack.pop()
            ys = y[idx]
            n = len(idx)
            p1 = value[node]
            if depth >= max_depth or n < 2 * min_samples_leaf or p1 in (0.0, 1.0):
                continue
            features = np.arange(d) if n_feat == d else np.sort(rng.choice(d, n_feat, replace=False))
            score, f, thr = _best_split(X[idx], ys, min_samples_leaf, features)
            if f < 0 or score >= 2.0 * p1 * (1.0 - p1) - 1e-12:
                continue
            go_left = X[idx, f] <= thr
            li, ri = idx[go_left], idx[~go_left]
            feature[node] = int(f)
            threshold[node] = float(thr)
            left[node] = new_node(float(y[li].mean()))
            right[node] = new_node(float(y[ri].mean()))
            stack.append((ri, depth + 1, right[node]))
            stack.append((li, depth + 1, left[node]))
        return cls(
            np.array(feature, dtype=np.int64),
            np.array(threshold),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(value),
            d,
        )

    @property
    def n_nodes(self):
        return len(self.value)

    def leaf_index(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise InputShapeError(f"expected (n, {self.n_features}) input, got {X.shape}")
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            a = np.flatnonzero(active)
            cur = node[a]
            go_left = X[a, self.feature[cur]] <= self.threshold[cur]
            node[a] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] >= 0
        return node

    def leaf_proba(self, X):
        """``(n, 2)`` class probabilities; each row sums to 1."""
        p1 = self.value[self.leaf_index(X)]
        return np.column_stack([1.0 - p1, p1])

    def predict_proba(self, X):
        return self.value[self.leaf_index(X)]

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.array(d["feature"], dtype=np.int64),
            np.array(d["threshold"], dtype=np.float64),
            np.array(d["left"], dtype=np.int64),
            np.array(d["right"], dtype=np.int64),
            np.array(d["value"], dtype=np.float64),
            int(d["n_features"]),
        )


@dataclass
class RandomForest:
    trees: list
    max_depth: int
    min_samples_leaf: int
    seed: int

    @property
    def n_trees(self):
        return len(self.trees)

    def predict_proba(self, X):
        """Mean over trees of the leaf P(class 1)."""
        X = np.asarray(X, dtype=np.float64)
        return np.mean([t.predict_proba(X) for t in self.trees], axis=0)

    def predict(self, X):
        return (self.predict_proba(X) > 0.5).astype(np.int64)


def rf_fit(X, y, n_trees=100, seed=0, max_depth=12, min_samples_leaf=1, max_features=None, bootstrap=True):
    """Bagged Gini trees, each with its own child seed of ``seed``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if n_trees < 1:
        raise ParameterError(f"n_trees must be >= 1, got {n_trees}")
    if not np.isin(y, (0, 1)).all():
        raise FitError("labels must be binary 0/1")
    counts = np.bincount(y, minlength=2)
    if (counts < 2).any():
        raise FitError(f"need >= 2 samples per class, got counts {counts.tolist()}")
    n = len(y)
    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        idx = rng.integers(0, n, n) if bootstrap else np.arange(n)
        trees.append(DecisionTree.fit(X[idx], y[idx], max_depth, min_samples_leaf, max_features, rng))
    return RandomForest(trees, max_depth, min_samples_leaf, seed)


def rf_predict(rf, x):
    """``(label, P(class 1))`` for one row, or arrays for a batch."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    p = rf.predict_proba(x.reshape(1, -1) if single else x)
    labels = (p > 0.5).astype(np.int64)
    if single:
        return int(labels[0]), float(p[0])
    return labels, p
