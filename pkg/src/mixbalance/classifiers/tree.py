"""CART-style decision tree with Gini splits on continuous features.

Nodes are stored in flat arrays (``feature == -1`` marks a leaf) so that
prediction is a vectorized walk and the model serializes to plain lists.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._common import check_width, majority_label


@dataclass(frozen=True, eq=False)
class DecisionTreeModel:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray
    n_features: int

    family = "decision_tree"

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Index of the leaf each row lands in."""
        X = check_width(X, self.n_features)
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            n = node[active]
            go_left = X[active, self.feature[n]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.label[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "n_features": self.n_features,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "label": self.label.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> DecisionTreeModel:
        return cls(
            np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=float),
            np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
            np.array(d["label"], dtype=np.int64), d["n_features"],
        )


def gini(n_pos, n) -> np.ndarray:
    p = n_pos / n
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def _split_from_sorted(xs: np.ndarray, ys: np.ndarray, features: np.ndarray):
    """Best split given per-feature sorted values ``xs`` and labels ``ys`` (k x m)."""
    m = xs.shape[1]
    distinct = xs[:, 1:] > xs[:, :-1]
    if not distinct.any():
        return None
    cl = np.cumsum(ys, axis=1)[:, :-1].astype(float)
    nl = np.arange(1, m, dtype=float)
    nr = m - nl
    total = float(ys[0].sum())
    cr = total - cl
    # m * (parent gini - weighted child gini) = sum over sides of sum_c n_c^2 / n_side - parent term
    purity = (cl * cl + (nl - cl) ** 2) / nl + (cr * cr + (nr - cr) ** 2) / nr
    gain = (purity - (total * total + (m - total) ** 2) / m) / m
    gain = np.where(distinct, gain, -np.inf)
    # row-major argmax: earliest feature first, then lowest threshold
    f_pos, i = divmod(int(np.argmax(gain)), m - 1)
    lo, hi = xs[f_pos, i], xs[f_pos, i + 1]
    thr = lo + (hi - lo) / 2.0
    if thr >= hi:
        thr = lo
    return int(features[f_pos]), float(thr), float(gain[f_pos, i])


def best_split(X: np.ndarray, y: np.ndarray, features) -> tuple[int, float, float] | None:
    """Best (feature, threshold, gini_gain) over the given candidate features.

    Thresholds are midpoints between consecutive distinct values. Equal
    gains resolve to the earlier feature in ``features``, then the lower
    threshold. Returns None when every candidate feature is constant.
    """
    features = np.asarray(features)
    xs = np.asarray(X, float)[:, features].T
    order = np.argsort(xs, axis=1)
    return _split_from_sorted(np.take_along_axis(xs, order, axis=1),
                              np.asarray(y)[order], features)


def resolve_max_features(max_features, n_features: int) -> int:
    if max_features is None:
        return n_features
    if max_features == "sqrt":
        return max(1, math.ceil(math.sqrt(n_features)))
    k = int(max_features)
    if not 1 <= k <= n_features:
        raise ValueError(f"max_features must be in 1..{n_features}, got {k}")
    return k


def grow_tree(X: np.ndarray, y: np.ndarray, max_depth: int | None, max_features: int,
              rng: np.random.Generator) -> DecisionTreeModel:
    n, d = X.shape
    XT = np.ascontiguousarray(X.T)
    feature, threshold, left, right, label = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        label.append(majority_label(y[idx]))
        return len(feature) - 1

    def search(order, cols):
        xs = np.take_along_axis(XT[cols], order[cols], axis=1)
        return _split_from_sorted(xs, y[order[cols]], cols)

    # order[f] lists the node's rows sorted by feature f; children inherit
    # their slices by a stable partition, so nothing is re-sorted
    root_order = np.argsort(XT, axis=1, kind="stable")
    goes_left = np.zeros(n, dtype=bool)
    stack = [(new_node(root_order[0]), root_order, 0)]
    while stack:
        node, order, depth = stack.pop()
        idx = order[0]
        n_pos = int(y[idx].sum())
        if n_pos == 0 or n_pos == len(idx):
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        if max_features < d:
            perm = rng.permutation(d)
            split = search(order, np.sort(perm[:max_features]))
            if split is None:
                split = search(order, np.sort(perm[max_features:]))
        else:
            split = search(order, np.arange(d))
        if split is None:
            # rows identical on every feature but labels mixed: majority leaf
            continue
        f, thr, _ = split
        feature[node], threshold[node] = f, thr
        goes_left[idx] = XT[f, idx] <= thr
        flags = goes_left[order]
        n_left = int(flags[0].sum())
        left_order = order[flags].reshape(d, n_left)
        right_order = order[~flags].reshape(d, len(idx) - n_left)
        left[node] = new_node(left_order[0])
        right[node] = new_node(right_order[0])
        stack.append((right[node], right_order, depth + 1))
        stack.append((left[node], left_order, depth + 1))

    return DecisionTreeModel(
        np.array(feature, dtype=np.int64), np.array(threshold, dtype=float),
        np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
        np.array(label, dtype=np.int64), d,
    )


def fit_decision_tree(train, spec, seed: int = 0) -> DecisionTreeModel:
    if len(train) == 0:
        raise ValueError("cannot fit a decision tree on an empty dataset")
    hp = spec.params
    X, y = train.rows, train.labels
    k = resolve_max_features(hp.get("max_features"), X.shape[1])
    return grow_tree(X, y, hp.get("max_depth"), k, np.random.default_rng(seed))
