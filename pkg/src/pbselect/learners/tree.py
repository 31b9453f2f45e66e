"""CART decision trees grown from scratch on numpy arrays.

Both tree kinds share the same growth loop: at every node a seeded sample
of ceil(sqrt(d)) candidate features is scanned, thresholds sit at midpoints
of consecutive distinct sorted values, rows go left when ``x <= threshold``,
and a node becomes a leaf when it is pure, the depth cap is hit, or no
candidate split has positive gain.  Classification trees maximize weighted
Gini impurity decrease; regression trees maximize weighted variance
(sum-of-squares) decrease.  Every accepted split adds its weighted
impurity decrease to a per-feature ledger, which feeds MDI importances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_GAIN_EPS = 1e-12


def sample_features(rng: np.random.Generator, n_features: int, max_features) -> np.ndarray:
    """Candidate feature indices for one node, sampled without replacement."""
    if max_features is None:
        return np.arange(n_features)
    if max_features == "sqrt":
        m = math.isqrt(n_features)
        if m * m < n_features:
            m += 1
    else:
        m = min(int(max_features), n_features)
    return rng.choice(n_features, size=m, replace=False)


def gini_impurity(class_weights: np.ndarray) -> float:
    total = class_weights.sum()
    if total <= 0:
        return 0.0
    p = class_weights / total
    return float(1.0 - (p * p).sum())


def _best_threshold_gini(x: np.ndarray, cw: np.ndarray):
    """Best (score, threshold) for one feature of a classification node.

    ``cw`` holds per-row one-hot class weights aligned with ``x``.  The
    maximized score is sum_c(L_c^2)/W_L + sum_c(R_c^2)/W_R, which orders
    splits identically to weighted Gini decrease.
    """
    order = np.argsort(x, kind="stable")
    xs = x[order]
    pre = np.cumsum(cw[order], axis=0)
    total = pre[-1]
    cut = np.nonzero(xs[:-1] < xs[1:])[0]
    if cut.size == 0:
        return None
    left = pre[cut]
    right = total - left
    wl = left.sum(axis=1)
    wr = right.sum(axis=1)
    score = (left * left).sum(axis=1) / wl + (right * right).sum(axis=1) / wr
    k = int(np.argmax(score))
    threshold = (xs[cut[k]] + xs[cut[k] + 1]) / 2.0
    return float(score[k]), threshold


def _best_threshold_sse(x: np.ndarray, w: np.ndarray, t: np.ndarray):
    """Best (SSE_left + SSE_right, threshold) for one regression feature."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ws = w[order]
    ts = t[order]
    cw = np.cumsum(ws)
    cwt = np.cumsum(ws * ts)
    cwt2 = np.cumsum(ws * ts * ts)
    cut = np.nonzero(xs[:-1] < xs[1:])[0]
    if cut.size == 0:
        return None
    wl, wr = cw[cut], cw[-1] - cw[cut]
    sl, sr = cwt[cut], cwt[-1] - cwt[cut]
    ql, qr = cwt2[cut], cwt2[-1] - cwt2[cut]
    sse = (ql - sl * sl / wl) + (qr - sr * sr / wr)
    k = int(np.argmin(sse))
    threshold = (xs[cut[k]] + xs[cut[k] + 1]) / 2.0
    return float(sse[k]), threshold


@dataclass
class _NodeArrays:
    """Flat tree storage; feature[i] == -1 marks a leaf."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)

    def new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        return len(self.feature) - 1

    def descend(self, values) -> int:
        i = 0
        feature, threshold = self.feature, self.threshold
        left, right = self.left, self.right
        while feature[i] >= 0:
            i = left[i] if values[feature[i]] <= threshold[i] else right[i]
        return i

    def descend_batch(self, X: np.ndarray) -> np.ndarray:
        feature = np.asarray(self.feature, dtype=np.intp)
        threshold = np.asarray(self.threshold)
        left = np.asarray(self.left, dtype=np.intp)
        right = np.asarray(self.right, dtype=np.intp)
        cur = np.zeros(len(X), dtype=np.intp)
        while True:
            f = feature[cur]
            live = np.nonzero(f >= 0)[0]
            if live.size == 0:
                return cur
            at = cur[live]
            go_left = X[live, f[live]] <= threshold[at]
            cur[live] = np.where(go_left, left[at], right[at])


class ClassificationTree:
    """Gini-criterion CART classifier storing leaf class distributions."""

    def __init__(self, n_features: int, n_classes: int):
        self.n_features = n_features
        self.n_classes = n_classes
        self.nodes = _NodeArrays()
        self.leaf_dist: list[list[float] | None] = []
        self.raw_importances = np.zeros(n_features)
        self._dist_matrix: np.ndarray | None = None

    def _add_node(self) -> int:
        node = self.nodes.new_node()
        self.leaf_dist.append(None)
        return node

    def predict_dist_one(self, values) -> list[float]:
        return self.leaf_dist[self.nodes.descend(values)]

    def predict_dist_batch(self, X: np.ndarray) -> np.ndarray:
        if self._dist_matrix is None:
            m = np.zeros((len(self.leaf_dist), self.n_classes))
            for i, dist in enumerate(self.leaf_dist):
                if dist is not None:
                    m[i] = dist
            self._dist_matrix = m
        return self._dist_matrix[self.nodes.descend_batch(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.nodes.feature,
            "threshold": self.nodes.threshold,
            "left": self.nodes.left,
            "right": self.nodes.right,
            "leaf_dist": self.leaf_dist,
            "raw_importances": self.raw_importances.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict, n_features: int, n_classes: int) -> "ClassificationTree":
        tree = cls(n_features, n_classes)
        tree.nodes = _NodeArrays(
            feature=list(data["feature"]),
            threshold=list(data["threshold"]),
            left=list(data["left"]),
            right=list(data["right"]),
        )
        tree.leaf_dist = [None if d is None else list(d) for d in data["leaf_dist"]]
        tree.raw_importances = np.array(data["raw_importances"])
        return tree


def grow_classification_tree(
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    n_classes: int,
    rng: np.random.Generator,
    max_depth: int | None = None,
    max_features="sqrt",
) -> ClassificationTree:
    if len(X) == 0:
        raise ValueError("cannot fit a tree on an empty sample")
    n, d = X.shape
    tree = ClassificationTree(d, n_classes)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = w

    root = tree._add_node()
    stack = [(np.arange(n), 0, root)]
    while stack:
        idx, depth, node = stack.pop()
        cw = onehot[idx].sum(axis=0)
        total = cw.sum()
        present = int((cw > 0).sum())
        depth_ok = max_depth is None or depth < max_depth
        best = None
        if present > 1 and depth_ok and idx.size >= 2:
            parent_score = float((cw * cw).sum()) / total
            for f in sample_features(rng, d, max_features):
                col = X[idx, f]
                if col.min() == col.max():
                    continue
                found = _best_threshold_gini(col, onehot[idx])
                if found is None:
                    continue
                score, threshold = found
                if best is None or score > best[0]:
                    best = (score, int(f), threshold)
            if best is not None and best[0] - parent_score <= _GAIN_EPS:
                best = None
        if best is None:
            tree.leaf_dist[node] = (cw / total).tolist()
            continue
        score, f, threshold = best
        # weighted Gini decrease: W*g_parent - (W_L*g_L + W_R*g_R)
        tree.raw_importances[f] += score - float((cw * cw).sum()) / total
        go_left = X[idx, f] <= threshold
        tree.nodes.feature[node] = f
        tree.nodes.threshold[node] = threshold
        left = tree._add_node()
        right = tree._add_node()
        tree.nodes.left[node] = left
        tree.nodes.right[node] = right
        stack.append((idx[~go_left], depth + 1, right))
        stack.append((idx[go_left], depth + 1, left))
    return tree


class RegressionTree:
    """Variance-reduction CART regressor; leaf values are set by the caller."""

    def __init__(self, n_features: int):
        self.n_features = n_features
        self.nodes = _NodeArrays()
        self.leaf_value: list[float] = []
        self.raw_importances = np.zeros(n_features)
        self._value_array: np.ndarray | None = None

    def _add_node(self) -> int:
        node = self.nodes.new_node()
        self.leaf_value.append(0.0)
        return node

    def predict_one(self, values) -> float:
        return self.leaf_value[self.nodes.descend(values)]

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        if self._value_array is None:
            self._value_array = np.asarray(self.leaf_value)
        return self._value_array[self.nodes.descend_batch(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.nodes.feature,
            "threshold": self.nodes.threshold,
            "left": self.nodes.left,
            "right": self.nodes.right,
            "leaf_value": self.leaf_value,
            "raw_importances": self.raw_importances.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict, n_features: int) -> "RegressionTree":
        tree = cls(n_features)
        tree.nodes = _NodeArrays(
            feature=list(data["feature"]),
            threshold=list(data["threshold"]),
            left=list(data["left"]),
            right=list(data["right"]),
        )
        tree.leaf_value = list(data["leaf_value"])
        tree.raw_importances = np.array(data["raw_importances"])
        return tree


def grow_regression_tree(
    X: np.ndarray,
    targets: np.ndarray,
    w: np.ndarray,
    rng: np.random.Generator,
    max_depth: int | None = 3,
    max_features="sqrt",
) -> tuple[RegressionTree, np.ndarray]:
    """Grow the tree and return it with each training row's leaf id."""
    if len(X) == 0:
        raise ValueError("cannot fit a tree on an empty sample")
    n, d = X.shape
    tree = RegressionTree(d)
    assignment = np.zeros(n, dtype=np.intp)

    root = tree._add_node()
    stack = [(np.arange(n), 0, root)]
    while stack:
        idx, depth, node = stack.pop()
        wi = w[idx]
        ti = targets[idx]
        wt = float(wi.sum())
        mean = float((wi * ti).sum()) / wt
        parent_sse = float((wi * (ti - mean) ** 2).sum())
        depth_ok = max_depth is None or depth < max_depth
        best = None
        if depth_ok and idx.size >= 2 and parent_sse > _GAIN_EPS:
            for f in sample_features(rng, d, max_features):
                col = X[idx, f]
                if col.min() == col.max():
                    continue
                found = _best_threshold_sse(col, wi, ti)
                if found is None:
                    continue
                sse, threshold = found
                if best is None or sse < best[0]:
                    best = (sse, int(f), threshold)
            if best is not None and parent_sse - best[0] <= _GAIN_EPS:
                best = None
        if best is None:
            assignment[idx] = node
            continue
        sse, f, threshold = best
        tree.raw_importances[f] += parent_sse - sse
        go_left = X[idx, f] <= threshold
        tree.nodes.feature[node] = f
        tree.nodes.threshold[node] = threshold
        left = tree._add_node()
        right = tree._add_node()
        tree.nodes.left[node] = left
        tree.nodes.right[node] = right
        stack.append((idx[~go_left], depth + 1, right))
        stack.append((idx[go_left], depth + 1, left))
    return tree, assignment
