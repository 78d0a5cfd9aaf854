"""Greedy regression trees on numeric features, shared by boosting and forests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

LEAF = -1


@dataclass
class Tree:
    """Flat binary tree. Node 0 is the root; ``feature == LEAF`` marks a leaf.

    Rows with ``x[feature] <= threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == LEAF

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for node in range(self.n_nodes):  # children always follow parents
            if self.feature[node] != LEAF:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        active = self.feature[node] != LEAF
        while active.any():
            r = rows[active]
            nd = node[r]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active[r] = self.feature[node[r]] != LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.array(d["feature"], dtype=np.intp),
            np.array(d["threshold"], dtype=float),
            np.array(d["left"], dtype=np.intp),
            np.array(d["right"], dtype=np.intp),
            np.array(d["value"], dtype=float),
        )


def presort(X: np.ndarray) -> np.ndarray:
    """Row order of every column, shape (features, rows); reusable across trees on the same X."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)


def _best_split_numpy(XT, t, order, feats, min_leaf):
    """Best (gain, feature, threshold) for one node.

    ``order`` holds, per feature, the node's rows sorted by that feature.
    """
    m = order.shape[1]
    lo, hi = min_leaf - 1, m - min_leaf - 1  # allowed last-left positions
    if lo > hi:
        return 0.0, LEAF, 0.0
    rows = order[feats]
    xs = np.take_along_axis(XT[feats], rows, axis=1)
    ts = t[rows]
    total = ts[0].sum()
    cs = np.cumsum(ts, axis=1)[:, lo:hi + 1]
    n_left = np.arange(lo + 1, hi + 2, dtype=float)
    s_left = cs
    s_right = total - s_left
    score = s_left * s_left / n_left + s_right * s_right / (m - n_left) - total * total / m
    valid = xs[:, lo:hi + 1] < xs[:, lo + 1:hi + 2]
    score = np.where(valid, score, -np.inf)
    best = np.argmax(score, axis=1)  # first (lowest threshold) per feature
    best_score = score[np.arange(len(feats)), best]
    j = int(np.argmax(best_score))  # first feature on ties
    if not np.isfinite(best_score[j]) or best_score[j] <= 0.0:
        return 0.0, LEAF, 0.0
    pos = lo + int(best[j])
    a, b = xs[j, pos], xs[j, pos + 1]
    thr = 0.5 * (a + b)
    if not a <= thr < b:
        thr = a
    return float(best_score[j]), int(feats[j]), float(thr)


def _scan_kernel(XT, t, order, feats, min_leaf, total):
    m = order.shape[1]
    lo, hi = min_leaf - 1, m - min_leaf - 1
    best_score, best_f, best_pos = -np.inf, -1, -1
    base = total * total / m
    for j in range(feats.size):
        f = feats[j]
        row = order[f]
        cs = 0.0
        for i in range(hi + 1):
            cs += t[row[i]]
            if i < lo:
                continue
            if not XT[f, row[i]] < XT[f, row[i + 1]]:
                continue
            n_left = i + 1.0
            s_right = total - cs
            score = cs * cs / n_left + s_right * s_right / (m - n_left) - base
            if score > best_score:
                best_score, best_f, best_pos = score, f, i
    return best_score, best_f, best_pos


if numba is not None:
    _scan_kernel = numba.njit(cache=True, nogil=True)(_scan_kernel)


def _best_split(XT, t, order, feats, min_leaf):
    m = order.shape[1]
    if min_leaf - 1 > m - min_leaf - 1:
        return 0.0, LEAF, 0.0
    total = float(t[order[0]].sum())
    score, f, pos = _scan_kernel(XT, t, order, np.asarray(feats, dtype=np.int64), min_leaf, total)
    if f < 0 or not score > 0.0:
        return 0.0, LEAF, 0.0
    a, b = XT[f, order[f, pos]], XT[f, order[f, pos + 1]]
    thr = 0.5 * (a + b)
    if not a <= thr < b:
        thr = a
    return float(score), int(f), float(thr)


def fit_regression_tree(
    X: np.ndarray,
    targets: np.ndarray,
    max_depth: int | None = None,
    min_leaf: int = 1,
    mtry: int | None = None,
    rng: np.random.Generator | None = None,
    sorted_rows: np.ndarray | None = None,
) -> Tree:
    """Grow a least-squares tree; leaves hold the mean target of their rows.

    Candidate thresholds are midpoints between consecutive distinct values.
    With ``mtry`` set, each split considers ``mtry`` features drawn without
    replacement from ``rng``. ``sorted_rows`` may pass a cached
    :func:`presort` of ``X``.
    """
    X = np.asarray(X, dtype=float)
    t = np.asarray(targets, dtype=float)
    n, p = X.shape
    if t.size != n:
        raise ValueError("X and targets differ in length")
    if n == 0:
        raise ValueError("cannot grow a tree on no rows")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    if max_depth is not None and max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    if mtry is not None:
        if not 1 <= mtry <= p:
            raise ValueError(f"mtry must lie in [1, {p}]")
        if rng is None:
            raise ValueError("mtry sampling needs an rng")
    depth_limit = max_depth if max_depth is not None else np.iinfo(np.int64).max
    XT = np.ascontiguousarray(X.T)
    order = presort(X) if sorted_rows is None else sorted_rows
    all_features = np.arange(p)
    go_left = np.zeros(n, dtype=bool)

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(rows):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(t[rows].mean()))
        return len(feature) - 1

    stack = [(new_node(order[0]), order, 0)]
    while stack:
        node, rows, depth = stack.pop()
        m = rows.shape[1]
        if depth >= depth_limit or m < 2 * min_leaf:
            continue
        tn = t[rows[0]]
        spread = float(np.sum((tn - tn.mean()) ** 2))
        if spread <= 0.0:
            continue
        feats = all_features if mtry is None else np.sort(rng.choice(p, mtry, replace=False))
        gain, f, thr = _best_split(XT, t, rows, feats, min_leaf)
        if f == LEAF or gain <= 1e-12 * spread:
            continue
        members = rows[0]
        go_left[members] = XT[f, members] <= thr
        sel = go_left[rows]
        n_left = int(sel[0].sum())
        left_rows = rows[sel].reshape(p, n_left)
        right_rows = rows[~sel].reshape(p, m - n_left)
        go_left[members] = False
        feature[node], threshold[node] = f, thr
        left[node] = new_node(left_rows[0])
        right[node] = new_node(right_rows[0])
        # right pushed first so the left subtree is expanded first
        stack.append((right[node], right_rows, depth + 1))
        stack.append((left[node], left_rows, depth + 1))

    return Tree(
        np.array(feature, dtype=np.intp),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.intp),
        np.array(right, dtype=np.intp),
        np.array(value, dtype=float),
    )
