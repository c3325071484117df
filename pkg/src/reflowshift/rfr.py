"""Random forest regression with exhaustive split search.

Trees are grown fully: a node stops only when its target variance is
numerically zero (<= 1e-12) or no candidate feature admits a split.
Every midpoint between adjacent sorted distinct values of a candidate
feature is evaluated and the split minimizing the summed child squared
error (n_L*MSE_L + n_R*MSE_R) wins; ties break toward the smallest
threshold, then the smallest feature index.  Leaves predict the node
mean.

Each tree sees every training row; randomness enters only through the
feature subset each tree (or, optionally, each node) may split on.  The
per-tree random stream is derived from (seed, tree index), so the forest
is identical for a fixed seed no matter how many workers build it.
Feature importances are the summed impurity decrease per feature over
all splits of all trees, accumulated in tree order and normalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .errors import ShapeMismatch

DEFAULT_TREES = 1000
DEFAULT_FEATURE_FRACTION = 1.0 / 3.0

# A node whose target variance is below this is treated as pure.
_PURITY_VAR = 1e-12
_LEAF = -1


@dataclass
class SplitTree:
    """One regression tree as flat node arrays (feature == -1 marks a leaf)."""

    feature: np.ndarray    # int32, global feature index or -1
    threshold: np.ndarray  # float64
    left: np.ndarray       # int32 child node ids
    right: np.ndarray
    value: np.ndarray      # float64 node means
    count: np.ndarray      # int32 training rows per node
    feature_subset: np.ndarray            # global indices this tree could use
    gain_by_feature: np.ndarray = field(repr=False, default=None)  # impurity decrease

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        node = np.zeros(X.shape[0], dtype=np.int32)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                break
            idx = np.nonzero(active)[0]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
        return self.value[node]


@dataclass
class RfrModel:
    """A trained forest plus normalized impurity importances."""

    trees: list[SplitTree]
    importances: np.ndarray
    n_features: int
    feature_fraction: float
    seed: int
    per_node_subsets: bool = False

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def _score_sorted(xs: np.ndarray, ys: np.ndarray, t1: float, t2: float):
    """Best split over candidate columns laid out as rows, pre-sorted.

    xs/ys are (m, k): row j holds column j's sorted feature values and
    the targets in that order; t1/t2 are sum(y) and sum(y^2) of the node.
    Minimizing the summed child squared error is equivalent to maximizing
    sum_L^2/n_L + sum_R^2/n_R, so only the plain prefix sum is scanned.
    Returns None when no column splits, else (col, sorted position,
    threshold, (left sum, left sq-sum, left count, left sse), (right ...)).
    """
    m, k = xs.shape
    c1 = np.cumsum(ys[:, :-1], axis=1)
    n_left = np.arange(1, k, dtype=np.float64)[None, :]
    rsum = t1 - c1
    score = c1 * c1 / n_left + rsum * rsum / (float(k) - n_left)
    score[xs[:, 1:] == xs[:, :-1]] = -np.inf

    pos = score.argmax(axis=1)  # first maximum per column = smallest threshold
    rows = np.arange(m)
    col_best = score[rows, pos]
    finite = np.isfinite(col_best)
    if not finite.any():
        return None
    thrs = np.where(finite,
                    0.5 * (xs[rows, pos] + xs[rows, np.minimum(pos + 1, k - 1)]),
                    np.inf)
    j = int(np.lexsort((rows, thrs, -col_best))[0])
    p = int(pos[j])

    nl, nr = p + 1, k - p - 1
    yl = ys[j, : p + 1]
    lsum = float(c1[j, p])
    lsq = float(yl @ yl)
    rs, rsq = t1 - lsum, t2 - lsq
    lsse = max(0.0, lsq - lsum * lsum / nl)
    rsse = max(0.0, rsq - rs * rs / nr)
    return j, p, float(thrs[j]), (lsum, lsq, nl, lsse), (rs, rsq, nr, rsse)


def best_split(x, y, rows=None):
    """Exhaustive best split of one feature column.

    Returns (threshold, summed child squared error) or None when the
    column admits no split (fewer than 2 rows or all values equal).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeMismatch(f"column and target lengths differ: {x.shape} vs {y.shape}")
    if rows is not None:
        x, y = x[np.asarray(rows)], y[np.asarray(rows)]
    if len(x) < 2:
        return None
    order = np.argsort(x, kind="stable")
    found = _score_sorted(x[order][None, :], y[order][None, :],
                          float(y.sum()), float((y * y).sum()))
    if found is None:
        return None
    _, _, thr, (_, _, _, lsse), (_, _, _, rsse) = found
    return thr, lsse + rsse


def _split_two(x0, x1):
    """Best column/threshold for a 2-row node; children are both pure."""
    best_col, best_thr = -1, math.inf
    for j, (u, v) in enumerate(zip(x0, x1)):
        if u != v:
            t = 0.5 * (u + v)
            if t < best_thr:
                best_col, best_thr = j, t
    return best_col, best_thr


def _split_three(xn, yv):
    """Best column/threshold for a 3-row node.

    Returns (col, threshold, left row positions, right row positions)
    with the same score/threshold/column tie-break as the general scan.
    """
    best = None  # (score, thr, col, left_positions)
    for j in range(len(xn[0])):
        triple = sorted(((xn[i][j], i) for i in range(3)))
        (xa, ia), (xb, ib), (xc, ic) = triple
        if xa < xb:  # split {a} | {b, c}
            d = yv[ib] - yv[ic]
            cand = (0.5 * d * d, 0.5 * (xa + xb), j, (ia,))
            if best is None or cand[:2] < best[:2]:
                best = cand
        if xb < xc:  # split {a, b} | {c}
            d = yv[ia] - yv[ib]
            cand = (0.5 * d * d, 0.5 * (xb + xc), j, (ia, ib))
            if best is None or cand[:2] < best[:2]:
                best = cand
    if best is None:
        return None
    _, thr, col, left = best
    right = tuple(i for i in range(3) if i not in left)
    return col, thr, left, right


def grow_tree(X: np.ndarray, y: np.ndarray, feature_subset, rng=None,
              per_node_subsets: bool = False, node_subset_size: int | None = None) -> SplitTree:
    """Grow one fully expanded tree restricted to `feature_subset`.

    With ``per_node_subsets`` a fresh candidate subset of
    ``node_subset_size`` features is drawn at every node from `rng`
    (nodes are expanded in a fixed depth-first order, so the result is
    still deterministic for a given generator state).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    subset = np.sort(np.asarray(feature_subset, dtype=np.int64))
    n = X.shape[0]
    if n < 1:
        raise ShapeMismatch("cannot grow a tree on zero rows")
    Xsub = np.ascontiguousarray(X[:, subset])
    n_cols = Xsub.shape[1]
    col_ids = np.arange(n_cols)

    # A fully grown tree has at most 2n - 1 nodes.
    max_nodes = 2 * n - 1
    feature = np.full(max_nodes, _LEAF, dtype=np.int32)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, _LEAF, dtype=np.int32)
    right = np.full(max_nodes, _LEAF, dtype=np.int32)
    value = np.zeros(max_nodes, dtype=np.float64)
    count = np.zeros(max_nodes, dtype=np.int32)
    gain = np.zeros(X.shape[1], dtype=np.float64)
    n_nodes = 1  # root

    t1 = float(y.sum())
    t2 = float((y * y).sum())
    root_sse = max(0.0, t2 - t1 * t1 / n)
    # Columns are sorted once up front; children inherit the parent's
    # per-column order through a stable partition, so no node re-sorts.
    # sidx is (n_cols, k): row j holds column j's row ids in sorted order.
    # Stack entries carry the node's target sum/sq-sum/sse: means and
    # purity come from the parent's split scan, not a fresh pass.
    sidx0 = np.ascontiguousarray(np.argsort(Xsub, axis=0, kind="stable").T.astype(np.int32))
    stack = [(sidx0, 0, t1, t2, root_sse)]
    in_left = np.zeros(n, dtype=bool)  # reusable partition flag

    while stack:
        sidx, nid, s1, s2, sse = stack.pop()
        k = sidx.shape[1]
        value[nid] = s1 / k
        count[nid] = k
        if k < 2 or sse / k <= _PURITY_VAR:
            continue

        if per_node_subsets:
            m = min(node_subset_size or n_cols, n_cols)
            cols = np.sort(rng.choice(n_cols, size=m, replace=False))
        else:
            cols = col_ids

        if k == 2:
            rows = sidx[0]
            xn = Xsub[rows][:, cols]
            col, thr = _split_two(xn[0], xn[1])
            if col < 0:
                continue
            gcol = int(cols[col])
            feature[nid] = subset[gcol]
            threshold[nid] = thr
            gain[subset[gcol]] += sse
            lid, rid = n_nodes, n_nodes + 1
            n_nodes += 2
            left[nid], right[nid] = lid, rid
            lo = 0 if Xsub[rows[0], gcol] <= thr else 1
            value[lid], value[rid] = y[rows[lo]], y[rows[1 - lo]]
            count[lid] = count[rid] = 1
            continue

        if k == 3:
            rows = sidx[0]
            xn = Xsub[rows][:, cols].tolist()
            yv = y[rows].tolist()
            found3 = _split_three(xn, yv)
            if found3 is None:
                continue
            col, thr, lpos, rpos = found3
            gcol = int(cols[col])
            feature[nid] = subset[gcol]
            threshold[nid] = thr
            lid, rid = n_nodes, n_nodes + 1
            n_nodes += 2
            left[nid], right[nid] = lid, rid
            child_sse = 0.0
            for cid, posns in ((lid, lpos), (rid, rpos)):
                cy = [yv[i] for i in posns]
                value[cid] = sum(cy) / len(cy)
                count[cid] = len(cy)
                if len(cy) == 2:
                    c_sse = 0.5 * (cy[0] - cy[1]) ** 2
                    child_sse += c_sse
                    if c_sse / 2.0 > _PURITY_VAR:
                        crows = np.array([rows[i] for i in posns], dtype=np.int32)
                        stack.append((np.broadcast_to(crows[None, :], (n_cols, 2)).copy(),
                                      cid, float(sum(cy)),
                                      float(cy[0] ** 2 + cy[1] ** 2), c_sse))
            gain[subset[gcol]] += max(0.0, sse - child_sse)
            continue

        scan = sidx if not per_node_subsets else sidx[cols]
        xs = Xsub[scan, cols[:, None]]
        ys = y[scan]
        found = _score_sorted(xs, ys, s1, s2)
        if found is None:
            continue
        col, p, thr, lstats, rstats = found
        gcol = int(cols[col])
        feature[nid] = subset[gcol]
        threshold[nid] = thr
        gain[subset[gcol]] += max(0.0, sse - lstats[3] - rstats[3])

        left_rows = sidx[gcol, : p + 1] if not per_node_subsets else scan[col, : p + 1]
        nl = p + 1
        in_left[left_rows] = True
        go = in_left[sidx]
        left_sorted = sidx[go].reshape(n_cols, nl)
        right_sorted = sidx[~go].reshape(n_cols, k - nl)
        in_left[left_rows] = False

        lid, rid = n_nodes, n_nodes + 1
        n_nodes += 2
        left[nid], right[nid] = lid, rid
        # Right first so the left child is expanded first (LIFO order).
        stack.append((right_sorted, rid, rstats[0], rstats[1], rstats[3]))
        stack.append((left_sorted, lid, lstats[0], lstats[1], lstats[3]))

    return SplitTree(
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        count[:n_nodes].copy(),
        subset,
        gain,
    )


def _build_one_tree(X, y, p, subset_size, seed, tree_index, per_node):
    rng = np.random.default_rng(np.random.SeedSequence((seed, tree_index)))
    subset = np.sort(rng.choice(p, size=subset_size, replace=False))
    if per_node:
        return grow_tree(X, y, np.arange(p), rng,
                         per_node_subsets=True, node_subset_size=subset_size)
    return grow_tree(X, y, subset)


def train_rfr(X: np.ndarray, y: np.ndarray, n_trees: int = DEFAULT_TREES,
              feature_fraction: float = DEFAULT_FEATURE_FRACTION, seed: int = 0,
              n_jobs: int = 1, per_node_subsets: bool = False) -> RfrModel:
    """Train a forest of `n_trees` fully grown trees on all rows."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ShapeMismatch(f"X {X.shape} does not match y {y.shape}")
    if X.shape[0] < 2:
        raise ShapeMismatch("need at least 2 training rows")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    p = X.shape[1]
    subset_size = min(p, max(1, math.ceil(feature_fraction * p)))

    if n_jobs == 1:
        trees = [_build_one_tree(X, y, p, subset_size, seed, i, per_node_subsets)
                 for i in range(n_trees)]
    else:
        trees = Parallel(n_jobs=n_jobs)(
            delayed(_build_one_tree)(X, y, p, subset_size, seed, i, per_node_subsets)
            for i in range(n_trees)
        )

    total_gain = np.zeros(p, dtype=np.float64)
    for tree in trees:  # fixed tree order keeps the reduction deterministic
        total_gain += tree.gain_by_feature
    gain_sum = total_gain.sum()
    importances = total_gain / gain_sum if gain_sum > 0 else np.zeros(p)

    return RfrModel(trees, importances, p, feature_fraction, seed, per_node_subsets)


def predict_rfr(model: RfrModel, x) -> np.ndarray | float:
    """Mean of the per-tree predictions; accepts one row or a matrix."""
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.n_features:
        raise ShapeMismatch(f"expected {model.n_features} features, got {X.shape[1]}")
    acc = np.zeros(X.shape[0], dtype=np.float64)
    for tree in model.trees:
        acc += tree.predict(X)
    out = acc / model.n_trees
    return float(out[0]) if single else out


def select_important(importances, rule: str = "uniform-share", top_k: int | None = None):
    """Features whose importance clears the keep rule, ranked descending.

    'uniform-share' keeps importance strictly greater than 1/p (so a
    perfectly flat profile keeps nothing); 'top-k' keeps the k largest.
    """
    imp = np.asarray(importances, dtype=np.float64)
    ranked = np.argsort(-imp, kind="stable")
    if rule == "top-k":
        if not top_k or top_k < 1:
            raise ValueError("top-k rule needs top_k >= 1")
        return [int(i) for i in ranked[:top_k]]
    if rule == "uniform-share":
        cut = 1.0 / len(imp)
        return [int(i) for i in ranked if imp[i] > cut]
    raise ValueError(f"unknown selection rule {rule!r}")
