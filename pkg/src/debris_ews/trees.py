"""Greedy binary decision trees grown on exact sorted scans.

Split candidates are midpoints between consecutive distinct values of a
feature; the winner is the weighted-Gini minimizer (classification) or the
second-order gain maximizer (boosting stages). Ties go to the lowest feature
index, then the lowest threshold, so training is reproducible bit for bit.
min_samples_leaf bounds the raw (unweighted) row count of every leaf, which
keeps tree structure invariant under rescaling of the sample weights.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._common import InputError

log = logging.getLogger(__name__)

_NO_FEATURE = -1
_REL_EPS = 1e-12


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    min_samples_leaf: int = 1
    max_features: int | None = None  # features tried per split; None means all

    def __post_init__(self) -> None:
        if self.max_depth is not None and self.max_depth < 0:
            raise InputError("max_depth must be None or >= 0")
        if self.min_samples_leaf < 1:
            raise InputError("min_samples_leaf must be >= 1")
        if self.max_features is not None and self.max_features < 1:
            raise InputError("max_features must be None or >= 1")


@dataclass(frozen=True)
class DecisionTree:
    """Node arrays; leaves have feature == -1.

    value holds the weighted positive fraction at each leaf for classifier
    trees and the regularized leaf score for boosted regression trees; weight
    holds the matching weighted sample count (hessian mass for boosted trees).
    Rows with x[feature] < threshold go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    weight: np.ndarray
    n_features: int
    params: TreeParams

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature == _NO_FEATURE))

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int32)
        out = 0
        for i in range(self.n_nodes):
            if self.feature[i] != _NO_FEATURE:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
            else:
                out = max(out, int(depths[i]))
        return out

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        X = _check_matrix(X, self.n_features)
        idx = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            active = np.flatnonzero(self.feature[idx] != _NO_FEATURE)
            if active.size == 0:
                return self.value[idx]
            cur = idx[active]
            go_left = X[active, self.feature[cur]] < self.threshold[cur]
            idx[active] = np.where(go_left, self.left[cur], self.right[cur])


def _check_matrix(X: np.ndarray, n_features: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise InputError(f"feature matrix must be non-empty 2-D, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise InputError("feature matrix contains NaN or infinite values")
    if n_features is not None and X.shape[1] != n_features:
        raise InputError(f"expected {n_features} features, got {X.shape[1]}")
    return X


def check_training_inputs(
    X: np.ndarray, y: Sequence[int], sample_weight: Sequence[float] | None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    X = _check_matrix(X)
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise InputError("labels must be 1-D and match the number of rows")
    uniq = np.unique(y)
    if not np.isin(uniq, (0, 1)).all():
        raise InputError(f"labels must be binary 0/1, got values {uniq[:5]}")
    y = y.astype(np.float64)
    if sample_weight is None:
        w = np.ones(X.shape[0])
    else:
        w = np.asarray(sample_weight, dtype=np.float64)
        if w.shape != (X.shape[0],):
            raise InputError("sample weights must match the number of rows")
        if not np.isfinite(w).all() or (w <= 0).any():
            raise InputError("sample weights must be finite and > 0")
    return X, y, w


class _GiniCriterion:
    """Weighted Gini impurity; leaf value is the weighted positive fraction."""

    def __init__(self, X: np.ndarray, y: np.ndarray, w: np.ndarray, min_leaf: int):
        self.X = X
        self.y = y
        self.w = w
        self.wy = w * y
        self.min_leaf = min_leaf

    def is_pure(self, rows: np.ndarray) -> bool:
        yr = self.y[rows]
        return bool(yr.max() == yr.min())

    def leaf(self, rows: np.ndarray) -> tuple[float, float]:
        wt = float(self.w[rows].sum())
        return float(self.wy[rows].sum() / wt), wt

    def best_split(self, rows: np.ndarray, features: np.ndarray) -> tuple[int, float] | None:
        nr = rows.size
        wv = self.w[rows]
        pv = self.wy[rows]
        W = float(wv.sum())
        P = float(pv.sum())
        parent = P * (W - P) / W
        best_score = parent * (1.0 - _REL_EPS)  # require a real impurity decrease
        best = None
        for f in features:
            vals = self.X[rows, f]
            order = np.argsort(vals, kind="stable")
            v = vals[order]
            cw = np.cumsum(wv[order])[:-1]
            cp = np.cumsum(pv[order])[:-1]
            ok = v[1:] > v[:-1]
            if self.min_leaf > 1:
                k = np.arange(1, nr)
                ok &= (k >= self.min_leaf) & (nr - k >= self.min_leaf)
            idx = np.flatnonzero(ok)
            if idx.size == 0:
                continue
            wl = cw[idx]
            pl = cp[idx]
            wr = W - wl
            pr = P - pl
            score = pl * (wl - pl) / wl + pr * (wr - pr) / wr
            j = int(np.argmin(score))
            if score[j] < best_score:
                best_score = float(score[j])
                i = int(idx[j])
                thr = 0.5 * (v[i] + v[i + 1])
                if thr <= v[i]:  # adjacent floats can round the midpoint down
                    thr = float(v[i + 1])
                best = (int(f), float(thr))
        return best


class _GainCriterion:
    """Second-order boosting gain with L2 leaf regularization."""

    def __init__(self, X: np.ndarray, g: np.ndarray, h: np.ndarray, min_leaf: int, lam: float):
        self.X = X
        self.g = g
        self.h = h
        self.min_leaf = min_leaf
        self.lam = lam

    def is_pure(self, rows: np.ndarray) -> bool:
        return False

    def leaf(self, rows: np.ndarray) -> tuple[float, float]:
        H = float(self.h[rows].sum())
        return float(-self.g[rows].sum() / (H + self.lam)), H

    def best_split(self, rows: np.ndarray, features: np.ndarray) -> tuple[int, float] | None:
        nr = rows.size
        gv = self.g[rows]
        hv = self.h[rows]
        G = float(gv.sum())
        H = float(hv.sum())
        parent = G * G / (H + self.lam)
        min_gain = _REL_EPS * max(1.0, abs(parent))
        best_gain = min_gain
        best = None
        for f in features:
            vals = self.X[rows, f]
            order = np.argsort(vals, kind="stable")
            v = vals[order]
            cg = np.cumsum(gv[order])[:-1]
            ch = np.cumsum(hv[order])[:-1]
            ok = v[1:] > v[:-1]
            if self.min_leaf > 1:
                k = np.arange(1, nr)
                ok &= (k >= self.min_leaf) & (nr - k >= self.min_leaf)
            idx = np.flatnonzero(ok)
            if idx.size == 0:
                continue
            gl = cg[idx]
            hl = ch[idx]
            gain = gl * gl / (hl + self.lam) + (G - gl) ** 2 / (H - hl + self.lam) - parent
            j = int(np.argmax(gain))
            if gain[j] > best_gain:
                best_gain = float(gain[j])
                i = int(idx[j])
                thr = 0.5 * (v[i] + v[i + 1])
                if thr <= v[i]:
                    thr = float(v[i + 1])

                best = (int(f), float(thr))
        return best


def _grow(criterion, X: np.ndarray, params: TreeParams, rng: np.random.Generator | None) -> DecisionTree:
    n, m = X.shape
    m_try = m if params.max_features is None else params.max_features
    if m_try > m:
        raise InputError(f"max_features={m_try} exceeds feature count {m}")
    if m_try < m and rng is None:
        raise InputError("feature subsampling requires a seeded generator")
    max_depth = np.inf if params.max_depth is None else params.max_depth
    all_features = np.arange(m)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    weight: list[float] = []

    def new_node() -> int:
        feature.append(_NO_FEATURE)
        threshold.append(np.nan)
        left.append(_NO_FEATURE)
        right.append(_NO_FEATURE)
        value.append(0.0)
        weight.append(0.0)
        return len(feature) - 1

    # stack keeps (slot, rows, depth); children pushed right-then-left so the
    # left subtree (and its RNG draws) always comes first
    stack = [(new_node(), np.arange(n), 0)]
    while stack:
        slot, rows, depth = stack.pop()
        value[slot], weight[slot] = criterion.leaf(rows)
        if depth >= max_depth or rows.size < 2 * params.min_samples_leaf or criterion.is_pure(rows):
            continue
        feats = all_features if m_try == m else np.sort(rng.choice(m, size=m_try, replace=False))
        split = criterion.best_split(rows, feats)
        if split is None:
            continue
        f, thr = split
        go_left = X[rows, f] < thr
        feature[slot] = f
        threshold[slot] = thr
        l_slot = new_node()
        r_slot = new_node()
        left[slot] = l_slot
        right[slot] = r_slot
        stack.append((r_slot, rows[~go_left], depth + 1))
        stack.append((l_slot, rows[go_left], depth + 1))

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
        weight=np.asarray(weight, dtype=np.float64),
        n_features=m,
        params=params,
    )


def fit_tree(
    X: np.ndarray,
    y: Sequence[int],
    sample_weight: Sequence[float] | None = None,
    params: TreeParams = TreeParams(),
    seed: int | None = None,
    rng: np.random.Generator | None = None,
) -> DecisionTree:
    """Classification tree minimizing weighted Gini impurity.

    The seed matters only when params.max_features subsamples the features.
    """
    X, y, w = check_training_inputs(X, y, sample_weight)
    if rng is None and seed is not None:
        rng = np.random.default_rng(seed)
    return _grow(_GiniCriterion(X, y, w, params.min_samples_leaf), X, params, rng)


def fit_gradient_tree(
    X: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    params: TreeParams = TreeParams(),
    leaf_l2: float = 1.0,
    rng: np.random.Generator | None = None,
) -> DecisionTree:
    """One boosting stage: regression tree on gradient/hessian sums."""
    X = _check_matrix(X)
    grad = np.asarray(grad, dtype=np.float64)
    hess = np.asarray(hess, dtype=np.float64)
    if grad.shape != (X.shape[0],) or hess.shape != (X.shape[0],):
        raise InputError("gradients and hessians must match the number of rows")
    if leaf_l2 < 0:
        raise InputError("leaf_l2 must be >= 0")
    return _grow(_GainCriterion(X, grad, hess, params.min_samples_leaf, leaf_l2), X, params, rng)
