"""Exact interventional Shapley attributions for forest models.

For one tree and one background row z, a leaf is reached under coalition S when
every feature constraint on its path is met by x (for features in S) or by z
(for the rest). Grouping the path's features into "x-only" (count a) and
"z-only" (count b) consistent sets collapses the Shapley sum over coalitions to
a closed form: an x-only feature j gains value * (a-1)! b! / (a+b)! and a
z-only feature j loses value * a! (b-1)! / (a+b)!; features consistent for both
sides contribute nothing. Averaging over the background set and the ensemble's
trees gives attributions that satisfy local accuracy exactly, which
brute_shap verifies by full coalition enumeration.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from pathlib import Path
from typing import Sequence

import numpy as np

from ._common import InputError, derived_rng
from .dataset import ExampleSet
from .forest import ForestModel
from .metrics import auprc
from .trees import DecisionTree

log = logging.getLogger(__name__)

BACKGROUND_MAX_ROWS = 512
BRUTE_MAX_FEATURES = 15


@dataclass(frozen=True)
class ShapAttribution:
    """Per-feature contributions in probability units plus the background mean."""

    values: np.ndarray
    base: float

    @property
    def total(self) -> float:
        return float(self.values.sum() + self.base)


def _pw_table(size: int) -> np.ndarray:
    """pw[p, q] = p! q! / (p+q+1)! — the coalition-weight sum with p features
    pinned inside, q pinned outside, and everything else free."""
    pw = np.empty((size + 1, size + 1))
    for p in range(size + 1):
        for q in range(size + 1):
            pw[p, q] = float(Fraction(factorial(p) * factorial(q), factorial(p + q + 1)))
    return pw


def _as_trees(model: ForestModel | DecisionTree) -> tuple[DecisionTree, ...]:
    if isinstance(model, ForestModel):
        return model.trees
    if isinstance(model, DecisionTree):
        return (model,)
    raise InputError(f"tree attributions support forest models only, got {type(model).__name__}")


def _score(model, X: np.ndarray) -> np.ndarray:
    if hasattr(model, "predict_proba"):
        return model.predict_proba(X)
    if isinstance(model, DecisionTree):
        return model.predict_value(X)
    raise InputError(f"cannot score model of type {type(model).__name__}")


def _check_background(model_features: int, background: np.ndarray) -> np.ndarray:
    Z = np.asarray(background, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] == 0 or Z.shape[1] != model_features:
        raise InputError(f"background must be non-empty with {model_features} columns")
    return Z


class _CompiledTree:
    """Per-leaf path constraints with background consistency precomputed, so
    explaining many rows only re-evaluates the cheap x-side comparisons."""

    def __init__(self, tree: DecisionTree, Z: np.ndarray):
        self.leaves: list[tuple[float, list[tuple[int, list, np.ndarray]]]] = []
        # stack of (node, {feature: (x-constraint list, accumulated z_ok rows)})
        stack: list[tuple[int, dict[int, tuple[list, np.ndarray]]]] = [(0, {})]
        while stack:
            node, cons = stack.pop()
            f = int(tree.feature[node])
            if f < 0:
                if cons:  # a root-leaf tree has no feature influence
                    self.leaves.append(
                        (float(tree.value[node]), [(feat, c, z) for feat, (c, z) in cons.items()])
                    )
                continue
            thr = float(tree.threshold[node])
            z_left = Z[:, f] < thr
            prev = cons.get(f)
            for go_left, child in ((False, int(tree.right[node])), (True, int(tree.left[node]))):
                z_ok = z_left if go_left else ~z_left
                checks = [(thr, go_left)]
                if prev is not None:
                    checks = prev[0] + checks
                    z_ok = prev[1] & z_ok
                child_cons = dict(cons)
                child_cons[f] = (checks, z_ok)
                stack.append((child, child_cons))

    def add_phi(self, x: np.ndarray, pw: np.ndarray, phi: np.ndarray, B: int) -> None:
        for value, features in self.leaves:
            if value == 0.0:
                continue  # every contribution scales with the leaf value
            a = np.zeros(B, dtype=np.int64)
            b = np.zeros(B, dtype=np.int64)
            dead = np.zeros(B, dtype=bool)
            x_oks = []
            for feat, checks, z_ok in features:
                x_ok = all((x[feat] < thr) == go_left for thr, go_left in checks)
                x_oks.append(x_ok)
                if x_ok:
                    a += ~z_ok
                else:
                    b += z_ok
                    dead |= ~z_ok
            alive = ~dead
            for (feat, checks, z_ok), x_ok in zip(features, x_oks):
                if x_ok:
                    rows = ~z_ok & alive
                    if rows.any():
                        phi[feat] += value * pw[a[rows] - 1, b[rows]].sum() / B
                else:
                    rows = z_ok & alive
                    if rows.any():
                        phi[feat] -= value * pw[a[rows], b[rows] - 1].sum() / B


def tree_shap_batch(
    model: ForestModel | DecisionTree, X: np.ndarray, background: np.ndarray
) -> tuple[np.ndarray, float]:
    """Attribution matrix for many rows; returns (values, shared base)."""
    trees = _as_trees(model)
    n_features = trees[0].n_features
    Z = _check_background(n_features, background)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != n_features:
        raise InputError(f"rows must have {n_features} features, got shape {X.shape}")
    max_path = max(t.depth() for t in trees)
    pw = _pw_table(max_path + 1)
    B = Z.shape[0]
    values = np.zeros((X.shape[0], n_features))
    base = 0.0
    for tree in trees:
        compiled = _CompiledTree(tree, Z)
        for i in range(X.shape[0]):
            compiled.add_phi(X[i], pw, values[i], B)
        base += float(tree.predict_value(Z).mean())
    return values / len(trees), base / len(trees)


def tree_shap(model: ForestModel | DecisionTree, x: np.ndarray, background: np.ndarray) -> ShapAttribution:
    """Exact interventional Shapley values for one row."""
    x = np.asarray(x, dtype=np.float64)
    values, base = tree_shap_batch(model, x.reshape(1, -1), background)
    return ShapAttribution(values[0], base)


def brute_shap(model: ForestModel | DecisionTree, x: np.ndarray, background: np.ndarray) -> ShapAttribution:
    """Shapley values by exhaustive coalition enumeration (oracle; <= 15 features)."""
    trees = _as_trees(model)
    n = trees[0].n_features
    if n > BRUTE_MAX_FEATURES:
        raise InputError(f"brute_shap enumerates 2^n coalitions; {n} features is too many")
    Z = _check_background(n, background)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise InputError(f"row must have {n} features, got shape {x.shape}")

    def predict_mean(rows: np.ndarray) -> float:
        total = np.zeros(rows.shape[0])
        for tree in trees:
            total += tree.predict_value(rows)
        return float(total.mean()) / len(trees)

    v = np.empty(1 << n)
    for mask in range(1 << n):
        hybrid = Z.copy()
        for j in range(n):
            if mask >> j & 1:
                hybrid[:, j] = x[j]
        v[mask] = predict_mean(hybrid)

    weights = [float(Fraction(factorial(s) * factorial(n - s - 1), factorial(n))) for s in range(n)]
    phi = np.zeros(n)
    full = (1 << n) - 1
    for j in range(n):
        rest = full & ~(1 << j)
        sub = rest
        while True:  # iterate all subsets of rest, including the empty set
            phi[j] += weights[bin(sub).count("1")] * (v[sub | 1 << j] - v[sub])
            if sub == 0:
                break
            sub = (sub - 1) & rest
    return ShapAttribution(phi, v[0])


def subsample_background(X: np.ndarray, max_rows: int = BACKGROUND_MAX_ROWS, seed: int = 0) -> np.ndarray:
    """Seeded row subsample used as the default SHAP background."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] <= max_rows:
        return X
    rows = derived_rng(seed, 7).choice(X.shape[0], size=max_rows, replace=False)
    return X[np.sort(rows)]


def importance_ranking(
    model,
    dataset: ExampleSet | tuple[np.ndarray, np.ndarray],
    method: str = "mean_abs_shap",
    seed: int = 0,
    background: np.ndarray | None = None,
    n_permutations: int = 10,
) -> list[tuple[int, float]]:
    """Features ordered by importance: mean |phi|, or mean AUPRC drop over
    seeded column permutations."""
    if isinstance(dataset, ExampleSet):
        X, y = dataset.X, dataset.y
    else:
        X, y = dataset
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InputError("importance ranking needs a non-empty dataset")

    if method == "mean_abs_shap":
        Z = subsample_background(X, seed=seed) if background is None else background
        values, _ = tree_shap_batch(model, X, Z)
        scores = np.abs(values).mean(axis=0)
    elif method == "permutation":
        y = np.asarray(y)
        if y.min() == y.max():
            raise InputError("permutation importance needs both label classes")
        base = auprc(_score(model, X), y)
        scores = np.empty(X.shape[1])
        for f in range(X.shape[1]):
            drops = []
            for r in range(n_permutations):
                perm = derived_rng(seed, 8, f, r).permutation(X.shape[0])
                Xp = X.copy()
                Xp[:, f] = X[perm, f]
                drops.append(base - auprc(_score(model, Xp), y))
            scores[f] = np.mean(drops)
    else:
        raise InputError(f"unknown importance method {method!r}")

    order = np.argsort(-scores, kind="stable")
    return [(int(f), float(scores[f])) for f in order]


def write_attribution_csv(
    path: str | Path,
    row_ids: Sequence[str],
    feature_names: Sequence[str],
    X: np.ndarray,
    values: np.ndarray,
) -> None:
    """Beeswarm-ready export: row_id,feature_name,feature_value,shap_value."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("row_id", "feature_name", "feature_value", "shap_value"))
        for i, rid in enumerate(row_ids):
            for j, name in enumerate(feature_names):
                writer.writerow((rid, name, repr(float(X[i, j])), repr(float(values[i, j]))))
