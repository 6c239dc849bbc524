"""Seeded grid-search cross-validation, grouped by whole windows.

Every grid cell is scored by the mean AUPRC over k held-out folds; folds come
from the stratified window k-fold, so no window contributes hours to both
sides of a fit. Ties on mean AUPRC go to the smaller model: fewer trees, then
shallower, then larger leaves.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._common import InputError, derived_rng
from .dataset import (
    DatasetWindow,
    ExampleSet,
    FeatureSpec,
    LabelingConfig,
    compose_features,
    kfold_windows,
)
from .forest import ForestParams, fit_forest
from .gbt import GbtParams, fit_gbt
from .linear import LogisticParams, fit_logistic
from .metrics import auprc

log = logging.getLogger(__name__)

MODEL_KINDS = ("rf", "gbt", "logistic")

_TREE_COUNTS = (10, 40, 70, 100)
_DEPTHS = (None, 1, 2, 6, 15, 39, 100)
_MIN_SAMPLES = (1, 2, 4)
_LEARNING_RATES = (0.001, 0.01, 0.1, 1.0)
_L2_COEFFS = (0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0)


def default_grid(model_kind: str) -> list[dict]:
    """The stock hyperparameter grid for one model family."""
    if model_kind == "rf":
        return [
            {"n_trees": t, "max_depth": d, "min_samples_leaf": s}
            for t, d, s in product(_TREE_COUNTS, _DEPTHS, _MIN_SAMPLES)
        ]
    if model_kind == "gbt":
        return [
            {"n_trees": t, "max_depth": d, "min_samples_leaf": s, "learning_rate": lr}
            for t, d, s, lr in product(_TREE_COUNTS, _DEPTHS, _MIN_SAMPLES, _LEARNING_RATES)
        ]
    if model_kind == "logistic":
        return [{"penalty": "none", "l2": 0.0}] + [{"penalty": "l2", "l2": c} for c in _L2_COEFFS]
    raise InputError(f"unknown model kind {model_kind!r}; expected one of {MODEL_KINDS}")


def _fit_cell(model_kind: str, cell: Mapping, X, y, training_weight: float, seed: int, threads: int):
    if model_kind == "rf":
        return fit_forest(X, y, ForestParams(**cell), training_weight, seed=seed, threads=threads)
    if model_kind == "gbt":
        return fit_gbt(X, y, params=GbtParams(**cell), training_weight=training_weight)
    if model_kind == "logistic":
        return fit_logistic(X, y, params=LogisticParams(**cell), training_weight=training_weight)
    raise InputError(f"unknown model kind {model_kind!r}")


def _size_key(model_kind: str, cell: Mapping) -> tuple:
    depth = cell.get("max_depth")
    depth_key = np.inf if depth is None else depth
    if model_kind == "logistic":
        return (0,)
    return (cell.get("n_trees", 0), depth_key, -cell.get("min_samples_leaf", 1))


@dataclass(frozen=True)
class GridCell:
    params: dict
    fold_auprc: tuple[float, ...]
    mean_auprc: float


@dataclass(frozen=True)
class GridResult:
    model_kind: str
    best: dict
    cells: tuple[GridCell, ...]
    k: int
    seed: int


def grid_search_cv(
    windows: Sequence[DatasetWindow],
    spec: FeatureSpec,
    grid: Sequence[Mapping] | None = None,
    model_kind: str = "rf",
    k: int = 10,
    seed: int = 0,
    labeling: LabelingConfig = LabelingConfig(),
    training_weight: float = 1.0,
    threads: int = 1,
) -> GridResult:
    if grid is None:
        grid = default_grid(model_kind)
    if not grid:
        raise InputError("empty hyperparameter grid")
    folds = kfold_windows(windows, k, seed)
    fold_sets = [
        ExampleSet.concat([compose_features(w, spec, labeling) for w in fold]) for fold in folds
    ]

    cells: list[GridCell] = []
    for ci, cell in enumerate(grid):
        scores: list[float] = []
        for fi in range(k):
            train = ExampleSet.concat([fs for j, fs in enumerate(fold_sets) if j != fi])
            held = fold_sets[fi]
            if held.y.max() == held.y.min():
                log.warning("fold %d has single-class labels; skipped in cell %s", fi, cell)
                continue
            fit_seed = int(derived_rng(seed, 5, ci, fi).integers(2**63))
            model = _fit_cell(model_kind, cell, train.X, train.y, training_weight, fit_seed, threads)
            scores.append(auprc(model.predict_proba(held.X), held.y))
        if not scores:
            raise InputError("every fold was single-class; cannot score the grid")
        cells.append(GridCell(dict(cell), tuple(scores), float(np.mean(scores))))

    best = min(cells, key=lambda c: (-c.mean_auprc,) + _size_key(model_kind, c.params))
    return GridResult(model_kind, dict(best.params), tuple(cells), k, seed)


def write_grid_csv(path: str | Path, result: GridResult) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    keys = sorted({k for c in result.cells for k in c.params})
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model"] + keys + ["mean_auprc"] + [f"fold{j}_auprc" for j in range(result.k)])
        for c in result.cells:
            row = [result.model_kind]
            row += ["" if c.params.get(k) is None else c.params.get(k) for k in keys]
            row += [repr(c.mean_auprc)]
            row += [repr(s) for s in c.fold_auprc]
            row += [""] * (result.k - len(c.fold_auprc))
            writer.writerow(row)
