"""EAR-threshold alert baselines.

The station model alerts when the EAR reaches a per-station threshold; the
homogeneous model uses one threshold everywhere. Alerts can only fire inside
main rainfall events (EAR is 0 elsewhere). Curves come from sweeping either a
common scale factor on the station table or a uniform threshold from zero to
the maximum EAR.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from ._common import InputError
from .dataset import DatasetWindow
from .rainfall import DEFAULT_ALPHA, DailyWindowMode, ear_series

log = logging.getLogger(__name__)

OFFICIAL_MIN_MM = 200.0
OFFICIAL_MAX_MM = 600.0
OFFICIAL_STEP_MM = 50.0
MARKED_THRESHOLDS_MM = tuple(np.arange(OFFICIAL_MIN_MM, OFFICIAL_MAX_MM + 1, OFFICIAL_STEP_MM))

THRESHOLD_CSV_COLUMNS = ("station_id", "year", "ear_threshold_mm")


@dataclass(frozen=True)
class AlertPolicy:
    """latch=True keeps an alert on until the event ends once it has fired."""

    latch: bool = False


@dataclass(frozen=True)
class ThresholdTable:
    """Per-station EAR thresholds; official tables use 200..600 mm in 50 mm steps."""

    thresholds: Mapping[str, float]
    kind: str = "official"  # "official" | "swept"
    year: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("official", "swept"):
            raise InputError(f"threshold table kind must be official or swept, got {self.kind!r}")
        for sid, thr in self.thresholds.items():
            if not np.isfinite(thr) or thr <= 0:
                raise InputError(f"station {sid}: threshold must be positive, got {thr!r}")
            if self.kind == "official":
                if not (OFFICIAL_MIN_MM <= thr <= OFFICIAL_MAX_MM) or thr % OFFICIAL_STEP_MM:
                    raise InputError(
                        f"station {sid}: official threshold must lie in "
                        f"[{OFFICIAL_MIN_MM:.0f}, {OFFICIAL_MAX_MM:.0f}] mm in {OFFICIAL_STEP_MM:.0f} mm steps"
                    )
        object.__setattr__(self, "thresholds", dict(self.thresholds))

    def __getitem__(self, station_id: str) -> float:
        try:
            return self.thresholds[station_id]
        except KeyError:
            raise InputError(f"no EAR threshold for station {station_id}") from None


@dataclass(frozen=True)
class WindowEar:
    """Full-window EAR (0 outside events) with event spans in window coordinates."""

    window_id: str
    station_id: str
    ear: np.ndarray
    events: tuple[tuple[int, int], ...]

    def max_event_ear(self) -> float:
        return max((float(self.ear[e]) for _, e in self.events), default=0.0)


def compute_window_ear(
    window: DatasetWindow,
    alpha: float = DEFAULT_ALPHA,
    mode: DailyWindowMode = DailyWindowMode.CALENDAR_DAY,
) -> WindowEar:
    ear, events = ear_series(window.series, alpha, mode)
    return WindowEar(window.id, window.station_id, ear, tuple((e.start_idx, e.end_idx) for e in events))


def _alerts(wear: WindowEar, threshold: float, policy: AlertPolicy) -> np.ndarray:
    if not np.isfinite(threshold) or threshold < 0:
        raise InputError(f"threshold must be finite and >= 0, got {threshold!r}")
    out = np.zeros(wear.ear.size, dtype=bool)
    for s, e in wear.events:
        hit = wear.ear[s : e + 1] >= threshold
        if policy.latch and hit.any():
            hit = hit.copy()
            hit[int(np.argmax(hit)) :] = True
        out[s : e + 1] = hit
    return out


def etm_predict(wear: WindowEar, threshold: float, policy: AlertPolicy = AlertPolicy()) -> np.ndarray:
    """Per-hour alerts for one window under a station threshold (>= crossing)."""
    return _alerts(wear, threshold, policy)


def hm_predict(wear: WindowEar, uniform_threshold: float, policy: AlertPolicy = AlertPolicy()) -> np.ndarray:
    """Per-hour alerts under the shared uniform threshold."""
    return _alerts(wear, uniform_threshold, policy)


def etm_scores(wears: Sequence[WindowEar], table: ThresholdTable) -> dict[str, np.ndarray]:
    """Per-hour EAR/threshold ratios; thresholding at scale s reproduces the
    station model with every threshold multiplied by s."""
    return {w.window_id: w.ear / table[w.station_id] for w in wears}


def hm_scores(wears: Sequence[WindowEar]) -> dict[str, np.ndarray]:
    """Per-hour EAR values; thresholding reproduces the homogeneous model."""
    return {w.window_id: w.ear.copy() for w in wears}


def sweep_etm(
    wears: Sequence[WindowEar],
    table: ThresholdTable,
    scale_step: float = 0.001,
    policy: AlertPolicy = AlertPolicy(),
) -> Iterator[tuple[float, dict[str, np.ndarray]]]:
    """Predictions while scaling every station threshold by 0, step, 2*step, ...
    up to the first scale at which no alert fires anywhere."""
    if scale_step <= 0:
        raise InputError("scale_step must be > 0")
    top = max((w.max_event_ear() / table[w.station_id] for w in wears), default=0.0)
    n_steps = int(np.ceil(top / scale_step)) + 1
    for k in range(n_steps + 1):
        scale = k * scale_step
        yield scale, {
            w.window_id: _alerts(w, scale * table[w.station_id], policy) for w in wears
        }


def sweep_hm(
    wears: Sequence[WindowEar],
    steps: int = 400,
    policy: AlertPolicy = AlertPolicy(),
    include_marked: bool = True,
) -> Iterator[tuple[float, dict[str, np.ndarray]]]:
    """Predictions for uniform thresholds from 0 up to the maximum EAR; the nine
    marked thresholds 200..600 mm are always included."""
    if steps < 1:
        raise InputError("steps must be >= 1")
    top = max((w.max_event_ear() for w in wears), default=0.0)
    grid = np.arange(steps + 1) * (top / steps if top > 0 else 1.0)
    if include_marked:
        grid = np.union1d(grid, np.asarray(MARKED_THRESHOLDS_MM))
    for thr in grid:
        yield float(thr), {w.window_id: _alerts(w, float(thr), policy) for w in wears}


def read_threshold_csv(path: str | Path, kind: str = "official") -> ThresholdTable:
    path = Path(path)
    thresholds: dict[str, float] = {}
    year: int | None = None
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in THRESHOLD_CSV_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise InputError(f"{path}: missing threshold CSV columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            sid = (row["station_id"] or "").strip()
            if not sid:
                raise InputError(f"{path}:{lineno}: empty station_id")
            if sid in thresholds:
                raise InputError(f"{path}:{lineno}: duplicate station {sid}")
            try:
                thresholds[sid] = float(row["ear_threshold_mm"])
                year = int(row["year"])
            except (TypeError, ValueError):
                raise InputError(f"{path}:{lineno}: bad threshold row {row!r}") from None
    if not thresholds:
        raise InputError(f"{path}: no threshold rows")
    return ThresholdTable(thresholds, kind=kind, year=year)


def write_threshold_csv(path: str | Path, table: ThresholdTable) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(THRESHOLD_CSV_COLUMNS)
        for sid in sorted(table.thresholds):
            writer.writerow((sid, table.year if table.year is not None else "", repr(table.thresholds[sid])))
