"""Similarity measures for linking wait events to anomalous metrics.

Two deliberately different lenses: dynamic time warping tolerates small time
shifts (a lock pile-up shows up in the session count a minute or two later)
but is an unbounded distance, while Pearson correlation is shift-intolerant
and scale-free. Both series are z-normalized before comparison so shape, not
magnitude, drives the ranking. The two measures genuinely disagree on some
pairs; the ranking report therefore carries both orders side by side rather
than blending them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import MetricFrame, minute_to_iso
from .errors import DataError


def dtw_distance(a: np.ndarray, b: np.ndarray, squared: bool = False) -> float:
    """Classic dynamic-programming DTW with unit steps and no band.

    Pointwise cost is |a_i - b_j| (squared when requested); the warping path
    may match, insert, or delete one element at a time.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise DataError(f"DTW needs 1-d series, got shapes {a.shape} and {b.shape}")
    if a.size == 0 or b.size == 0:
        raise DataError("DTW over an empty series")
    n, m = a.size, b.size
    prev = np.full(m + 1, np.inf)
    prev[0] = 0.0
    cur = np.empty(m + 1)
    for i in range(1, n + 1):
        cur[0] = np.inf
        costs = np.abs(a[i - 1] - b)
        if squared:
            costs = costs * costs
        for j in range(1, m + 1):
            cur[j] = costs[j - 1] + min(prev[j - 1], prev[j], cur[j - 1])
        prev, cur = cur, prev
    return float(prev[m])


def pearson(a: np.ndarray, b: np.ndarray) -> float | None:
    """Sample correlation coefficient; None when either series is constant."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.size != b.size:
        raise DataError(f"correlation needs equal-length 1-d series, "
                        f"got shapes {a.shape} and {b.shape}")
    if a.size < 2:
        raise DataError(f"correlation needs at least 2 samples, got {a.size}")
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt(np.sum(da * da) * np.sum(db * db))
    if denom == 0.0:
        return None
    return float(np.sum(da * db) / denom)


def znorm(series: np.ndarray) -> np.ndarray:
    """Z-normalize with the population std; constant series map to zeros."""
    series = np.asarray(series, dtype=np.float64)
    std = series.std()
    if std == 0.0:
        return np.zeros_like(series)
    return (series - series.mean()) / std


@dataclass(frozen=True)
class EventMatch:
    event: str
    dtw: float
    correlation: float | None
    rank_dtw: int
    rank_correlation: int

    def to_dict(self) -> dict:
        return {"event": self.event, "dtw": self.dtw,
                "correlation": self.correlation, "rank_dtw": self.rank_dtw,
                "rank_correlation": self.rank_correlation}


def match_events(stat_frame: MetricFrame, feature: str, event_frame: MetricFrame,
                 start: int, end: int, margin: int = 0) -> list[EventMatch]:
    """Rank wait events against one metric over an anomaly period.

    Slices both frames to [start, end + margin) epoch minutes, z-normalizes
    every series, then scores each event by DTW distance (smaller is more
    similar) and Pearson correlation (larger is). rank_dtw orders by
    ascending distance, rank_correlation by descending correlation with
    undefined correlations last; ties break on event name. The returned list
    is in DTW order.
    """
    if margin < 0:
        raise DataError(f"margin cannot be negative, got {margin}")
    if end <= start:
        raise DataError(f"period end {end} is not after start {start}")
    try:
        stat_slice = stat_frame.slice_minutes(start, end + margin)
    except DataError as exc:
        raise DataError(f"anomaly period [{minute_to_iso(start)} .. "
                        f"{minute_to_iso(end)}] does not overlap the metric "
                        f"series: {exc}") from None
    try:
        event_slice = event_frame.slice_minutes(start, end + margin)
    except DataError:
        warnings.warn(f"no event samples overlap the anomaly period "
                      f"[{minute_to_iso(start)} .. {minute_to_iso(end)}]; "
                      f"nothing to rank", stacklevel=2)
        return []
    target = znorm(stat_slice.column(feature))
    if len(stat_slice.timestamps) != len(event_slice.timestamps) or np.any(
            stat_slice.timestamps != event_slice.timestamps):
        raise DataError("metric and event series cover different minutes over "
                        "the period; align them before matching")

    rows = []
    for name in event_frame.metric_names:
        series = znorm(event_slice.column(name))
        rows.append((name, dtw_distance(target, series), pearson(target, series)))

    by_dtw = sorted(rows, key=lambda r: (r[1], r[0]))
    dtw_rank = {name: i + 1 for i, (name, _, _) in enumerate(by_dtw)}
    by_corr = sorted(rows, key=lambda r: (r[2] is None, -(r[2] or 0.0), r[0]))
    corr_rank = {name: i + 1 for i, (name, _, _) in enumerate(by_corr)}

    return [EventMatch(name, d, c, dtw_rank[name], corr_rank[name])
            for name, d, c in by_dtw]
