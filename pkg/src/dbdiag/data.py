"""Metric loading, normalization, windowing and chronological splits.

Metrics arrive as CSV with a ``timestamp`` column plus one column per metric.
Timestamps are parsed to epoch minutes and must land exactly on minute
boundaries; rows are sorted, duplicates rejected. Gaps are allowed in the
file and are respected later: windows never span a gap.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import ConfigError, DataError

DEFAULT_WINDOW_STEPS = 30


@dataclass
class MetricFrame:
    """A minute-resolution multivariate series.

    kind is "stat" for resource/state metrics and "event" for wait-event
    counters; the pipeline treats them identically, the tag only drives
    which role a file plays in cause matching.
    """

    metric_names: tuple[str, ...]
    timestamps: np.ndarray      # int64 epoch minutes, strictly increasing
    values: np.ndarray          # [time, metric] float64
    kind: str = "stat"

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape != (len(self.timestamps),
                                                          len(self.metric_names)):
            raise DataError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.timestamps)} timestamps x {len(self.metric_names)} metrics")
        if len(self.timestamps) == 0:
            raise DataError("metric frame is empty")
        if np.any(np.diff(self.timestamps) <= 0):
            raise DataError("timestamps must be strictly increasing")

    @property
    def n_metrics(self) -> int:
        return len(self.metric_names)

    def column(self, name: str) -> np.ndarray:
        try:
            idx = self.metric_names.index(name)
        except ValueError:
            raise DataError(f"no metric named {name!r}; "
                            f"have {', '.join(self.metric_names)}") from None
        return self.values[:, idx]

    def slice_minutes(self, start: int, end: int) -> "MetricFrame":
        """Rows with start <= timestamp < end (epoch minutes)."""
        mask = (self.timestamps >= start) & (self.timestamps < end)
        if not np.any(mask):
            raise DataError(f"no samples in minute range [{start}, {end})")
        return MetricFrame(self.metric_names, self.timestamps[mask],
                           self.values[mask], self.kind)


def _parse_timestamp(text: str, row: int) -> int:
    text = text.strip()
    try:
        seconds = float(text)
    except ValueError:
        iso = text[:-1] + "+00:00" if text.endswith("Z") else text
        try:
            dt = datetime.fromisoformat(iso)
        except ValueError:
            raise DataError(f"unparseable timestamp {text!r} in row {row}") from None
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        seconds = dt.timestamp()
    minutes, rem = divmod(seconds, 60.0)
    if rem != 0.0:
        raise DataError(f"timestamp {text!r} in row {row} is not minute-aligned")
    return int(minutes)


def load_metrics(path: str, kind: str = "stat") -> MetricFrame:
    """Read a metric CSV. Header: ``timestamp,<name>,...``; body rows carry
    an ISO-8601 instant or epoch seconds plus one numeric value per metric.
    """
    if kind not in ("stat", "event"):
        raise ConfigError(f"kind must be 'stat' or 'event', got {kind!r}")
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        if not header:
            raise DataError(f"{path}: empty header")
        if header[0].strip() != "timestamp":
            raise DataError(f"{path}: first column must be 'timestamp', got {header[0]!r}")
        names = tuple(h.strip() for h in header[1:])
        if not names:
            raise DataError(f"{path}: no metric columns")
        if len(set(names)) != len(names):
            raise DataError(f"{path}: duplicate metric names in header")

        stamps, rows = [], []
        # row numbers are file line numbers (header is line 1)
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names) + 1:
                raise DataError(f"{path}: row {row_no} has {len(row)} fields, "
                                f"expected {len(names) + 1}")
            stamps.append(_parse_timestamp(row[0], row_no))
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError:
                bad = next(v for v in row[1:] if not _is_float(v))
                raise DataError(f"{path}: non-numeric value {bad!r} in row {row_no}"
                                ) from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    order = np.argsort(np.asarray(stamps, dtype=np.int64), kind="stable")
    ts = np.asarray(stamps, dtype=np.int64)[order]
    vals = np.asarray(rows, dtype=np.float64)[order]
    dup = np.nonzero(np.diff(ts) == 0)[0]
    if dup.size:
        raise DataError(f"{path}: duplicate timestamp at epoch minute {int(ts[dup[0]])}")
    return MetricFrame(names, ts, vals, kind)


def _is_float(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def minute_to_iso(minute: int) -> str:
    """Epoch minute -> UTC ISO-8601 instant ('2023-01-01T00:05:00Z')."""
    instant = datetime.fromtimestamp(int(minute) * 60, tz=timezone.utc)
    return instant.strftime("%Y-%m-%dT%H:%M:%SZ")


def iso_to_minute(text: str) -> int:
    """Inverse of minute_to_iso; also accepts epoch seconds."""
    return _parse_timestamp(text, 0)


def write_metrics(path: str, frame: MetricFrame) -> None:
    """Inverse of load_metrics; timestamps serialize as UTC ISO-8601."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", *frame.metric_names])
        for ts, row in zip(frame.timestamps, frame.values):
            writer.writerow([minute_to_iso(int(ts)), *(repr(float(v)) for v in row)])


@dataclass
class GlobalNorm:
    """Per-feature z-normalization fit on the full training range.

    Uses the population standard deviation. A zero-variance feature cannot
    be normalized and is reported by name rather than silently passed
    through.
    """

    feature_names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, frame: MetricFrame) -> "GlobalNorm":
        mean = frame.values.mean(axis=0)
        std = frame.values.std(axis=0)
        dead = [n for n, s in zip(frame.metric_names, std) if s == 0.0]
        if dead:
            raise ConfigError(f"constant feature(s) cannot be normalized: "
                              f"{', '.join(dead)}")
        return cls(frame.metric_names, mean, std)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std

    def invert(self, values: np.ndarray) -> np.ndarray:
        return values * self.std + self.mean


@dataclass
class WindowSet:
    """Sliding windows cut from a frame, with their start positions."""

    windows: np.ndarray            # [n, window_steps, features]
    start_indices: np.ndarray      # int64, row index into the source frame
    start_timestamps: np.ndarray   # int64 epoch minutes
    window_steps: int
    feature_names: tuple[str, ...]

    def __len__(self) -> int:
        return self.windows.shape[0]


def make_windows(frame: MetricFrame, window_steps: int = DEFAULT_WINDOW_STEPS,
                 stride: int = 1) -> WindowSet:
    """Cut length-``window_steps`` windows at the given stride.

    The frame is first segmented at timestamp gaps (any jump of more than one
    minute) so no window mixes samples from both sides of an outage. Segments
    shorter than one window contribute nothing; if every segment is too
    short, that is an error.
    """
    if window_steps < 2:
        raise ConfigError(f"window_steps must be at least 2, got {window_steps}")
    if stride < 1:
        raise ConfigError(f"stride must be at least 1, got {stride}")
    breaks = np.nonzero(np.diff(frame.timestamps) != 1)[0] + 1
    segments = np.split(np.arange(len(frame.timestamps)), breaks)

    chunks, starts = [], []
    for seg in segments:
        n = len(seg) - window_steps + 1
        for off in range(0, max(n, 0), stride):
            idx = seg[off]
            chunks.append(frame.values[idx:idx + window_steps])
            starts.append(idx)
    if not chunks:
        raise DataError(
            f"no segment is long enough for a {window_steps}-minute window "
            f"(longest run: {max(len(s) for s in segments)} minutes)")
    start_idx = np.asarray(starts, dtype=np.int64)
    return WindowSet(np.stack(chunks), start_idx, frame.timestamps[start_idx],
                     window_steps, frame.metric_names)


@dataclass
class SplitWindows:
    train: WindowSet
    val: WindowSet
    test: WindowSet
    fractions: tuple[float, float, float] = field(default=(0.6, 0.2, 0.2))


def split_windows(windows: WindowSet,
                  fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
                  ) -> SplitWindows:
    """Chronological train/validation/test split of a window set.

    Boundary counts are floors of the fractions; leftover windows go to the
    training slice. Windows are assumed already in time order (make_windows
    guarantees it). Every slice must end up non-empty.
    """
    if len(fractions) != 3 or any(f <= 0.0 for f in fractions):
        raise ConfigError(f"need three positive fractions, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"fractions must sum to 1, got {fractions}")
    n = len(windows)
    n_val = int(n * fractions[1])
    n_test = int(n * fractions[2])
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ConfigError(
            f"{n} windows cannot be split {fractions}; every slice needs at least one")

    def cut(a: int, b: int) -> WindowSet:
        return WindowSet(windows.windows[a:b], windows.start_indices[a:b],
                         windows.start_timestamps[a:b], windows.window_steps,
                         windows.feature_names)

    return SplitWindows(cut(0, n_train), cut(n_train, n_train + n_val),
                        cut(n_train + n_val, n), tuple(fractions))
