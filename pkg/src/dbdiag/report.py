"""Diagnosis reports: detection + cause ranking + charts, reproducibly.

A report bundles the control-chart detection results over a scored series
with wait-event rankings for each anomaly period and SVG charts. The JSON
body is a pure function of its inputs (no wall-clock stamps, no absolute
paths), so rerunning the same model over the same data produces the same
bytes; the embedded model digest plus that property make reports auditable.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

from .charts import control_chart_svg, overlay_svg
from .data import MetricFrame, minute_to_iso
from .detector import ScoreSeries
from .errors import ConfigError, DataError
from .similarity import match_events
from .spc import DEFAULT_SIGMA_K, detect, find_out_of_control, group_periods

REPORT_FORMAT = "dbdiag-report"
FORMAT_VERSION = 1


@dataclass
class ReportConfig:
    sigma_k: float = DEFAULT_SIGMA_K
    gap_tolerance: int = 0
    top_periods: int = 5
    top_events: int = 5
    match_margin: int = 0

    def __post_init__(self):
        if self.sigma_k <= 0.0:
            raise ConfigError(f"sigma_k must be positive, got {self.sigma_k}")
        if self.gap_tolerance < 0:
            raise ConfigError(f"gap_tolerance cannot be negative, "
                              f"got {self.gap_tolerance}")
        if self.top_periods < 1 or self.top_events < 1:
            raise ConfigError("top_periods and top_events must be at least 1")
        if self.match_margin < 0:
            raise ConfigError(f"match_margin cannot be negative, "
                              f"got {self.match_margin}")

    def to_dict(self) -> dict:
        return {"sigma_k": self.sigma_k, "gap_tolerance": self.gap_tolerance,
                "top_periods": self.top_periods, "top_events": self.top_events,
                "match_margin": self.match_margin}


def _frame_summary(frame: MetricFrame) -> dict:
    return {
        "first": minute_to_iso(int(frame.timestamps[0])),
        "last": minute_to_iso(int(frame.timestamps[-1])),
        "rows": int(len(frame.timestamps)),
        "metrics": list(frame.metric_names),
    }


def build_report(scores: ScoreSeries, stat_frame: MetricFrame,
                 event_frame: MetricFrame | None, model_info: dict,
                 config: ReportConfig | None = None) -> tuple[dict, dict[str, str]]:
    """Assemble the report dict plus its chart SVGs (name -> svg text).

    ``model_info`` carries provenance of the scoring model (digest,
    architecture, window size); it lands in the metadata verbatim. Event
    matching is skipped when no event frame is supplied.
    """
    config = config or ReportConfig()
    result = detect(scores, k=config.sigma_k, gap_tolerance=config.gap_tolerance)
    groups = group_periods(result)

    charts = {}
    chart_meta = {}
    for j, name in enumerate(scores.feature_names):
        chart = result.charts[name]
        flagged = find_out_of_control(scores.scores[:, j], chart)
        fname = f"chart_{name}.svg"
        charts[fname] = control_chart_svg(scores.scores[:, j], scores.window_starts,
                                          chart, flagged)
        chart_meta[name] = {**chart.to_dict(), "flagged_windows": int(flagged.size),
                            "file": fname}

    period_rows = []
    for group in groups[:config.top_periods]:
        row = group.to_dict()
        if event_frame is not None:
            try:
                matches = match_events(stat_frame, group.primary_feature,
                                       event_frame, group.start, group.end,
                                       margin=config.match_margin)
            except DataError as exc:
                row["event_matching_error"] = str(exc)
                matches = []
            row["events_by_shape"] = [m.to_dict()
                                      for m in matches[:config.top_events]]
            by_corr = sorted(matches, key=lambda m: m.rank_correlation)
            row["events_by_correlation"] = [m.event
                                            for m in by_corr[:config.top_events]]
            if matches:
                fname = f"overlay_period{group.rank}.svg"
                top = [m.event for m in matches[:3]]
                lo = max(group.start, int(stat_frame.timestamps[0]))
                hi = min(group.end + config.match_margin,
                         int(stat_frame.timestamps[-1]) + 1)
                stat_slice = stat_frame.slice_minutes(lo, hi)
                event_slice = event_frame.slice_minutes(lo, hi)
                series = [(group.primary_feature,
                           stat_slice.column(group.primary_feature))]
                series += [(name, event_slice.column(name)) for name in top]
                charts[fname] = overlay_svg(
                    f"period {group.rank}: {group.primary_feature} vs top wait "
                    f"events", stat_slice.timestamps, series)
                row["overlay_chart"] = fname
        period_rows.append(row)

    report = {
        "format": REPORT_FORMAT,
        "format_version": FORMAT_VERSION,
        "model": dict(model_info),
        "config": config.to_dict(),
        "data": {
            "stats": _frame_summary(stat_frame),
            "events": _frame_summary(event_frame) if event_frame is not None else None,
            "scored_windows": int(len(scores)),
            "window_steps": scores.window_steps,
        },
        "charts": chart_meta,
        "anomaly_periods": period_rows,
        "total_periods_found": len(groups),
        "manifest": {name: hashlib.sha256(svg.encode()).hexdigest()
                     for name, svg in sorted(charts.items())},
    }
    return report, charts


def report_to_json_bytes(report: dict) -> bytes:
    return (json.dumps(report, indent=2, sort_keys=True) + "\n").encode()


def render_text(report: dict) -> str:
    """Terminal-friendly summary of a report dict."""
    lines = []
    model = report.get("model", {})
    lines.append("anomaly diagnosis report")
    lines.append(f"model: {model.get('architecture', '?')} "
                 f"(digest {str(model.get('digest', '?'))[:12]})")
    data = report["data"]
    lines.append(f"data: {data['stats']['rows']} minutes, "
                 f"{data['stats']['first']} .. {data['stats']['last']}, "
                 f"{data['scored_windows']} windows of {data['window_steps']} min")
    k = report["config"]["sigma_k"]
    total = report["total_periods_found"]
    lines.append(f"anomaly periods at {k:g} sigma: {total}")
    for row in report["anomaly_periods"]:
        lines.append("")
        lines.append(f"  rank {row['rank']}: {row['start']} .. {row['end']} "
                     f"({row['duration_minutes']} min)")
        lines.append(f"    features: {', '.join(row['features'])} "
                     f"(primary {row['primary_feature']}, "
                     f"peak {row['peak_score']:.4g})")
        if row.get("events_by_shape"):
            shape_names = ", ".join(m["event"] for m in row["events_by_shape"])
            lines.append(f"    likely waits by shape: {shape_names}")
            lines.append(f"    likely waits by correlation: "
                         f"{', '.join(row['events_by_correlation'])}")
        elif "event_matching_error" in row:
            lines.append(f"    event matching failed: {row['event_matching_error']}")
    if not report["anomaly_periods"]:
        lines.append("  none")
    return "\n".join(lines) + "\n"


def write_report(out_dir: str, report: dict, charts: dict[str, str]) -> list[str]:
    """Write report.json, report.txt and charts/; returns the paths written."""
    os.makedirs(os.path.join(out_dir, "charts"), exist_ok=True)
    written = []
    path = os.path.join(out_dir, "report.json")
    with open(path, "wb") as fh:
        fh.write(report_to_json_bytes(report))
    written.append(path)
    path = os.path.join(out_dir, "report.txt")
    with open(path, "w") as fh:
        fh.write(render_text(report))
    written.append(path)
    for name in sorted(charts):
        path = os.path.join(out_dir, "charts", name)
        with open(path, "w") as fh:
            fh.write(charts[name])
        written.append(path)
    return written
