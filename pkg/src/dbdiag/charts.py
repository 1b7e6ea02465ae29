"""Hand-rolled SVG rendering for report charts.

Charts are emitted as plain SVG strings built from the data alone, with all
coordinates rounded to two decimals, so the same inputs always produce the
same bytes. That keeps full reports byte-reproducible, which matters because
report integrity is checked by digest.
"""

from __future__ import annotations

import numpy as np

from .data import minute_to_iso
from .spc import ControlChart

WIDTH = 860
HEIGHT = 280
MARGIN_LEFT = 64
MARGIN_RIGHT = 16
MARGIN_TOP = 28
MARGIN_BOTTOM = 34

_PALETTE = ("#d97706", "#059669", "#7c3aed", "#db2777", "#0891b2", "#65a30d")


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _scale(values_min: float, values_max: float, lo: float, hi: float):
    span = values_max - values_min
    if span == 0.0:
        span = 1.0
        values_min -= 0.5

    def to_px(v: float) -> float:
        return lo + (v - values_min) / span * (hi - lo)

    return to_px


def _polyline(xs, ys, color: str, width: float = 1.5, dash: str | None = None) -> str:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline fill="none" stroke="{color}" stroke-width="{width}"'
            f'{dash_attr} points="{pts}"/>')


def _hline(y: float, color: str, label: str, dash: str | None = None) -> str:
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<line x1="{MARGIN_LEFT}" y1="{_fmt(y)}" x2="{WIDTH - MARGIN_RIGHT}" '
            f'y2="{_fmt(y)}" stroke="{color}" stroke-width="1"{dash_attr}/>'
            f'<text x="{WIDTH - MARGIN_RIGHT - 2}" y="{_fmt(y - 3)}" '
            f'font-size="10" text-anchor="end" fill="{color}">{label}</text>')


def _frame(title: str) -> tuple[str, str]:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">'
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>'
            f'<text x="{MARGIN_LEFT}" y="18" font-size="13" font-family="sans-serif" '
            f'fill="#111827">{title}</text>')
    return head, "</svg>"


def control_chart_svg(scores: np.ndarray, window_starts: np.ndarray,
                      chart: ControlChart, flagged: np.ndarray) -> str:
    """One feature's score series with its control limits and flagged windows."""
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    lo = min(float(scores.min()), chart.lcl)
    hi = max(float(scores.max()), chart.ucl)
    to_y = _scale(lo, hi, HEIGHT - MARGIN_BOTTOM, MARGIN_TOP)
    to_x = _scale(0.0, float(max(n - 1, 1)), MARGIN_LEFT, WIDTH - MARGIN_RIGHT)

    xs = [to_x(i) for i in range(n)]
    ys = [to_y(v) for v in scores]
    head, tail = _frame(
        f"{chart.feature} reconstruction score, {chart.k:g}-sigma limits")
    parts = [head]
    parts.append(_hline(to_y(chart.ucl), "#dc2626", f"UCL {chart.ucl:.4g}"))
    parts.append(_hline(to_y(chart.center), "#6b7280", f"CL {chart.center:.4g}",
                        dash="4 3"))
    parts.append(_hline(to_y(chart.lcl), "#9ca3af", f"LCL {chart.lcl:.4g}",
                        dash="2 3"))
    parts.append(_polyline(xs, ys, "#2563eb"))
    for idx in np.asarray(flagged, dtype=np.int64):
        parts.append(f'<circle cx="{_fmt(xs[int(idx)])}" cy="{_fmt(ys[int(idx)])}" '
                     f'r="2.5" fill="#dc2626"/>')
    if n > 0:
        parts.append(f'<text x="{MARGIN_LEFT}" y="{HEIGHT - 12}" font-size="10" '
                     f'fill="#6b7280">{minute_to_iso(int(window_starts[0]))}</text>')
        parts.append(f'<text x="{WIDTH - MARGIN_RIGHT}" y="{HEIGHT - 12}" '
                     f'font-size="10" text-anchor="end" fill="#6b7280">'
                     f'{minute_to_iso(int(window_starts[-1]))}</text>')
    parts.append(tail)
    return "".join(parts)


def overlay_svg(title: str, minutes: np.ndarray,
                named_series: list[tuple[str, np.ndarray]]) -> str:
    """Z-normalized series overlaid on one axis, first series emphasized."""
    if not named_series:
        raise ValueError("overlay needs at least one series")
    normed = []
    for name, series in named_series:
        series = np.asarray(series, dtype=np.float64)
        std = series.std()
        normed.append((name, (series - series.mean()) / std if std > 0.0
                       else np.zeros_like(series)))
    lo = min(float(s.min()) for _, s in normed)
    hi = max(float(s.max()) for _, s in normed)
    to_y = _scale(lo, hi, HEIGHT - MARGIN_BOTTOM, MARGIN_TOP)
    n = len(minutes)
    to_x = _scale(0.0, float(max(n - 1, 1)), MARGIN_LEFT, WIDTH - MARGIN_RIGHT)
    xs = [to_x(i) for i in range(n)]

    head, tail = _frame(title)
    parts = [head]
    legend_y = MARGIN_TOP + 4
    for i, (name, series) in enumerate(normed):
        color = "#2563eb" if i == 0 else _PALETTE[(i - 1) % len(_PALETTE)]
        width = 2.0 if i == 0 else 1.2
        parts.append(_polyline(xs, [to_y(v) for v in series], color, width))
        parts.append(f'<text x="{MARGIN_LEFT + 6}" y="{legend_y + 12 * i}" '
                     f'font-size="10" fill="{color}">{name}</text>')
    parts.append(f'<text x="{MARGIN_LEFT}" y="{HEIGHT - 12}" font-size="10" '
                 f'fill="#6b7280">{minute_to_iso(int(minutes[0]))}</text>')
    parts.append(f'<text x="{WIDTH - MARGIN_RIGHT}" y="{HEIGHT - 12}" '
                 f'font-size="10" text-anchor="end" fill="#6b7280">'
                 f'{minute_to_iso(int(minutes[-1]))}</text>')
    parts.append(tail)
    return "".join(parts)
