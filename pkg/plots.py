"""Self-contained SVG figures: success vs n per beam width, run traces, and the N sweep."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence
from xml.sax.saxutils import escape

from stats import PUBLISHED_MODEL, LogisticModel, predict_success

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


class PlotError(ValueError):
    """Nothing to draw."""


@dataclass(frozen=True)
class Point:
    x: float
    y: float


class SvgCanvas:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.svg = ""

    def line(self, x1, y1, x2, y2, stroke="#000", width=1.0, extra=""):
        self.svg += (f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}" '
                     f'stroke="{stroke}" stroke-width="{width}" {extra}/>\n')

    def polyline(self, points: Sequence[tuple[float, float]], stroke: str, width=1.5):
        coords = " ".join(f"{x:.1f},{y:.1f}" for x, y in points)
        self.svg += f'<polyline points="{coords}" fill="none" stroke="{stroke}" stroke-width="{width}"/>\n'

    def circle(self, x, y, r, fill):
        self.svg += f'<circle cx="{x:.1f}" cy="{y:.1f}" r="{r}" fill="{fill}"/>\n'

    def text(self, x, y, string, size=11, anchor="start", extra=""):
        self.svg += (f'<text x="{x:.1f}" y="{y:.1f}" font-family="sans-serif" font-size="{size}" '
                     f'text-anchor="{anchor}" {extra}>{escape(str(string))}</text>\n')

    def rect(self, x, y, w, h, fill="#fff", stroke="none"):
        self.svg += f'<rect x="{x:.1f}" y="{y:.1f}" width="{w:.1f}" height="{h:.1f}" fill="{fill}" stroke="{stroke}"/>\n'

    def get_svg(self) -> str:
        return (f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.width}" '
                f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
                f'{self.svg}</svg>\n')


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = (hi - lo) / count
    return [lo + i * step for i in range(count + 1)]


def _panel(canvas: SvgCanvas, left: float, top: float, width: float, height: float,
           series: Mapping[str, Sequence[Point]], title: str, xlabel: str, ylabel: str,
           y_range: tuple[float, float] | None = None) -> None:
    points = [p for pts in series.values() for p in pts]
    if not points:
        raise PlotError(f"No data for {title!r}")
    x_lo, x_hi = min(p.x for p in points), max(p.x for p in points)
    if y_range is None:
        y_lo, y_hi = min(p.y for p in points), max(p.y for p in points)
    else:
        y_lo, y_hi = y_range
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1, y_hi + 1

    def sx(x):
        return left + (x - x_lo) / (x_hi - x_lo) * width

    def sy(y):
        return top + height - (y - y_lo) / (y_hi - y_lo) * height

    canvas.text(left + width / 2, top - 12, title, size=13, anchor="middle")
    canvas.line(left, top + height, left + width, top + height)
    canvas.line(left, top, left, top + height)
    for t in _ticks(x_lo, x_hi):
        canvas.line(sx(t), top + height, sx(t), top + height + 4)
        canvas.text(sx(t), top + height + 16, f"{t:g}" if t == int(t) else f"{t:.2f}", anchor="middle")
    for t in _ticks(y_lo, y_hi):
        canvas.line(left - 4, sy(t), left, sy(t))
        canvas.line(left, sy(t), left + width, sy(t), stroke="#ddd", width=0.5)
        canvas.text(left - 7, sy(t) + 4, f"{t:.2f}", anchor="end")
    canvas.text(left + width / 2, top + height + 34, xlabel, anchor="middle")
    canvas.text(left - 45, top + height / 2, ylabel, anchor="middle",
                extra=f'transform="rotate(-90 {left - 45:.1f} {top + height / 2:.1f})"')

    for i, (label, pts) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        scaled = [(sx(p.x), sy(p.y)) for p in sorted(pts, key=lambda p: p.x)]
        if len(scaled) > 1:
            canvas.polyline(scaled, color)
        for x, y in scaled:
            canvas.circle(x, y, 2.5, color)
        ly = top + 14 * i
        canvas.line(left + width + 12, ly, left + width + 30, ly, stroke=color, width=2)
        canvas.text(left + width + 35, ly + 4, label)


def line_chart(series: Mapping[str, Sequence[Point]], title: str, xlabel: str, ylabel: str,
               y_range: tuple[float, float] | None = None, width: int = 720, height: int = 440) -> str:
    canvas = SvgCanvas(width, height)
    canvas.rect(0, 0, width, height)
    _panel(canvas, 70, 40, width - 220, height - 100, series, title, xlabel, ylabel, y_range)
    return canvas.get_svg()


# ---------------------------------------------------------------------------
# Figure kinds
# ---------------------------------------------------------------------------

def memory_chart(records: Iterable, m: int | None = None, k: int | None = None) -> str:
    """Observed success fraction against log2(n), one curve per beam width M."""
    tally: dict[int, dict[int, list[int]]] = defaultdict(lambda: defaultdict(lambda: [0, 0]))
    for r in records:
        if (m is not None and r.m != m) or (k is not None and r.k != k) or r.n <= 0:
            continue
        entry = tally[r.M][r.n]
        entry[0] += int(bool(r.success))
        entry[1] += 1
    series = {
        f"M={M}": [Point(math.log2(n), hits / total) for n, (hits, total) in sorted(by_n.items())]
        for M, by_n in sorted(tally.items())
    }
    return line_chart(series, "Success against n per beam width", "log2 n", "success fraction", (0.0, 1.0))


def predicted_memory_chart(model: LogisticModel = PUBLISHED_MODEL, m: int = 8, k: int = 1, l: int = 4,
                           n_values: Sequence[int] = (16, 32, 64, 128, 256),
                           M_values: Sequence[int] = tuple(2 ** i for i in range(1, 11))) -> str:
    """Model-predicted success against log2(n), one curve per M."""
    series = {
        f"M={M}": [Point(math.log2(n), predict_success(model, (m, n, k, l, M))) for n in n_values]
        for M in M_values
    }
    return line_chart(series, f"Predicted success (m={m}, k={k})", "log2 n", "success probability", (0.0, 1.0))


def trace_chart(result: Mapping) -> str:
    """Truth-prefix rank and normalised mean score per step, from a solve result document."""
    trace = result.get("trace") or []
    if not trace:
        raise PlotError("Result holds no trace")
    first = trace[0]["mean_score"] or 1.0
    scores = {"mean score / step 1": [Point(t["step"], t["mean_score"] / first) for t in trace]}
    ranks = {"truth rank": [Point(t["step"], t["truth_rank"]) for t in trace if t.get("truth_rank")]}

    canvas = SvgCanvas(720, 700)
    canvas.rect(0, 0, 720, 700)
    _panel(canvas, 70, 40, 500, 240, scores, "Normalised mean score", "step", "mean / first")
    if ranks["truth rank"]:
        _panel(canvas, 70, 380, 500, 240, ranks, "Position of the correct prefix", "step", "rank")
    else:
        canvas.text(320, 500, "no truth prefix in any beam", anchor="middle")
    return canvas.get_svg()


def sweep_chart(records: Iterable) -> str:
    """Observed success fraction against the strand count, one curve per variant."""
    tally: dict[str, dict[int, list[int]]] = defaultdict(lambda: defaultdict(lambda: [0, 0]))
    for r in records:
        entry = tally[r.variant][r.N]
        entry[0] += int(bool(r.success))
        entry[1] += 1
    series = {
        variant: [Point(N, hits / total) for N, (hits, total) in sorted(by_n.items())]
        for variant, by_n in sorted(tally.items())
    }
    return line_chart(series, "Success against strand count", "N", "success fraction", (0.0, 1.0))
