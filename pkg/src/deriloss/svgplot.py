"""Minimal deterministic SVG line plots for the CSV files the CLI writes."""

from __future__ import annotations

import csv
import io
import math
from typing import Sequence

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 30, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def read_csv(text: str):
    """Names and values of the numeric columns of a CSV; '#' lines are skipped."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if len(rows) < 2:
        raise ValueError("CSV has no data rows")
    header, body = rows[0], rows[1:]
    names, cols = [], []
    for j, name in enumerate(header):
        try:
            cols.append([float(r[j]) for r in body])
            names.append(name)
        except ValueError:
            continue  # text columns such as a branch label
    return names, cols


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _tick_label(v: float, log: bool) -> str:
    return f"1e{int(round(v))}" if log else f"{v:.4g}"


def _ticks(lo: float, hi: float, log: bool, count: int = 6):
    if log:
        a, b = math.ceil(lo - 1e-9), math.floor(hi + 1e-9)
        step = max(1, int(math.ceil((b - a + 1) / count)))
        return [float(v) for v in range(a, b + 1, step)]
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def line_plot(x: Sequence[float], series: dict, xlabel: str, ylabel: str, title: str,
              logx: bool = False, logy: bool = False) -> str:
    """Render the series against x. Non-positive values are dropped on log axes."""

    def tx(v):
        return math.log10(v) if logx else v

    def ty(v):
        return math.log10(v) if logy else v

    pts = {}
    for name, ys in series.items():
        pts[name] = [(tx(a), ty(b)) for a, b in zip(x, ys)
                     if math.isfinite(a) and math.isfinite(b) and (a > 0 or not logx) and (b > 0 or not logy)]
    allp = [p for v in pts.values() for p in v]
    if not allp:
        raise ValueError("nothing to plot")
    x0, x1 = min(p[0] for p in allp), max(p[0] for p in allp)
    y0, y1 = min(p[1] for p in allp), max(p[1] for p in allp)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def py(v):
        return TOP + (y1 - v) / (y1 - y0) * ph

    out = io.StringIO()
    w = out.write
    w(f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
      f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">\n')
    w(f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n')
    w(f'<text x="{WIDTH // 2}" y="18" text-anchor="middle" font-size="13">{_escape(title)}</text>\n')
    w(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>\n')
    for v in _ticks(x0, x1, logx):
        X = _fmt(px(v))
        w(f'<line x1="{X}" y1="{TOP + ph}" x2="{X}" y2="{TOP + ph + 5}" stroke="black"/>\n')
        w(f'<text x="{X}" y="{TOP + ph + 18}" text-anchor="middle">{_tick_label(v, logx)}</text>\n')
    for v in _ticks(y0, y1, logy):
        Y = _fmt(py(v))
        w(f'<line x1="{LEFT - 5}" y1="{Y}" x2="{LEFT}" y2="{Y}" stroke="black"/>\n')
        w(f'<text x="{LEFT - 8}" y="{Y}" text-anchor="end" dominant-baseline="middle">'
          f'{_tick_label(v, logy)}</text>\n')
    w(f'<text x="{LEFT + pw // 2}" y="{HEIGHT - 10}" text-anchor="middle">{_escape(xlabel)}</text>\n')
    w(f'<text x="15" y="{TOP + ph // 2}" text-anchor="middle" '
      f'transform="rotate(-90 15 {TOP + ph // 2})">{_escape(ylabel)}</text>\n')
    for k, (name, p) in enumerate(pts.items()):
        color = COLORS[k % len(COLORS)]
        path = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in p)
        w(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>\n')
        w(f'<text x="{LEFT + pw - 5}" y="{TOP + 15 + 14 * k}" text-anchor="end" fill="{color}">'
          f'{_escape(name)}</text>\n')
    w("</svg>\n")
    return out.getvalue()


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def plot_csv(text: str, title: str = "") -> str:
    """Pick axes from the header: m(lambda) curves get a log lambda axis, traces a linear t axis."""
    header, cols = read_csv(text)
    x = cols[0]
    name = header[0]
    if name in ("lambda", "lambda_n"):
        keep = [j for j, h in enumerate(header) if h in ("m", "m_over_loglambda", "phi_n")] or [1]
        return line_plot(x, {header[j]: cols[j] for j in keep}, name, "value", title or "m(lambda)", logx=True)
    if name == "t":
        keep = [j for j, h in enumerate(header) if h in ("E", "F")]
        if keep:
            return line_plot(x, {header[j]: cols[j] for j in keep}, "t", "energy", title or "energy trace",
                             logy=True)
        return line_plot(x, {header[j]: cols[j] for j in range(1, len(header))}, "t", "value",
                         title or "coefficient")
    if name == "n":
        keep = [j for j, h in enumerate(header) if h.startswith("log_")]
        return line_plot(x, {header[j]: cols[j] for j in keep}, "n", "log partial sum",
                         title or "spectral partial sums")
    return line_plot(x, {header[j]: cols[j] for j in range(1, len(header))}, name, "value", title or name)
