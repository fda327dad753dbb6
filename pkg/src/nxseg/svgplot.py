"""Tiny dependency-free SVG emitter for the report figures.

Only what the CLI needs: multi-series line plots and grouped bar charts,
with linear axes and minimal tick labeling.  Every figure the CLI emits
also gets its data written as CSV next to it, so any real plotting tool
can regenerate prettier versions.
"""

from __future__ import annotations

from pathlib import Path

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
MARGIN = 56


def _finite(values):
    return [v for v in values if v == v and abs(v) != float("inf")]


def _axis(lo, hi):
    if lo == hi:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def _svg_header(w, h, title):
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" '
             f'height="{h}" viewBox="0 0 {w} {h}">',
             f'<rect width="{w}" height="{h}" fill="white"/>']
    if title:
        parts.append(f'<text x="{w / 2}" y="20" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="14">{title}</text>')
    return parts


def _axes(parts, w, h, x0, x1, y0, y1, xlabel, ylabel):
    left, right, top, bottom = MARGIN, w - 16, 30, h - MARGIN + 16
    parts.append(f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" '
                 f'stroke="black"/>')
    parts.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" '
                 f'stroke="black"/>')
    for frac in (0.0, 0.5, 1.0):
        xv = x0 + frac * (x1 - x0)
        yv = y0 + frac * (y1 - y0)
        px = left + frac * (right - left)
        py = bottom - frac * (bottom - top)
        parts.append(f'<text x="{px}" y="{bottom + 16}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10">{xv:.3g}</text>')
        parts.append(f'<text x="{left - 6}" y="{py + 3}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="10">{yv:.3g}</text>')
    if xlabel:
        parts.append(f'<text x="{(left + right) / 2}" y="{h - 8}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{xlabel}</text>')
    if ylabel:
        parts.append(f'<text x="14" y="{(top + bottom) / 2}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11" transform="rotate(-90 14 '
                     f'{(top + bottom) / 2})">{ylabel}</text>')
    return left, right, top, bottom


def line_plot(path, series, title="", xlabel="", ylabel="",
              width=640, height=400) -> None:
    """series: list of (label, xs, ys)."""
    xs_all = _finite([x for _, xs, _ in series for x in xs])
    ys_all = _finite([y for _, _, ys in series for y in ys])
    x0, x1 = _axis(min(xs_all, default=0.0), max(xs_all, default=1.0))
    y0, y1 = _axis(min(ys_all, default=0.0), max(ys_all, default=1.0))
    parts = _svg_header(width, height, title)
    left, right, top, bottom = _axes(parts, width, height, x0, x1, y0, y1,
                                     xlabel, ylabel)

    def px(x):
        return left + (x - x0) / (x1 - x0) * (right - left)

    def py(y):
        return bottom - (y - y0) / (y1 - y0) * (bottom - top)

    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        points = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(xs, ys)
                          if y == y and abs(y) != float("inf"))
        parts.append(f'<polyline points="{points}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        if label:
            ly = top + 14 * (i + 1)
            parts.append(f'<line x1="{right - 110}" y1="{ly - 4}" '
                         f'x2="{right - 90}" y2="{ly - 4}" stroke="{color}" '
                         f'stroke-width="2"/>')
            parts.append(f'<text x="{right - 84}" y="{ly}" '
                         f'font-family="sans-serif" font-size="10">{label}'
                         f'</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def bar_plot(path, series, title="", xlabel="", ylabel="",
             width=860, height=320) -> None:
    """Grouped bars: series is a list of (label, values); bar group g holds
    one bar per series at index g."""
    ys_all = _finite([v for _, vals in series for v in vals]) or [0.0, 1.0]
    y0, y1 = _axis(min(min(ys_all), 0.0), max(max(ys_all), 0.0))
    n_groups = max(len(vals) for _, vals in series)
    parts = _svg_header(width, height, title)
    left, right, top, bottom = _axes(parts, width, height, 0, n_groups - 1,
                                     y0, y1, xlabel, ylabel)

    def py(y):
        return bottom - (y - y0) / (y1 - y0) * (bottom - top)

    group_w = (right - left) / max(n_groups, 1)
    bar_w = max(group_w / (len(series) + 1), 0.5)
    baseline = py(0.0)
    for i, (label, vals) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        for g, v in enumerate(vals):
            x = left + g * group_w + i * bar_w
            y = py(v)
            top_y, hgt = (y, baseline - y) if v >= 0 else (baseline, y - baseline)
            parts.append(f'<rect x="{x:.1f}" y="{top_y:.1f}" '
                         f'width="{bar_w:.2f}" height="{max(hgt, 0.1):.1f}" '
                         f'fill="{color}" fill-opacity="0.8"/>')
        if label:
            ly = top + 14 * (i + 1)
            parts.append(f'<rect x="{right - 110}" y="{ly - 9}" width="10" '
                         f'height="10" fill="{color}"/>')
            parts.append(f'<text x="{right - 96}" y="{ly}" '
                         f'font-family="sans-serif" font-size="10">{label}'
                         f'</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))
