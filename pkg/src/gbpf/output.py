"""Deterministic CSV and SVG emission.

CSV files follow RFC 4180 (CRLF line endings, comma separator, ``.``
decimal point) and print floats with 17 significant digits so 64-bit
values round-trip losslessly.  SVG charts are minimal self-contained
documents with no timestamps or random ids, so identical data produces
identical bytes.
"""
from __future__ import annotations

import csv
import math

import numpy as np

__all__ = ["format_value", "write_csv", "read_csv", "line_chart_svg", "heatmap_svg"]


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path, header, rows):
    """Write rows of numbers/strings as RFC-4180 CSV with lossless floats."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow([c if isinstance(c, str) else format_value(c) for c in row])


def read_csv(path):
    """Read a CSV written by :func:`write_csv`: header plus float columns."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(c) for c in row] for row in r if row]
    return header, np.asarray(rows, dtype=float)


def _svg_head(width, height):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">'
        f'<rect width="{width}" height="{height}" fill="white"/>'
    )


_PALETTE = ("#1f6fb4", "#d95f02", "#2a9d5c", "#7b4fa6", "#c23b66", "#666666")


def line_chart_svg(path, x, series, title="", width=640, height=400):
    """Write a multi-series line chart; ``series`` maps name -> y values."""
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    margin = 46
    all_y = np.concatenate([v for v in ys.values()])
    y_lo, y_hi = float(np.min(all_y)), float(np.max(all_y))
    if y_hi - y_lo < 1e-300:
        y_hi = y_lo + 1.0
    x_lo, x_hi = float(np.min(x)), float(np.max(x))
    if x_hi - x_lo < 1e-300:
        x_hi = x_lo + 1.0

    def sx(v):
        return margin + (v - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def sy(v):
        return height - margin - (v - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    parts = [_svg_head(width, height)]
    parts.append(
        f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}" '
        f'height="{height - 2 * margin}" fill="none" stroke="#999"/>'
    )
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>'
        )
    for i, (name, y) in enumerate(ys.items()):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{width - margin - 4}" y="{margin + 16 + 16 * i}" text-anchor="end" '
            f'font-family="sans-serif" font-size="12" fill="{color}">{name}</text>'
        )
    for frac in (0.0, 0.5, 1.0):
        yv = y_lo + frac * (y_hi - y_lo)
        xv = x_lo + frac * (x_hi - x_lo)
        parts.append(
            f'<text x="{margin - 4}" y="{sy(yv):.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{yv:.4g}</text>'
        )
        parts.append(
            f'<text x="{sx(xv):.1f}" y="{height - margin + 14}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{xv:.4g}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("".join(parts))


def heatmap_svg(path, grid, title="", width=520, height=520):
    """Write a heatmap of a 2-d array (blue = low, red = high)."""
    g = np.asarray(grid, dtype=float)
    if g.ndim != 2:
        raise ValueError("heatmap needs a 2-d array")
    lo, hi = float(np.min(g)), float(np.max(g))
    span = hi - lo if hi > lo else 1.0
    margin = 30
    rows, cols = g.shape
    cw = (width - 2 * margin) / cols
    ch = (height - 2 * margin) / rows
    parts = [_svg_head(width, height)]
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{title}</text>'
        )
    for i in range(rows):
        for j in range(cols):
            t = (g[i, j] - lo) / span
            r = int(round(255 * t))
            b = int(round(255 * (1 - t)))
            gg = int(round(80 + 60 * (1 - abs(2 * t - 1))))
            parts.append(
                f'<rect x="{margin + j * cw:.2f}" y="{margin + i * ch:.2f}" '
                f'width="{cw + 0.5:.2f}" height="{ch + 0.5:.2f}" '
                f'fill="rgb({r},{gg},{b})"/>'
            )
    parts.append(
        f'<text x="{margin}" y="{height - 8}" font-family="sans-serif" '
        f'font-size="10">min {lo:.4g}</text>'
    )
    parts.append(
        f'<text x="{width - margin}" y="{height - 8}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">max {hi:.4g}</text>'
    )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("".join(parts))


def lag_stats_csv(path, stats, theory=None):
    """Write (lag, estimate, se[, theory]) rows for scalar lag statistics."""
    est = np.asarray(stats.estimates)
    if est.ndim != 1:
        raise ValueError("CSV emission expects scalar lag statistics")
    header = ["lag", "estimate", "se"]
    if theory is not None:
        header.append("theory")
    rows = []
    for i, lag in enumerate(stats.lags):
        row = [int(lag), float(est[i]),
               float(stats.se[i]) if stats.se is not None else math.nan]
        if theory is not None:
            row.append(float(theory[i]))
        rows.append(row)
    write_csv(path, header, rows)
