"""Dependency-free SVG charts of BER against Eb/N0 (log-scale BER axis).

Output is a pure function of the input rows, so identical data always gives
identical bytes.  Each plotted point carries ``data-ebn0`` and ``data-ber``
attributes holding the exact values it was drawn from.  Points with zero
BER cannot be placed on a log axis and are omitted.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable
from xml.sax.saxutils import escape

from .evaluation import EvalRow

WIDTH, HEIGHT = 720, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 80, 180, 40, 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def series_label(row: EvalRow) -> str:
    if row.pruned_fraction is None:
        return row.decoder
    return f"{row.decoder} ({100 * row.pruned_fraction:.1f}% pruned)"


def _decade_bounds(values: list[float]) -> tuple[int, int]:
    lo = math.floor(math.log10(min(values)))
    hi = math.ceil(math.log10(max(values)))
    if hi == lo:
        hi += 1
    return lo, hi


def y_position(ber: float, lo: int, hi: int) -> float:
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    return MARGIN_T + (hi - math.log10(ber)) / (hi - lo) * plot_h


def x_position(x: float, x_lo: float, x_hi: float) -> float:
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    span = x_hi - x_lo if x_hi > x_lo else 1.0
    return MARGIN_L + (x - x_lo) / span * plot_w


def ber_svg(rows: Iterable[EvalRow], title: str = "BER vs Eb/N0") -> str:
    rows = [r for r in rows if r.ber > 0]
    series: dict[str, list[EvalRow]] = {}
    for r in rows:
        series.setdefault(series_label(r), []).append(r)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" data-yscale="log10">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{escape(title)}</text>',
    ]
    if not rows:
        out.append("</svg>")
        return "\n".join(out) + "\n"

    lo, hi = _decade_bounds([r.ber for r in rows])
    x_lo = min(r.ebn0_db for r in rows)
    x_hi = max(r.ebn0_db for r in rows)
    left, right = MARGIN_L, WIDTH - MARGIN_R
    top, bottom = MARGIN_T, HEIGHT - MARGIN_B
    out.append(f'<g id="axes" data-ylog-min="{lo}" data-ylog-max="{hi}" '
               f'data-x-min="{x_lo!r}" data-x-max="{x_hi!r}">')
    for e in range(lo, hi + 1):
        y = y_position(10.0 ** e, lo, hi)
        out.append(f'<line x1="{left}" y1="{y:.3f}" x2="{right}" y2="{y:.3f}" stroke="#dddddd"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.3f}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="11">1e{e}</text>')
    for x in sorted({r.ebn0_db for r in rows}):
        px = x_position(x, x_lo, x_hi)
        out.append(f'<text x="{px:.3f}" y="{bottom + 18}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="11">{x:g}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" '
               f'fill="none" stroke="black"/>')
    out.append(f'<text x="{(left + right) / 2:.1f}" y="{HEIGHT - 16}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13">Eb/N0 (dB)</text>')
    out.append(f'<text x="18" y="{(top + bottom) / 2:.1f}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="13" transform="rotate(-90 18 {(top + bottom) / 2:.1f})">BER</text>')
    out.append("</g>")

    for i, (label, pts) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = sorted(pts, key=lambda r: r.ebn0_db)
        coords = [(x_position(r.ebn0_db, x_lo, x_hi), y_position(r.ber, lo, hi)) for r in pts]
        out.append(f'<g class="series" data-label="{escape(label)}">')
        if len(coords) > 1:
            path = " ".join(f"{x:.3f},{y:.3f}" for x, y in coords)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for r, (x, y) in zip(pts, coords):
            out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="3" fill="{color}" '
                       f'data-ebn0="{r.ebn0_db!r}" data-ber="{r.ber!r}"/>')
        ly = top + 14 + 18 * i
        out.append(f'<line x1="{right + 12}" y1="{ly}" x2="{right + 32}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{right + 38}" y="{ly + 4}" font-family="sans-serif" font-size="11">{escape(label)}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_ber_svg(rows: Iterable[EvalRow], path, title: str = "BER vs Eb/N0") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(ber_svg(rows, title))
    return path
