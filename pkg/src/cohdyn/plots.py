"""Minimal static SVG line charts for trace CSVs (no plotting deps)."""

from __future__ import annotations

import math
from pathlib import Path

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
W, H, PAD = 640, 420, 54


def _scale(vals, lo, hi, out_lo, out_hi):
    if hi == lo:
        hi = lo + 1.0
    return [out_lo + (v - lo) * (out_hi - out_lo) / (hi - lo) for v in vals]


def line_chart(series: dict, path, title: str = "", logy: bool = False):
    """Write a polyline chart; series maps label -> (x list, y list)."""
    xs_all = [x for xs, _ in series.values() for x in xs]
    ys_all = []
    for _, ys in series.values():
        for y in ys:
            if not logy or y > 0:
                ys_all.append(math.log10(y) if logy else y)
    if not xs_all or not ys_all:
        raise ValueError("nothing to plot")
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all), max(ys_all)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W/2}" y="20" text-anchor="middle" font-size="14" '
        f'font-family="sans-serif">{title}</text>',
        f'<rect x="{PAD}" y="{PAD/2}" width="{W-2*PAD}" height="{H-2*PAD}" '
        f'fill="none" stroke="#888"/>',
    ]
    for i, (label, (xs, ys)) in enumerate(sorted(series.items())):
        pts = [
            (x, math.log10(y) if logy else y)
            for x, y in zip(xs, ys)
            if not logy or y > 0
        ]
        if not pts:
            continue
        px = _scale([p[0] for p in pts], x0, x1, PAD, W - PAD)
        py = _scale([p[1] for p in pts], y0, y1, H - 1.5 * PAD, PAD / 2)
        poly = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(px, py))
        color = PALETTE[i % len(PALETTE)]
        parts.append(
            f'<polyline points="{poly}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{W-PAD+4}" y="{PAD/2+14*(i+1)}" font-size="11" '
            f'font-family="sans-serif" fill="{color}">{label}</text>'
        )
    for frac, val in ((0.0, x0), (1.0, x1)):
        parts.append(
            f'<text x="{PAD + frac*(W-2*PAD)}" y="{H-PAD/3}" text-anchor="middle" '
            f'font-size="11" font-family="sans-serif">{val:g}</text>'
        )
    ylab = ("log10 " if logy else "") + "value"
    parts.append(
        f'<text x="12" y="{H/2}" font-size="11" font-family="sans-serif" '
        f'transform="rotate(-90 12 {H/2})" text-anchor="middle">{ylab}</text>'
    )
    parts.append(f'<text x="{W/2}" y="{H-6}" text-anchor="middle" font-size="11" '
                 f'font-family="sans-serif">t</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def emit_trace_plots(rows, out_dir):
    """One SVG per observable in a parsed trace CSV."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_obs: dict = {}
    for r in rows:
        by_obs.setdefault(r["observable"], {}).setdefault(r["L_A"], ([], []))
        xs, ys = by_obs[r["observable"]][r["L_A"]]
        xs.append(r["t"])
        ys.append(r["mean"])
    written = []
    for obs, groups in by_obs.items():
        series = {f"L_A={L_A}": xy for L_A, xy in groups.items()}
        path = out_dir / f"{obs}.svg"
        line_chart(series, path, title=obs, logy=obs in ("dSd", "dSR"))
        written.append(path)
    return written
