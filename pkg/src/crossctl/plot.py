"""Position-time SVG from a trajectory CSV and a window log, drawn without external libraries."""
from __future__ import annotations

import math
from typing import Dict, List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 800, 500
MARGIN = dict(left=70, right=20, top=20, bottom=55)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2",
           "#17becf", "#7f7f7f", "#bcbd22")


class PlotError(ValueError):
    pass


def _float(row, key, lineno):
    try:
        x = float(row[key])
    except (KeyError, TypeError, ValueError):
        raise PlotError(f"row {lineno}: bad or missing {key!r}") from None
    return x


def series_from_rows(rows: Sequence[dict]) -> Dict[str, List[Tuple[float, float]]]:
    """Per-vehicle (t, p) points in file order."""
    out: Dict[str, List[Tuple[float, float]]] = {}
    for i, row in enumerate(rows, start=2):
        vid = row.get("vehicle_id")
        if vid in (None, ""):
            raise PlotError(f"row {i}: missing vehicle_id")
        out.setdefault(vid, []).append((_float(row, "t", i), _float(row, "p", i)))
    return out


def windows_from_rows(rows: Sequence[dict]):
    """Final (non-superseded) windows with a known node position."""
    out = []
    for i, row in enumerate(rows, start=2):
        if str(row.get("superseded", "0")).strip() in ("1", "True", "true"):
            continue
        p = _float(row, "p_node", i) if row.get("p_node") not in (None, "") else math.nan
        out.append((row.get("vehicle_id"), row.get("node_id"), _float(row, "t_lo", i), _float(row, "t_hi", i), p))
    return out


def _ticks(lo: float, hi: float, n: int = 6) -> List[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    return [first + k * step for k in range(int((hi - first) / step + 1e-9) + 1)]


def render_svg(series: Dict[str, List[Tuple[float, float]]], windows=(), title: Optional[str] = None) -> str:
    if not series:
        raise PlotError("no trajectory samples")
    ts = [t for pts in series.values() for t, _ in pts]
    ps = [p for pts in series.values() for _, p in pts]
    nodes = sorted({round(w[4], 9) for w in windows if math.isfinite(w[4])})
    t0, t1 = min(ts), max(ts + [w[3] for w in windows])
    p0, p1 = min(ps + nodes), max(ps + nodes)
    if t1 <= t0:
        t1 = t0 + 1.0
    if p1 <= p0:
        p1 = p0 + 1.0
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]

    def X(t):
        return x0 + (t - t0) / (t1 - t0) * (x1 - x0)

    def Y(p):
        return y0 + (p - p0) / (p1 - p0) * (y1 - y0)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<title>{escape(title)}</title>')
    out.append(f'<g class="axes" stroke="black" stroke-width="1">'
               f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>')
    for t in _ticks(t0, t1):
        out.append(f'<text x="{X(t):.1f}" y="{y0 + 16}" text-anchor="middle">{t:g}</text>')
    for p in _ticks(p0, p1):
        out.append(f'<text x="{x0 - 6}" y="{Y(p) + 4:.1f}" text-anchor="end">{p:g}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">t (s)</text>')
    out.append(f'<text x="16" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {(y0 + y1) / 2:.1f})">p (m)</text>')
    for p in nodes:
        out.append(f'<line class="node" x1="{x0}" y1="{Y(p):.2f}" x2="{x1}" y2="{Y(p):.2f}" '
                   f'stroke="#999999" stroke-dasharray="4 3"/>')
    for i, (vid, pts) in enumerate(series.items()):
        coords = " ".join(f"{X(t):.2f},{Y(p):.2f}" for t, p in pts)
        t_first, t_last = pts[0][0], pts[-1][0]
        out.append(f'<polyline class="vehicle" data-vehicle="{escape(str(vid))}" '
                   f'data-t-range="{t_first:.9g} {t_last:.9g}" fill="none" '
                   f'stroke="{PALETTE[i % len(PALETTE)]}" stroke-width="1.5" points="{coords}"/>')
    for vid, node_id, lo, hi, p in windows:
        if not math.isfinite(p):
            continue
        out.append(f'<line class="window" data-vehicle="{escape(str(vid))}" x1="{X(lo):.2f}" y1="{Y(p):.2f}" '
                   f'x2="{X(hi):.2f}" y2="{Y(p):.2f}" stroke="black" stroke-width="4"/>')
        for t in (lo, hi):
            out.append(f'<line class="window-edge" x1="{X(t):.2f}" y1="{Y(p) - 6:.2f}" x2="{X(t):.2f}" '
                       f'y2="{Y(p) + 6:.2f}" stroke="black" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
