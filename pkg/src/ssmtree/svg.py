"""Minimal hand-rolled SVG output (no plotting dependency)."""

from __future__ import annotations


def _scale(points, width, height, pad=40):
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    sx = (width - 2 * pad) / max(x1 - x0, 1e-12)
    sy = (height - 2 * pad) / max(y1 - y0, 1e-12)

    def tr(p):
        return (pad + (p[0] - x0) * sx, height - pad - (p[1] - y0) * sy)

    return tr


def polyline_svg(series, width=800, height=500, colors=None, title=""):
    """series: list of point lists [(x, y), ...] drawn as polylines."""
    colors = colors or ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]
    all_pts = [p for s in series for p in s]
    if not all_pts:
        all_pts = [(0, 0), (1, 1)]
    tr = _scale(all_pts, width, height)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="100%" height="100%" fill="white"/>']
    if title:
        parts.append(f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>')
    for i, s in enumerate(series):
        if not s:
            continue
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in (tr(p) for p in s))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{colors[i % len(colors)]}" stroke-width="1.2"/>')
    parts.append("</svg>")
    return "\n".join(parts)


def quiver_svg(points, vectors, width=700, height=700, scale=0.15, title=""):
    """Arrow field: points [(x, y)], vectors [(vx, vy)]."""
    tr = _scale(points, width, height)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             '<rect width="100%" height="100%" fill="white"/>']
    if title:
        parts.append(f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>')
    for (x, y), (vx, vy) in zip(points, vectors):
        x1, y1 = tr((x, y))
        x2, y2 = tr((x + scale * vx, y + scale * vy))
        parts.append(f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}" '
                     'stroke="#1f77b4" stroke-width="0.8"/>')
        parts.append(f'<circle cx="{x1:.1f}" cy="{y1:.1f}" r="1" fill="#333"/>')
    parts.append("</svg>")
    return "\n".join(parts)


def hypograph_svg(segments, width=900, height=500, title=""):
    """Filled decorated-tree hypograph sketch: segments are
    (depth_start, depth_end, value_series) triples flattened by the caller
    into polylines; drawn as stacked outlines."""
    return polyline_svg(segments, width=width, height=height, title=title)
