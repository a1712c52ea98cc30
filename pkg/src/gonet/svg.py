"""Minimal hand-rolled SVG scatter plot: axes, tick labels, circles and a
legend. Deliberately free of plotting-library dependencies."""

from __future__ import annotations

import numpy as np

_SIZE = 520
_MARGIN = 50


def _scale(vals, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return out_lo + (vals - lo) / span * (out_hi - out_lo)


def scatter_svg(groups: list[tuple[str, str, np.ndarray]], path, title: str = "") -> None:
    """groups: (name, css-color, points[n, 2]) triples, drawn in order."""
    all_pts = np.vstack([g[2] for g in groups if len(g[2])])
    x_lo, y_lo = all_pts.min(axis=0)
    x_hi, y_hi = all_pts.max(axis=0)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE}" height="{_SIZE}" '
        f'viewBox="0 0 {_SIZE} {_SIZE}">',
        f'<rect width="{_SIZE}" height="{_SIZE}" fill="white"/>',
    ]
    inner = _SIZE - _MARGIN
    # axes
    parts.append(
        f'<line x1="{_MARGIN}" y1="{inner}" x2="{inner}" y2="{inner}" '
        'stroke="black" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" y2="{inner}" '
        'stroke="black" stroke-width="1"/>'
    )
    # min/max tick labels
    parts.append(
        f'<text x="{_MARGIN}" y="{inner + 16}" font-size="11">{x_lo:.3g}</text>'
    )
    parts.append(
        f'<text x="{inner - 20}" y="{inner + 16}" font-size="11">{x_hi:.3g}</text>'
    )
    parts.append(
        f'<text x="4" y="{inner}" font-size="11">{y_lo:.3g}</text>'
    )
    parts.append(
        f'<text x="4" y="{_MARGIN + 10}" font-size="11">{y_hi:.3g}</text>'
    )
    if title:
        parts.append(
            f'<text x="{_SIZE // 2}" y="24" font-size="14" text-anchor="middle">'
            f"{title}</text>"
        )

    for gi, (name, color, pts) in enumerate(groups):
        xs = _scale(pts[:, 0], x_lo, x_hi, _MARGIN, inner)
        ys = _scale(pts[:, 1], y_lo, y_hi, inner, _MARGIN)  # y grows upward
        for x, y in zip(xs, ys):
            parts.append(
                f'<circle cx="{x:.1f}" cy="{y:.1f}" r="2.5" fill="{color}" '
                'fill-opacity="0.55"/>'
            )
        ly = _MARGIN + 16 * gi
        parts.append(
            f'<circle cx="{inner - 110}" cy="{ly}" r="4" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{inner - 100}" y="{ly + 4}" font-size="12">{name}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
