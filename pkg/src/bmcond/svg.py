"""Minimal deterministic SVG line charts.

No fonts, no text shaping, fixed viewbox and fixed number formatting, so
output bytes are reproducible and golden-file testable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = ["Series", "render_line_chart"]

WIDTH = 720
HEIGHT = 480
MARGIN = 40


@dataclass(frozen=True)
class Series:
    xs: Sequence[float]
    ys: Sequence[float]
    color: str
    markers: bool = False


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_line_chart(series: Sequence[Series]) -> str:
    xs_all = np.concatenate([np.asarray(s.xs, dtype=float) for s in series])
    ys_all = np.concatenate([np.asarray(s.ys, dtype=float) for s in series])
    x0, x1 = float(xs_all.min()), float(xs_all.max())
    y0, y1 = float(ys_all.min()), float(ys_all.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def px(x: float) -> float:
        return MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)

    def py(y: float) -> float:
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
        f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="#888" stroke-width="1"/>',
    ]
    for s in series:
        pts = " ".join(
            f"{_fmt(px(x))},{_fmt(py(y))}"
            for x, y in zip(np.asarray(s.xs, dtype=float), np.asarray(s.ys, dtype=float))
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{s.color}" stroke-width="1.5"/>'
        )
        if s.markers:
            step = max(1, len(s.xs) // 40)
            for x, y in zip(np.asarray(s.xs, dtype=float)[::step], np.asarray(s.ys, dtype=float)[::step]):
                parts.append(
                    f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="2.5" fill="{s.color}"/>'
                )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
