"""Minimal SVG emitters: stroke renders and attention heatmaps."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .synthglyph import StrokeSequence

VIEWBOX = (-1.0, -1.0, 14.0, 4.0)  # x, y, width, height in stroke units


def strokes_to_svg(strokes: StrokeSequence, stroke_width: float = 0.04) -> str:
    """One path per pen-down run, y flipped so up is up, fixed viewbox."""
    x0, y0, w, h = VIEWBOX
    paths = []
    for run in strokes.pen_down_runs():
        pts = " ".join(f"{x:.4f},{(h + 2 * y0 - y):.4f}" for x, y in run)
        paths.append(
            f'<polyline points="{pts}" fill="none" stroke="black" '
            f'stroke-width="{stroke_width}" stroke-linecap="round" stroke-linejoin="round"/>'
        )
    body = "\n  ".join(paths)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0} {y0} {w} {h}">\n'
        f"  {body}\n</svg>\n"
    )


def save_strokes_svg(strokes: StrokeSequence, path: Path) -> None:
    Path(path).write_text(strokes_to_svg(strokes))


def heatmap_to_svg(matrix: np.ndarray, cell: float = 4.0) -> str:
    """Grayscale heatmap of a (rows, cols) weight matrix, row 0 at the top."""
    m = np.asarray(matrix, dtype=np.float64)
    lo, hi = float(m.min()), float(m.max())
    span = hi - lo if hi > lo else 1.0
    rows, cols = m.shape
    rects = []
    for i in range(rows):
        for j in range(cols):
            v = (m[i, j] - lo) / span
            g = int(round(255 * (1.0 - v)))
            rects.append(
                f'<rect x="{j * cell}" y="{i * cell}" width="{cell}" height="{cell}" '
                f'fill="rgb({g},{g},{g})"/>'
            )
    body = "\n  ".join(rects)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="0 0 {cols * cell} {rows * cell}">\n  {body}\n</svg>\n'
    )


def save_heatmap_svg(matrix: np.ndarray, path: Path) -> None:
    Path(path).write_text(heatmap_to_svg(matrix))
