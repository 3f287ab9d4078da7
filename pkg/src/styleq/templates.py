"""Hand-designed polyline glyph templates (a small digit-like alphabet)."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GlyphTemplate:
    """A single glyph: an ordered polyline inside the unit box."""

    symbol: int
    polyline: np.ndarray  # (P, 2) float64, coordinates in [0, 1]^2
    pen_lift_after: bool = True

    def __post_init__(self):
        poly = np.asarray(self.polyline, dtype=np.float64)
        if poly.ndim != 2 or poly.shape[1] != 2 or poly.shape[0] < 4:
            raise ValueError("polyline must be (P, 2) with P >= 4")
        if poly.min() < 0.0 or poly.max() > 1.0:
            raise ValueError("polyline coordinates must lie in [0, 1]^2")
        object.__setattr__(self, "polyline", poly)


# Digit-like shapes, drawn as single strokes.  Chosen to be mutually
# distinct under centroid/RMS normalization (see test_templates).
_RAW_SHAPES = [
    # 0: closed loop
    [(0.5, 1.0), (0.15, 0.75), (0.15, 0.25), (0.5, 0.0), (0.85, 0.25), (0.85, 0.75), (0.5, 1.0)],
    # 1: flag + downstroke
    [(0.35, 0.8), (0.5, 1.0), (0.5, 0.55), (0.5, 0.0)],
    # 2: top curve, diagonal, base
    [(0.15, 0.8), (0.4, 1.0), (0.75, 0.85), (0.8, 0.6), (0.15, 0.0), (0.85, 0.0)],
    # 3: double bump
    [(0.2, 0.95), (0.7, 1.0), (0.8, 0.75), (0.45, 0.55), (0.8, 0.3), (0.7, 0.05), (0.2, 0.0)],
    # 4: diagonal, crossbar, downstroke
    [(0.7, 1.0), (0.15, 0.35), (0.9, 0.35), (0.7, 0.6), (0.7, 0.0)],
    # 5: top bar, stem, bowl
    [(0.8, 1.0), (0.25, 1.0), (0.2, 0.55), (0.6, 0.6), (0.85, 0.35), (0.6, 0.0), (0.2, 0.1)],
    # 6: sweep into lower loop
    [(0.75, 1.0), (0.3, 0.6), (0.2, 0.25), (0.5, 0.0), (0.8, 0.25), (0.6, 0.5), (0.25, 0.35)],
    # 7: top bar, diagonal
    [(0.15, 1.0), (0.85, 1.0), (0.45, 0.45), (0.3, 0.0)],
    # 8: crossing double loop
    [(0.5, 0.5), (0.25, 0.75), (0.5, 1.0), (0.75, 0.75), (0.5, 0.5), (0.25, 0.2), (0.5, 0.0), (0.75, 0.2), (0.5, 0.5)],
    # 9: upper loop, tail
    [(0.8, 0.9), (0.45, 1.0), (0.2, 0.75), (0.5, 0.55), (0.8, 0.9), (0.75, 0.35), (0.6, 0.0)],
]

DEFAULT_TEMPLATES: list[GlyphTemplate] = [
    GlyphTemplate(symbol=i, polyline=np.array(pts, dtype=np.float64))
    for i, pts in enumerate(_RAW_SHAPES)
]

ALPHABET_SIZE = len(DEFAULT_TEMPLATES)


def template_hash(templates: list[GlyphTemplate] | None = None) -> str:
    """Stable hash of the template geometry, recorded in dataset manifests."""
    templates = DEFAULT_TEMPLATES if templates is None else templates
    h = hashlib.sha256()
    for t in templates:
        h.update(str(t.symbol).encode())
        h.update(np.ascontiguousarray(t.polyline).tobytes())
    return h.hexdigest()


def arclength_resample(polyline: np.ndarray, n: int) -> np.ndarray:
    """Resample a polyline to n points spaced uniformly in arc length."""
    poly = np.asarray(polyline, dtype=np.float64)
    if n < 2:
        raise ValueError("need at least 2 output points")
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if total == 0.0:
        return np.repeat(poly[:1], n, axis=0)
    targets = np.linspace(0.0, total, n)
    x = np.interp(targets, s, poly[:, 0])
    y = np.interp(targets, s, poly[:, 1])
    return np.stack([x, y], axis=1)
