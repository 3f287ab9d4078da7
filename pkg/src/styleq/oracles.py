"""Brute-force style and content recovery oracles for synthetic strokes.

Both oracles segment a stroke sequence at pen-ups and compare each segment
against transformed glyph templates with DTW.  They are pure functions and
are independent of the generative model: they grid-search the style space
instead of inverting the renderer.
"""

from __future__ import annotations

import numpy as np

from .dtw import dtw_batch, pairwise_point_costs
from .synthglyph import BASE_POINTS_PER_GLYPH, StrokeSequence, StyleParams, SynthError
from .templates import DEFAULT_TEMPLATES, GlyphTemplate, arclength_resample

# Common resampling length for oracle DTW comparisons.
ORACLE_POINTS = 28

DEFAULT_SLANT_STEP = 0.02
DEFAULT_SCALE_STEP = 0.05


def _segments(strokes: StrokeSequence) -> list[np.ndarray]:
    runs = [r for r in strokes.pen_down_runs() if r.shape[0] >= 2]
    if not runs:
        raise SynthError("stroke sequence has no pen-down segments")
    return runs


def _center(pts: np.ndarray) -> np.ndarray:
    return pts - pts.mean(axis=0)


def _rms_normalize(pts: np.ndarray) -> np.ndarray:
    c = _center(pts)
    rms = np.sqrt((c**2).sum(axis=1).mean())
    return c / max(rms, 1e-12)


def _transform_template(pts: np.ndarray, slant: float, scale: float) -> np.ndarray:
    out = pts.copy()
    out[:, 0] = out[:, 0] + np.tan(slant) * out[:, 1]
    return out * scale


def grid(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def estimate_speed(strokes: StrokeSequence, base_points: int = BASE_POINTS_PER_GLYPH) -> float:
    """Speed from the samples-per-glyph ratio against the base resampling rate."""
    runs = _segments(strokes)
    mean_len = np.mean([r.shape[0] for r in runs])
    lo, hi = StyleParams.RANGES["speed"]
    return float(np.clip(base_points / mean_len, lo, hi))


def fit_style_oracle(
    strokes: StrokeSequence,
    templates: list[GlyphTemplate] | None = None,
    slant_step: float = DEFAULT_SLANT_STEP,
    scale_step: float = DEFAULT_SCALE_STEP,
    base_points: int = BASE_POINTS_PER_GLYPH,
) -> tuple[StyleParams, float]:
    """Grid-search (slant, scale) jointly with per-glyph template identity.

    Minimizes the mean normalized DTW distance between centered glyph
    segments and centered transformed templates.  Speed comes from the
    samples-per-glyph ratio; drift from a linear fit of segment heights.
    Returns the best StyleParams and the residual DTW distance.
    """
    templates = DEFAULT_TEMPLATES if templates is None else templates
    runs = _segments(strokes)
    speed = estimate_speed(strokes, base_points)

    slants = grid(*StyleParams.RANGES["slant"], slant_step)
    scales = grid(*StyleParams.RANGES["scale"], scale_step)

    base = np.stack([arclength_resample(t.polyline, ORACLE_POINTS) for t in templates])
    # refs: (n_slant, n_scale, n_tmpl, L, 2) flattened to (B, L, 2), centered
    sheared = base[None] + 0.0
    sheared = np.repeat(sheared, len(slants), axis=0)
    sheared[..., 0] += np.tan(slants)[:, None, None] * base[None, ..., 1]
    refs = sheared[:, None] * scales[None, :, None, None, None]
    refs = refs - refs.mean(axis=-2, keepdims=True)
    flat_refs = refs.reshape(-1, ORACLE_POINTS, 2)

    # residual per (slant, scale): mean over segments of min over templates
    per_grid = np.zeros((len(slants), len(scales)))
    best_tmpl = np.zeros((len(slants), len(scales), len(runs)), dtype=int)
    for si, seg in enumerate(runs):
        seg_r = _center(arclength_resample(seg, ORACLE_POINTS))
        cost = pairwise_point_costs(seg_r, flat_refs)
        d = dtw_batch(cost).reshape(len(slants), len(scales), len(base))
        per_grid += d.min(axis=-1)
        best_tmpl[:, :, si] = d.argmin(axis=-1)
    per_grid /= len(runs)

    i, j = np.unravel_index(per_grid.argmin(), per_grid.shape)
    slant, scale = float(slants[i]), float(scales[j])
    residual = float(per_grid[i, j])

    # drift: slope of segment centroid height minus the transformed
    # template's own height, over glyph index
    if len(runs) >= 2:
        ys = []
        for si, seg in enumerate(runs):
            t_pts = _transform_template(base[best_tmpl[i, j, si]], slant, scale)
            ys.append(seg[:, 1].mean() - t_pts[:, 1].mean())
        drift = float(np.polyfit(np.arange(len(runs)), ys, 1)[0])
        lo, hi = StyleParams.RANGES["baseline_drift"]
        drift = float(np.clip(drift, lo, hi))
    else:
        drift = 0.0

    # jitter is not identifiable from a single render at this granularity
    params = StyleParams(slant=slant, scale=scale, speed=speed, jitter=0.0, baseline_drift=drift)
    return params, residual


def decode_content_oracle(
    strokes: StrokeSequence,
    templates: list[GlyphTemplate] | None = None,
    slant_grid: np.ndarray | None = None,
    scale_grid: np.ndarray | None = None,
) -> list[int]:
    """Classify each pen-down segment by nearest transformed template.

    Segments and references are centroid/RMS normalized before DTW, so the
    scale grid mostly cancels; the slant grid is what matters.
    """
    templates = DEFAULT_TEMPLATES if templates is None else templates
    runs = _segments(strokes)
    if slant_grid is None:
        slant_grid = grid(*StyleParams.RANGES["slant"], 0.1)
    if scale_grid is None:
        scale_grid = np.array([1.0])

    base = np.stack([arclength_resample(t.polyline, ORACLE_POINTS) for t in templates])
    refs = []
    for slant in slant_grid:
        for scale in scale_grid:
            for t_pts in base:
                refs.append(_rms_normalize(_transform_template(t_pts, slant, scale)))
    flat_refs = np.stack(refs)

    n_tmpl = len(base)
    out = []
    for seg in runs:
        seg_r = _rms_normalize(arclength_resample(seg, ORACLE_POINTS))
        cost = pairwise_point_costs(seg_r, flat_refs)
        d = dtw_batch(cost).reshape(-1, n_tmpl)
        out.append(int(d.min(axis=0).argmin()))
    return out
