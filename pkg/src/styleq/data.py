"""Conversion between stored absolute strokes and model-side offset frames.

The dataset stores absolute (x, y, pen) samples; the model consumes and
emits pen offsets (dx, dy, pen), standardized by a fixed scale factor so
typical offsets are O(1).
"""

from __future__ import annotations

import numpy as np
import torch

from .synthglyph import StrokeSequence


def strokes_to_frames(strokes: StrokeSequence, offset_scale: float, dtype=torch.float32) -> torch.Tensor:
    """Absolute strokes -> (T, 3) offset frames; first offset is zero."""
    arr = strokes.samples
    offsets = np.zeros_like(arr)
    offsets[1:, :2] = np.diff(arr[:, :2], axis=0) * offset_scale
    offsets[:, 2] = arr[:, 2]
    return torch.as_tensor(offsets, dtype=dtype)


def frames_to_strokes(
    frames: torch.Tensor | np.ndarray, offset_scale: float, origin: tuple[float, float] = (0.0, 0.0)
) -> StrokeSequence:
    """Offset frames -> absolute strokes; the final sample is forced pen-up."""
    arr = frames.detach().cpu().numpy() if isinstance(frames, torch.Tensor) else np.asarray(frames)
    out = np.zeros_like(arr, dtype=np.float64)
    out[:, :2] = np.cumsum(arr[:, :2] / offset_scale, axis=0) + np.asarray(origin)
    out[:, 2] = (arr[:, 2] > 0.5).astype(np.float64)
    out[-1, 2] = 0.0
    return StrokeSequence(out)
