"""Dynamic time warping with Euclidean point cost and (up, right, diag) moves."""

from __future__ import annotations

import numpy as np


def dtw_distance(a: np.ndarray, b: np.ndarray, normalize: bool = True) -> float:
    """DTW alignment cost between two 2-D point sequences.

    When normalize is set, the accumulated cost is divided by (n + m) so
    distances are comparable across sequence lengths.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    cost = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    total = _dtw_from_cost(cost[None])[0]
    if normalize:
        total /= a.shape[0] + b.shape[0]
    return float(total)


def dtw_batch(cost: np.ndarray, normalize: bool = True) -> np.ndarray:
    """DTW over a batch of precomputed cost matrices, shape (B, n, m) -> (B,)."""
    out = _dtw_from_cost(np.asarray(cost))
    if normalize:
        out = out / (cost.shape[1] + cost.shape[2])
    return out


def _dtw_from_cost(cost: np.ndarray) -> np.ndarray:
    b, n, m = cost.shape
    acc = np.empty((b, n, m), dtype=cost.dtype)
    acc[:, 0, :] = np.cumsum(cost[:, 0, :], axis=1)
    acc[:, :, 0] = np.cumsum(cost[:, :, 0], axis=1)
    for i in range(1, n):
        prev = acc[:, i - 1, :]
        row = acc[:, i, :]
        for j in range(1, m):
            best = np.minimum(np.minimum(prev[:, j], prev[:, j - 1]), row[:, j - 1])
            row[:, j] = cost[:, i, j] + best
    return acc[:, -1, -1]


def pairwise_point_costs(segments: np.ndarray, references: np.ndarray) -> np.ndarray:
    """Euclidean cost matrices between one segment (n, 2) and a stack (B, m, 2)."""
    seg = np.asarray(segments, dtype=np.float64)
    ref = np.asarray(references, dtype=np.float64)
    diff = seg[None, :, None, :] - ref[:, None, :, :]
    return np.linalg.norm(diff, axis=-1)
