"""Overview stage: aggregate raw VLM attention into a sentence-level map.

The trace holds one attention row per autoregressive step and head; the
visual-token slice of those rows, averaged over steps then heads and
reshaped row-major onto the visual grid, is the coarse localization map.
"""

from __future__ import annotations

import numpy as np

from .attnio import AttentionTrace, ScoreMap
from .errors import EmptyTrace, UsageError


def aggregate_cross_attention(trace: AttentionTrace) -> ScoreMap:
    """Average the visual-token attention over steps and heads.

    Returns the (h_v, w_v) map min-max normalized to [0, 1].
    """
    t_steps, heads, _ = trace.weights.shape
    if t_steps == 0 or heads == 0:
        raise EmptyTrace(f"trace has T={t_steps}, H={heads}")
    p, p_prime = trace.visual_span
    visual = trace.weights[:, :, p:p_prime].astype(np.float64)
    grid = visual.mean(axis=(0, 1)).reshape(trace.visual_grid)
    return ScoreMap(grid).normalize()


def interp_matrix(src: int, dst: int) -> np.ndarray:
    """Corner-aligned linear interpolation matrix of shape (dst, src).

    Row i holds the source weights for output coordinate i; rows sum to 1.
    """
    if src <= 0 or dst <= 0:
        raise UsageError(f"sizes must be positive, got src={src}, dst={dst}")
    mat = np.zeros((dst, src))
    if src == 1 or dst == 1:
        # dst == 1 samples the first corner (coordinate 0)
        mat[:, 0] = 1.0
        return mat
    pos = np.linspace(0.0, src - 1.0, dst)
    i0 = np.floor(pos).astype(int)
    i1 = np.minimum(i0 + 1, src - 1)
    frac = pos - i0
    rows = np.arange(dst)
    np.add.at(mat, (rows, i0), 1.0 - frac)
    np.add.at(mat, (rows, i1), frac)
    return mat


def bilinear_resize(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resize of a 2D array."""
    b_rows = interp_matrix(grid.shape[0], out_h)
    b_cols = interp_matrix(grid.shape[1], out_w)
    return b_rows @ np.asarray(grid, dtype=np.float64) @ b_cols.T


def resize_map(m: ScoreMap, target: int) -> ScoreMap:
    """Bilinearly resize a score map to target x target and re-normalize."""
    if target <= 0:
        raise UsageError(f"target resolution must be positive, got {target}")
    if m.grid.size == 0:
        raise UsageError("cannot resize an empty map")
    return ScoreMap(bilinear_resize(m.grid, target, target)).normalize()
