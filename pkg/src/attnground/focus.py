"""Focus stage: fuse multi-resolution self-attention and combine with the
cross-attention map.

Fusion upsamples each (r^2, r^2) layer to the target resolution by bilinear
interpolation applied independently to the query-grid pair and the key-grid
pair of axes, re-normalizes rows to sum 1, and averages layers uniformly.
Four interaction strategies are supported; cosine similarity per key pixel
is the default.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .attnio import ScoreMap, SelfAttentionStack
from .errors import AllZeroAttention, ResolutionMismatch, UsageError
from .overview import interp_matrix


class Strategy(str, Enum):
    SIMILARITY = "similarity"
    ANCHOR = "anchor"
    MULTIPLICATION = "multiplication"
    EXPONENTIATION = "exponentiation"


class SimilarityAxis(str, Enum):
    COLUMN = "column"  # score pixel v by the attention everything pays to v
    ROW = "row"  # score pixel v by where v itself attends


@dataclass(frozen=True)
class InteractionConfig:
    strategy: Strategy = Strategy.SIMILARITY
    gamma: float = 2.0  # exponentiation only
    anchor_count: int = 7  # anchor only
    similarity_axis: SimilarityAxis = SimilarityAxis.COLUMN

    def __post_init__(self):
        if self.gamma <= 0:
            raise UsageError(f"gamma must be positive, got {self.gamma}")
        if self.anchor_count < 1:
            raise UsageError(f"anchor_count must be >= 1, got {self.anchor_count}")


@dataclass(frozen=True)
class FusedSelfAttention:
    tensor: np.ndarray  # (R*R, R*R), row stochastic
    target_resolution: int


def _upsample_pairwise(layer: np.ndarray, src: int, dst: int) -> np.ndarray:
    """Upsample an (r^2, r^2) attention tensor to (R^2, R^2).

    Treating the tensor as (r, r, r, r), bilinear interpolation along the
    first and last grid pairs is the two-sided Kronecker map B (x) B.
    """
    if src == dst:
        return np.asarray(layer, dtype=np.float64)
    b = interp_matrix(src, dst)
    t4 = np.asarray(layer, dtype=np.float64).reshape(src, src, src, src)
    up = np.einsum("ia,jb,abcd,kc,ld->ijkl", b, b, t4, b, b, optimize=True)
    return up.reshape(dst * dst, dst * dst)


def fuse_self_attention(stack: SelfAttentionStack, target: int | None = None) -> FusedSelfAttention:
    """Upsample every layer to the target resolution and average them.

    Rows are re-normalized to sum 1 after upsampling, so the fused tensor
    stays row stochastic. Default target is the largest resolution present.
    """
    if not stack.layers:
        raise UsageError("empty self-attention stack")
    if target is None:
        target = max(stack.resolutions)
    if target <= 0:
        raise UsageError(f"target resolution must be positive, got {target}")
    acc = np.zeros((target * target, target * target))
    for res, tensor in stack.layers:
        up = _upsample_pairwise(tensor, res, target)
        row_sums = up.sum(axis=1, keepdims=True)
        np.divide(up, row_sums, out=up, where=row_sums > 0)
        acc += up
    acc /= len(stack.layers)
    return FusedSelfAttention(tensor=acc, target_resolution=target)


def _top_flat_indices(grid: np.ndarray, k: int) -> np.ndarray:
    """Flat indices of the k largest entries, row-major tie-break."""
    flat = grid.ravel()
    nonzero = np.flatnonzero(flat > 0)
    order = np.lexsort((nonzero, -flat[nonzero]))
    return nonzero[order][:k]


def interact(ac: ScoreMap, asf: FusedSelfAttention, cfg: InteractionConfig) -> ScoreMap:
    """Combine the cross-attention map with the fused structural prior.

    All strategies score each pixel v through the self-attention column
    S[:, v] (the attention every pixel pays to v); the result is min-max
    normalized to [0, 1].
    """
    r = asf.target_resolution
    if ac.grid.shape != (r, r):
        raise ResolutionMismatch(f"cross map {ac.grid.shape} vs self-attention resolution {r}")
    a = ac.grid.ravel()
    if not np.any(a > 0):
        raise AllZeroAttention("cross-attention map is all zeros")
    s = asf.tensor

    if cfg.strategy is Strategy.SIMILARITY:
        if cfg.similarity_axis is SimilarityAxis.ROW:
            s = s.T
        dots = a @ s
        norms = np.linalg.norm(s, axis=0)
        a_norm = np.linalg.norm(a)
        out = np.zeros_like(dots)
        np.divide(dots, a_norm * norms, out=out, where=norms > 0)
    elif cfg.strategy is Strategy.MULTIPLICATION:
        out = a @ s
    elif cfg.strategy is Strategy.EXPONENTIATION:
        out = a @ np.power(s, cfg.gamma)
    elif cfg.strategy is Strategy.ANCHOR:
        anchors = _top_flat_indices(ac.grid, cfg.anchor_count)
        out = s[anchors].mean(axis=0)
    else:  # pragma: no cover
        raise UsageError(f"unknown strategy {cfg.strategy}")

    return ScoreMap(out.reshape(r, r)).normalize()
