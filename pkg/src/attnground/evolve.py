"""Evolve stage: top-K seeding, threshold-bounded region growth, binarization.

Growth is an iterative explicit-stack flood fill over the 8-connected
neighborhood: a pixel survives iff its value meets the response threshold
and it is reachable from some seed through qualifying pixels. Activations
disconnected from every seed are zeroed out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .attnio import AttentionTrace, ScoreMap, SelfAttentionStack
from .errors import EmptyMap, UsageError
from .focus import FusedSelfAttention, InteractionConfig, fuse_self_attention, interact
from .overview import aggregate_cross_attention, resize_map

_NEIGHBORS_8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


class SeedSource(str, Enum):
    INTERACTION_MAP = "interaction_map"
    CROSS_MAP = "cross_map"


class StageOrder(str, Enum):
    OFE = "ofe"  # overview -> focus -> evolve (default)
    OEF = "oef"  # overview -> evolve -> focus


@dataclass(frozen=True)
class EvolveConfig:
    k: int = 7
    tau: float = 0.3
    alpha: float = 0.4
    seed_source: SeedSource = SeedSource.INTERACTION_MAP

    def __post_init__(self):
        if self.k < 1:
            raise UsageError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.tau <= 1.0:
            raise UsageError(f"tau must be in [0,1], got {self.tau}")
        if not 0.0 <= self.alpha <= 1.0:
            raise UsageError(f"alpha must be in [0,1], got {self.alpha}")


@dataclass(frozen=True)
class SeedSet:
    positions: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class BinaryMask:
    grid: np.ndarray  # bool

    def __post_init__(self):
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=bool))

    @property
    def foreground_count(self) -> int:
        return int(self.grid.sum())


def select_seeds(m: ScoreMap, k: int) -> SeedSet:
    """Pick the k highest-valued positions, ties broken row-major.

    Zero-valued positions are never seeds; if fewer than k positions are
    nonzero, all nonzero positions are returned.
    """
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    flat = m.grid.ravel()
    nonzero = np.flatnonzero(flat > 0)
    if nonzero.size == 0:
        raise EmptyMap("cannot seed an all-zero map")
    order = np.lexsort((nonzero, -flat[nonzero]))
    chosen = nonzero[order][:k]
    w = m.grid.shape[1]
    return SeedSet(positions=tuple((int(i) // w, int(i) % w) for i in chosen))


def grow(m: ScoreMap, seeds: SeedSet, tau: float) -> ScoreMap:
    """Flood-fill from the seeds through pixels with value >= tau.

    Returns the map with every unreachable pixel zeroed. A seed whose own
    value is below tau contributes nothing; an empty result is valid.
    """
    grid = m.grid
    h, w = grid.shape
    qualified = grid >= tau
    visited = np.zeros((h, w), dtype=bool)
    stack: list[tuple[int, int]] = []
    for i, j in seeds.positions:
        if 0 <= i < h and 0 <= j < w and qualified[i, j] and not visited[i, j]:
            visited[i, j] = True
            stack.append((i, j))
    while stack:
        i, j = stack.pop()
        for di, dj in _NEIGHBORS_8:
            ni, nj = i + di, j + dj
            if 0 <= ni < h and 0 <= nj < w and qualified[ni, nj] and not visited[ni, nj]:
                visited[ni, nj] = True
                stack.append((ni, nj))
    return ScoreMap(np.where(visited, grid, 0.0))


def binarize(ae: ScoreMap, alpha: float) -> BinaryMask:
    """Threshold with strict greater-than."""
    return BinaryMask(ae.grid > alpha)


def upsample_mask(mask: BinaryMask, height: int, width: int) -> BinaryMask:
    """Nearest-neighbor upsampling to pixel resolution (preserves {0,1})."""
    h, w = mask.grid.shape
    rows = (np.arange(height) * h) // height
    cols = (np.arange(width) * w) // width
    return BinaryMask(mask.grid[np.ix_(rows, cols)])


@dataclass(frozen=True)
class PipelineConfig:
    interaction: InteractionConfig = field(default_factory=InteractionConfig)
    evolve: EvolveConfig = field(default_factory=EvolveConfig)
    stage_order: StageOrder = StageOrder.OFE
    target_resolution: int | None = None  # default: max resolution in the stack
    use_evolve: bool = True  # ablation switch: skip seeding/growth entirely


@dataclass(frozen=True)
class PipelineResult:
    mask: BinaryMask  # at map resolution
    evolved: ScoreMap  # A_E, the map that was binarized
    cross: ScoreMap  # aggregated cross-attention at map resolution
    interaction: ScoreMap | None  # interaction map (None if focus skipped)


def run_pipeline(
    trace: AttentionTrace,
    stack: SelfAttentionStack,
    cfg: PipelineConfig = PipelineConfig(),
) -> PipelineResult:
    """Run the full grounding pipeline at map resolution.

    OFE: aggregate -> resize -> fuse -> interact -> seeds -> grow -> binarize.
    OEF: aggregate -> resize -> seeds on the cross map -> grow -> interact
    -> binarize.
    """
    ac = aggregate_cross_attention(trace)
    fused = fuse_self_attention(stack, cfg.target_resolution)
    r = fused.target_resolution
    ac_r = resize_map(ac, r)
    ecfg = cfg.evolve

    if cfg.stage_order is StageOrder.OFE:
        acs = interact(ac_r, fused, cfg.interaction)
        if cfg.use_evolve:
            seed_map = acs if ecfg.seed_source is SeedSource.INTERACTION_MAP else ac_r
            seeds = select_seeds(seed_map, ecfg.k)
            evolved = grow(acs, seeds, ecfg.tau)
        else:
            evolved = acs
    else:
        if cfg.use_evolve:
            seeds = select_seeds(ac_r, ecfg.k)
            grown = grow(ac_r, seeds, ecfg.tau)
        else:
            grown = ac_r
        evolved = interact(grown, fused, cfg.interaction)
        acs = evolved
    mask = binarize(evolved, ecfg.alpha)
    return PipelineResult(mask=mask, evolved=evolved, cross=ac_r, interaction=acs)
