"""Mask post-processing: connected components and box extraction."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from .evolve import BinaryMask

_STRUCTURE_8 = np.ones((3, 3), dtype=bool)


class BoxMode(str, Enum):
    TIGHT_ALL = "tight_all"
    LARGEST_COMPONENT = "largest_component"


@dataclass(frozen=True)
class BBox:
    """Axis-aligned pixel box, half-open: x in [x1, x2), y in [y1, y2)."""

    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box {(self.x1, self.y1, self.x2, self.y2)}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x1, self.y1, self.x2, self.y2)

    @property
    def area(self) -> int:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


@dataclass(frozen=True)
class Component:
    component_id: int
    pixel_count: int
    bbox: BBox


def _tight_box(rows: np.ndarray, cols: np.ndarray) -> BBox:
    return BBox(x1=int(cols.min()), y1=int(rows.min()), x2=int(cols.max()) + 1, y2=int(rows.max()) + 1)


def connected_components(m: BinaryMask) -> list[Component]:
    """8-connected components, ordered by descending size then first pixel."""
    labels, n = ndimage.label(m.grid, structure=_STRUCTURE_8)
    comps = []
    for lbl in range(1, n + 1):
        rows, cols = np.nonzero(labels == lbl)
        first_flat = int(rows[0]) * m.grid.shape[1] + int(cols[0])
        comps.append((-len(rows), first_flat, _tight_box(rows, cols), len(rows)))
    comps.sort(key=lambda c: (c[0], c[1]))
    return [
        Component(component_id=i, pixel_count=size, bbox=box)
        for i, (_, _, box, size) in enumerate(comps)
    ]


def mask_to_box(m: BinaryMask, mode: BoxMode = BoxMode.LARGEST_COMPONENT) -> BBox | None:
    """Extract a detection box from a mask; empty mask yields None."""
    if not m.grid.any():
        return None
    if mode is BoxMode.TIGHT_ALL:
        rows, cols = np.nonzero(m.grid)
        return _tight_box(rows, cols)
    return connected_components(m)[0].bbox
