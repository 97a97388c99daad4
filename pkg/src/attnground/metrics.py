"""Evaluation metrics: per-sample IoU, Pr@X, mIoU and oIoU summaries."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ResolutionMismatch, UsageError
from .evolve import BinaryMask
from .grounding import BBox

PRECISION_THRESHOLDS = (0.3, 0.5, 0.7)


class Task(str, Enum):
    RSREC = "rsrec"  # box output
    RSRES = "rsres"  # mask output


@dataclass(frozen=True)
class EvalRecord:
    sample_id: str
    task: Task
    iou: float
    intersection: float  # retained for oIoU
    union: float


@dataclass(frozen=True)
class TaskReport:
    precision: dict[float, float]  # threshold -> percentage
    miou: float
    oiou: float
    n_samples: int

    def as_dict(self) -> dict:
        return {
            "precision": {f"{t:.1f}": self.precision[t] for t in PRECISION_THRESHOLDS},
            "miou": self.miou,
            "oiou": self.oiou,
            "n_samples": self.n_samples,
        }


def mask_iou(pred: BinaryMask, gt: BinaryMask) -> float:
    """IoU of two masks; both empty counts as a perfect 1.0."""
    iou, _, _ = mask_iou_parts(pred, gt)
    return iou


def mask_iou_parts(pred: BinaryMask, gt: BinaryMask) -> tuple[float, int, int]:
    """(iou, intersection, union) pixel counts for two same-size masks."""
    if pred.grid.shape != gt.grid.shape:
        raise ResolutionMismatch(f"mask shapes differ: {pred.grid.shape} vs {gt.grid.shape}")
    inter = int(np.logical_and(pred.grid, gt.grid).sum())
    union = int(np.logical_or(pred.grid, gt.grid).sum())
    if union == 0:
        return 1.0, 0, 0
    return inter / union, inter, union


def box_iou(a: BBox, b: BBox) -> float:
    iou, _, _ = box_iou_parts(a, b)
    return iou


def box_iou_parts(a: BBox, b: BBox) -> tuple[float, float, float]:
    """(iou, intersection, union) areas for two half-open boxes."""
    ix = max(0, min(a.x2, b.x2) - max(a.x1, b.x1))
    iy = max(0, min(a.y2, b.y2) - max(a.y1, b.y1))
    inter = ix * iy
    union = a.area + b.area - inter
    return (inter / union if union > 0 else 0.0), float(inter), float(union)


def summarize(records: list[EvalRecord]) -> TaskReport:
    """Aggregate per-sample records into Pr@X / mIoU / oIoU percentages.

    Pr@X counts samples with iou >= X (inclusive). oIoU is the cumulative
    intersection over the cumulative union.
    """
    if not records:
        raise UsageError("cannot summarize an empty record list")
    n = len(records)
    ious = np.array([r.iou for r in records])
    precision = {t: 100.0 * float((ious >= t).sum()) / n for t in PRECISION_THRESHOLDS}
    # math.fsum keeps the aggregates invariant under record ordering.
    total_union = math.fsum(r.union for r in records)
    oiou = 100.0 * math.fsum(r.intersection for r in records) / total_union if total_union > 0 else 100.0
    return TaskReport(
        precision=precision,
        miou=100.0 * math.fsum(ious) / n,
        oiou=oiou,
        n_samples=n,
    )


@dataclass(frozen=True)
class MetricsReport:
    tasks: dict[str, TaskReport]  # keyed by task/variant name

    def as_dict(self) -> dict:
        return {name: rep.as_dict() for name, rep in sorted(self.tasks.items())}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        header = f"{'task':<24}" + "".join(f"{f'Pr@{t:.1f}':>9}" for t in PRECISION_THRESHOLDS)
        header += f"{'mIoU':>9}{'oIoU':>9}{'N':>7}"
        lines = [header, "-" * len(header)]
        for name, rep in sorted(self.tasks.items()):
            row = f"{name:<24}"
            row += "".join(f"{rep.precision[t]:>9.2f}" for t in PRECISION_THRESHOLDS)
            row += f"{rep.miou:>9.2f}{rep.oiou:>9.2f}{rep.n_samples:>7d}"
            lines.append(row)
        return "\n".join(lines) + "\n"
