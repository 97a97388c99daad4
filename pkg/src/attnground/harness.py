"""Dataset-level orchestration: single-sample runs, evaluation, ablations.

Evaluation iterates sample manifests, runs the pipeline, scores masks and
boxes against ground truth, and assembles deterministic reports (samples
are processed in sorted order and reports are rebuilt sequentially, so a
parallel run produces byte-identical output).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import attnio
from .errors import AttnGroundError, DataError, UsageError
from .evolve import BinaryMask, PipelineConfig, PipelineResult, run_pipeline, upsample_mask
from .grounding import BBox, BoxMode, mask_to_box
from .metrics import (
    EvalRecord,
    MetricsReport,
    Task,
    box_iou_parts,
    mask_iou_parts,
    summarize,
)

# fixed diagnostic colormap: black -> blue -> magenta -> yellow ramp
_COLORMAP_ANCHORS = np.array(
    [[0, 0, 0], [32, 12, 96], [115, 30, 145], [200, 60, 100], [255, 170, 40], [255, 255, 128]],
    dtype=np.float64,
)


def heatmap_png(grid: np.ndarray, path: str | Path) -> None:
    """Render a [0,1] score map with the fixed diagnostic colormap."""
    g = np.clip(np.asarray(grid, dtype=np.float64), 0.0, 1.0)
    pos = g * (len(_COLORMAP_ANCHORS) - 1)
    i0 = np.minimum(pos.astype(int), len(_COLORMAP_ANCHORS) - 2)
    frac = (pos - i0)[..., None]
    rgb = _COLORMAP_ANCHORS[i0] * (1 - frac) + _COLORMAP_ANCHORS[i0 + 1] * frac
    Image.fromarray(rgb.round().astype(np.uint8), mode="RGB").save(path, format="PNG")


@dataclass(frozen=True)
class RunOutput:
    sample_id: str
    mask_path: Path
    box_path: Path
    heatmap_paths: dict[str, Path]
    box: BBox | None
    mask_foreground: int


def run_sample(
    manifest_path: str | Path,
    out_dir: str | Path,
    cfg: PipelineConfig = PipelineConfig(),
    *,
    box_mode: BoxMode = BoxMode.LARGEST_COMPONENT,
    heatmaps: bool = False,
) -> RunOutput:
    """Run the pipeline on one sample and write mask / box / heatmaps."""
    manifest = attnio.read_manifest(manifest_path)
    trace, stack, _ = attnio.load_sample(manifest_path)
    result = run_pipeline(trace, stack, cfg)
    h_px, w_px = manifest.image_size
    mask_px = upsample_mask(result.mask, h_px, w_px)
    box = mask_to_box(mask_px, box_mode)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mask_path = out_dir / f"{manifest.sample_id}_mask.png"
    attnio.write_mask_png(mask_px.grid, mask_path)
    box_path = out_dir / f"{manifest.sample_id}_box.json"
    box_path.write_text(json.dumps(list(box.as_tuple()) if box else None))

    heatmap_paths: dict[str, Path] = {}
    if heatmaps:
        stages = {"cross": result.cross, "interaction": result.interaction, "evolved": result.evolved}
        for name, smap in stages.items():
            if smap is None:
                continue
            path = out_dir / f"{manifest.sample_id}_{name}.png"
            heatmap_png(smap.grid, path)
            heatmap_paths[name] = path
    return RunOutput(
        sample_id=manifest.sample_id,
        mask_path=mask_path,
        box_path=box_path,
        heatmap_paths=heatmap_paths,
        box=box,
        mask_foreground=mask_px.foreground_count,
    )


def find_manifests(dataset_dir: str | Path) -> list[Path]:
    dataset_dir = Path(dataset_dir)
    if not dataset_dir.is_dir():
        raise UsageError(f"dataset directory not found: {dataset_dir}")
    manifests = sorted(dataset_dir.glob("**/manifest.json"))
    if not manifests:
        raise UsageError(f"no manifest.json files under {dataset_dir}")
    return manifests


@dataclass(frozen=True)
class SampleScore:
    sample_id: str
    image_size: tuple[int, int]
    mask_px: BinaryMask
    gt_mask: BinaryMask | None
    gt_box: BBox | None
    box_largest: BBox | None
    box_tight: BBox | None


def _score_one(
    manifest_path: Path, cfg: PipelineConfig, resolutions: tuple[int, ...] | None = None
) -> SampleScore:
    manifest = attnio.read_manifest(manifest_path)
    trace, stack, gt = attnio.load_sample(manifest_path)
    if resolutions is not None:
        layers = tuple((r, t) for r, t in stack.layers if r in resolutions)
        if not layers:
            raise DataError(
                f"none of resolutions {resolutions} present in sample", sample_id=manifest.sample_id
            )
        stack = type(stack)(layers=layers)
    result = run_pipeline(trace, stack, cfg)
    h_px, w_px = manifest.image_size
    mask_px = upsample_mask(result.mask, h_px, w_px)
    return SampleScore(
        sample_id=manifest.sample_id,
        image_size=manifest.image_size,
        mask_px=mask_px,
        gt_mask=BinaryMask(gt.mask) if gt and gt.mask is not None else None,
        gt_box=BBox(*gt.box) if gt and gt.box is not None else None,
        box_largest=mask_to_box(mask_px, BoxMode.LARGEST_COMPONENT),
        box_tight=mask_to_box(mask_px, BoxMode.TIGHT_ALL),
    )


def _box_record(sample_id: str, pred: BBox | None, gt: BBox) -> EvalRecord:
    if pred is None:
        return EvalRecord(sample_id, Task.RSREC, 0.0, 0.0, float(gt.area))
    iou, inter, union = box_iou_parts(pred, gt)
    return EvalRecord(sample_id, Task.RSREC, iou, inter, union)


def _mask_record(sample_id: str, pred: BinaryMask, gt: BinaryMask) -> EvalRecord:
    iou, inter, union = mask_iou_parts(pred, gt)
    return EvalRecord(sample_id, Task.RSRES, iou, float(inter), float(union))


def score_dataset(
    dataset_dir: str | Path,
    cfg: PipelineConfig = PipelineConfig(),
    *,
    jobs: int = 1,
    resolutions: tuple[int, ...] | None = None,
) -> list[SampleScore]:
    """Run the pipeline over every sample in the dataset, sorted by path."""
    manifests = find_manifests(dataset_dir)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda p: _score_one(p, cfg, resolutions), manifests))
    return [_score_one(p, cfg, resolutions) for p in manifests]


def build_report(scores: list[SampleScore], *, refined_masks_in: str | Path | None = None) -> MetricsReport:
    """Assemble the metrics report (both tasks, both box modes)."""
    rsres, rsrec, rsrec_tight = [], [], []
    refined_records = []
    refined_dir = Path(refined_masks_in) if refined_masks_in else None
    for s in scores:
        if s.gt_mask is not None:
            rsres.append(_mask_record(s.sample_id, s.mask_px, s.gt_mask))
            if refined_dir is not None:
                refined_path = refined_dir / f"{s.sample_id}.png"
                if not refined_path.exists():
                    raise DataError(f"refined mask missing: {refined_path}", sample_id=s.sample_id)
                refined = BinaryMask(attnio.read_mask_png(refined_path))
                refined_records.append(_mask_record(s.sample_id, refined, s.gt_mask))
        if s.gt_box is not None:
            rsrec.append(_box_record(s.sample_id, s.box_largest, s.gt_box))
            rsrec_tight.append(_box_record(s.sample_id, s.box_tight, s.gt_box))
    tasks = {}
    if rsres:
        tasks["rsres"] = summarize(rsres)
    if rsrec:
        tasks["rsrec"] = summarize(rsrec)
        tasks["rsrec_tight_all"] = summarize(rsrec_tight)
    if refined_records:
        tasks["rsres_refined"] = summarize(refined_records)
    if not tasks:
        raise DataError("no ground truth found in dataset; nothing to evaluate")
    return MetricsReport(tasks=tasks)


def write_refine_boxes(scores: list[SampleScore], path: str | Path) -> None:
    """Emit the box-prompt JSON consumed by the external mask refiner."""
    entries = []
    for s in scores:
        if s.box_largest is None:
            continue
        entries.append(
            {
                "sample_id": s.sample_id,
                "image_size": list(s.image_size),
                "box": list(s.box_largest.as_tuple()),
            }
        )
    Path(path).write_text(json.dumps(entries, indent=2, sort_keys=True) + "\n")


def evaluate(
    dataset_dir: str | Path,
    out_dir: str | Path,
    cfg: PipelineConfig = PipelineConfig(),
    *,
    jobs: int = 1,
    refine_boxes_out: str | Path | None = None,
    refined_masks_in: str | Path | None = None,
    report_name: str = "report",
) -> tuple[MetricsReport, Path, Path]:
    """Evaluate a dataset and write the JSON + text reports."""
    scores = score_dataset(dataset_dir, cfg, jobs=jobs)
    report = build_report(scores, refined_masks_in=refined_masks_in)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if refine_boxes_out is not None:
        write_refine_boxes(scores, refine_boxes_out)
    json_path = out_dir / f"{report_name}.json"
    text_path = out_dir / f"{report_name}.txt"
    json_path.write_text(report.to_json())
    text_path.write_text(report.to_text())
    return report, json_path, text_path


def _resolution_sets(available: tuple[int, ...]) -> list[tuple[int, ...]]:
    """All non-empty subsets of the available resolutions, smallest first."""
    avail = sorted(available)
    sets: list[tuple[int, ...]] = []
    for bits in range(1, 2 ** len(avail)):
        subset = tuple(r for i, r in enumerate(avail) if bits & (1 << i))
        sets.append(subset)
    sets.sort(key=lambda s: (len(s), s))
    return sets


def ablate(
    dataset_dir: str | Path,
    out_dir: str | Path,
    *,
    jobs: int = 1,
) -> tuple[list[dict], Path, Path]:
    """Sweep strategies x evolve on/off x resolution subsets.

    Returns one row per cell with both-task mIoU / Pr@0.5, plus the paths
    of the written JSON and text tables. Each cell equals an individual
    evaluation run with the same configuration.
    """
    from .focus import InteractionConfig, Strategy

    manifests = find_manifests(dataset_dir)
    first = attnio.read_manifest(manifests[0])
    available = tuple(sorted(first.self_stack_paths))
    rows = []
    for strategy in Strategy:
        for use_evolve in (False, True):
            for res_set in _resolution_sets(available):
                cfg = PipelineConfig(
                    interaction=InteractionConfig(strategy=strategy), use_evolve=use_evolve
                )
                scores = score_dataset(dataset_dir, cfg, jobs=jobs, resolutions=res_set)
                report = build_report(scores)
                row = {
                    "strategy": strategy.value,
                    "evolve": use_evolve,
                    "resolutions": list(res_set),
                }
                for task in ("rsres", "rsrec"):
                    if task in report.tasks:
                        row[f"{task}_miou"] = report.tasks[task].miou
                        row[f"{task}_pr50"] = report.tasks[task].precision[0.5]
                rows.append(row)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "ablation.json"
    json_path.write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    header = f"{'strategy':<16}{'evolve':<8}{'resolutions':<16}{'rsres mIoU':>12}{'rsrec mIoU':>12}"
    lines = [header, "-" * len(header)]
    for row in rows:
        res = ",".join(str(r) for r in row["resolutions"])
        lines.append(
            f"{row['strategy']:<16}{str(row['evolve']):<8}{res:<16}"
            f"{row.get('rsres_miou', float('nan')):>12.2f}{row.get('rsrec_miou', float('nan')):>12.2f}"
        )
    text_path = out_dir / "ablation.txt"
    text_path.write_text("\n".join(lines) + "\n")
    return rows, json_path, text_path
