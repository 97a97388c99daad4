"""Pydantic request/response models for the grounding service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class PipelineOptions(BaseModel):
    """Every pipeline hyperparameter, defaulting to the shipped configuration."""

    strategy: str = "similarity"
    gamma: float = 2.0
    anchor_count: int = 7
    similarity_axis: str = "column"
    k: int = 7
    tau: float = 0.3
    alpha: float = 0.4
    seed_source: str = "interaction_map"
    stage_order: str = "ofe"
    target_resolution: int | None = None
    use_evolve: bool = True
    box_mode: str = "largest_component"


class RunRequest(BaseModel):
    manifest_path: str
    out_dir: str
    options: PipelineOptions = Field(default_factory=PipelineOptions)
    heatmaps: bool = False


class RunResponse(BaseModel):
    sample_id: str
    mask_path: str
    box_path: str
    heatmap_paths: dict[str, str]
    box: list[int] | None
    mask_foreground: int


class EvalRequest(BaseModel):
    dataset_dir: str
    out_dir: str
    options: PipelineOptions = Field(default_factory=PipelineOptions)
    jobs: int = 1
    report_name: str = "report"
    refine_boxes_out: str | None = None
    refined_masks_in: str | None = None


class EvalResponse(BaseModel):
    report: dict
    report_json_path: str
    report_text_path: str


class AblateRequest(BaseModel):
    dataset_dir: str
    out_dir: str
    jobs: int = 1


class AblateResponse(BaseModel):
    rows: list[dict]
    json_path: str
    text_path: str


class FixturesRequest(BaseModel):
    out_dir: str
    count: int = 50
    base_seed: int = 0
    grid: int = 64
    resolutions: list[int] = [32, 64]
    noise_level: float = 0.02


class FixturesResponse(BaseModel):
    manifest_paths: list[str]


class ErrorBody(BaseModel):
    message: str
    sample_id: str | None = None
    stage: str | None = None
