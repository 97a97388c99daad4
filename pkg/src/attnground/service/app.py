"""FastAPI service wrapping the grounding pipeline.

All paths in requests are interpreted on the host running the service; the
CLI talks to this app either in-process or over HTTP.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import harness, synth
from ..errors import DataError, UsageError
from ..evolve import EvolveConfig, PipelineConfig, SeedSource, StageOrder
from ..focus import InteractionConfig, SimilarityAxis, Strategy
from ..grounding import BoxMode
from .schemas import (
    AblateRequest,
    AblateResponse,
    EvalRequest,
    EvalResponse,
    FixturesRequest,
    FixturesResponse,
    PipelineOptions,
    RunRequest,
    RunResponse,
)


def build_config(opts: PipelineOptions) -> PipelineConfig:
    try:
        return PipelineConfig(
            interaction=InteractionConfig(
                strategy=Strategy(opts.strategy),
                gamma=opts.gamma,
                anchor_count=opts.anchor_count,
                similarity_axis=SimilarityAxis(opts.similarity_axis),
            ),
            evolve=EvolveConfig(
                k=opts.k, tau=opts.tau, alpha=opts.alpha, seed_source=SeedSource(opts.seed_source)
            ),
            stage_order=StageOrder(opts.stage_order),
            target_resolution=opts.target_resolution,
            use_evolve=opts.use_evolve,
        )
    except (ValueError, UsageError) as exc:
        raise HTTPException(status_code=400, detail={"message": str(exc)}) from exc


def _data_error(exc: DataError) -> HTTPException:
    return HTTPException(
        status_code=422,
        detail={"message": str(exc), "sample_id": exc.sample_id, "stage": exc.stage},
    )


def create_app() -> FastAPI:
    app = FastAPI(title="attnground", version="0.1.0")

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/run", response_model=RunResponse)
    def run(req: RunRequest) -> RunResponse:
        cfg = build_config(req.options)
        try:
            out = harness.run_sample(
                req.manifest_path,
                req.out_dir,
                cfg,
                box_mode=BoxMode(req.options.box_mode),
                heatmaps=req.heatmaps,
            )
        except DataError as exc:
            raise _data_error(exc)
        except UsageError as exc:
            raise HTTPException(status_code=400, detail={"message": str(exc)})
        return RunResponse(
            sample_id=out.sample_id,
            mask_path=str(out.mask_path),
            box_path=str(out.box_path),
            heatmap_paths={k: str(v) for k, v in out.heatmap_paths.items()},
            box=list(out.box.as_tuple()) if out.box else None,
            mask_foreground=out.mask_foreground,
        )

    @app.post("/eval", response_model=EvalResponse)
    def evaluate(req: EvalRequest) -> EvalResponse:
        cfg = build_config(req.options)
        try:
            report, json_path, text_path = harness.evaluate(
                req.dataset_dir,
                req.out_dir,
                cfg,
                jobs=req.jobs,
                refine_boxes_out=req.refine_boxes_out,
                refined_masks_in=req.refined_masks_in,
                report_name=req.report_name,
            )
        except DataError as exc:
            raise _data_error(exc)
        except UsageError as exc:
            raise HTTPException(status_code=400, detail={"message": str(exc)})
        return EvalResponse(
            report=report.as_dict(),
            report_json_path=str(json_path),
            report_text_path=str(text_path),
        )

    @app.post("/ablate", response_model=AblateResponse)
    def ablate(req: AblateRequest) -> AblateResponse:
        try:
            rows, json_path, text_path = harness.ablate(req.dataset_dir, req.out_dir, jobs=req.jobs)
        except DataError as exc:
            raise _data_error(exc)
        except UsageError as exc:
            raise HTTPException(status_code=400, detail={"message": str(exc)})
        return AblateResponse(rows=rows, json_path=str(json_path), text_path=str(text_path))

    @app.post("/fixtures", response_model=FixturesResponse)
    def fixtures(req: FixturesRequest) -> FixturesResponse:
        try:
            manifests = synth.make_suite(
                req.out_dir,
                count=req.count,
                base_seed=req.base_seed,
                grid=req.grid,
                resolutions=tuple(req.resolutions),
                noise_level=req.noise_level,
            )
        except UsageError as exc:
            raise HTTPException(status_code=400, detail={"message": str(exc)})
        return FixturesResponse(manifest_paths=[str(p) for p in manifests])

    return app


app = create_app()
