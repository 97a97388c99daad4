"""Command-line client for the grounding service.

The CLI is a thin HTTP client: with ``--server`` it talks to a running
service, otherwise it mounts the FastAPI app in-process. Exit codes:
0 success, 1 usage error, 2 data error, 3 internal failure.
"""

from __future__ import annotations

import json
import sys

import click
import httpx


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _post(server: str | None, path: str, payload: dict) -> dict:
    with _client(server) as client:
        resp = client.post(path, json=payload)
    if resp.status_code == 200:
        return resp.json()
    try:
        detail = resp.json().get("detail", {})
    except json.JSONDecodeError:
        detail = {"message": resp.text}
    message = detail.get("message", str(detail)) if isinstance(detail, dict) else str(detail)
    if isinstance(detail, dict):
        for key in ("sample_id", "stage"):
            if detail.get(key):
                message += f" [{key}={detail[key]}]"
    click.echo(f"error: {message}", err=True)
    if resp.status_code == 400:
        sys.exit(1)
    if resp.status_code == 422:
        sys.exit(2)
    sys.exit(3)


_CONFIG_OPTIONS = [
    click.option("--strategy", default="similarity",
                 type=click.Choice(["similarity", "anchor", "multiplication", "exponentiation"])),
    click.option("--gamma", default=2.0, show_default=True, help="Exponent for the exponentiation strategy."),
    click.option("--anchor-count", default=7, show_default=True),
    click.option("--similarity-axis", default="column", type=click.Choice(["column", "row"])),
    click.option("-k", "--seeds", "k", default=7, show_default=True, help="Seed count for region growth."),
    click.option("--tau", default=0.3, show_default=True, help="Growth response threshold."),
    click.option("--alpha", default=0.4, show_default=True, help="Binarization threshold."),
    click.option("--seed-source", default="interaction_map", type=click.Choice(["interaction_map", "cross_map"])),
    click.option("--stage-order", default="ofe", type=click.Choice(["ofe", "oef"])),
    click.option("--target-resolution", default=None, type=int),
    click.option("--no-evolve", is_flag=True, help="Skip the seeding/growth stage (ablation)."),
    click.option("--box-mode", default="largest_component", type=click.Choice(["largest_component", "tight_all"])),
    click.option("--config", "config_file", type=click.Path(exists=True),
                 help="JSON file with option defaults; flags override it."),
]


def _with_config_options(fn):
    for opt in reversed(_CONFIG_OPTIONS):
        fn = opt(fn)
    return fn


def _options_payload(ctx: click.Context, kwargs: dict) -> dict:
    opts = {
        "strategy": kwargs["strategy"],
        "gamma": kwargs["gamma"],
        "anchor_count": kwargs["anchor_count"],
        "similarity_axis": kwargs["similarity_axis"],
        "k": kwargs["k"],
        "tau": kwargs["tau"],
        "alpha": kwargs["alpha"],
        "seed_source": kwargs["seed_source"],
        "stage_order": kwargs["stage_order"],
        "target_resolution": kwargs["target_resolution"],
        "use_evolve": not kwargs["no_evolve"],
        "box_mode": kwargs["box_mode"],
    }
    if kwargs.get("config_file"):
        try:
            file_opts = json.loads(open(kwargs["config_file"]).read())
        except json.JSONDecodeError as exc:
            click.echo(f"error: bad config file: {exc}", err=True)
            sys.exit(1)
        flag_names = {
            "strategy": "strategy", "gamma": "gamma", "anchor_count": "anchor_count",
            "similarity_axis": "similarity_axis", "k": "k", "tau": "tau", "alpha": "alpha",
            "seed_source": "seed_source", "stage_order": "stage_order",
            "target_resolution": "target_resolution", "use_evolve": "use_evolve",
            "box_mode": "box_mode",
        }
        for key, value in file_opts.items():
            if key not in flag_names:
                click.echo(f"error: unknown config key '{key}'", err=True)
                sys.exit(1)
            # a flag given explicitly on the command line wins over the file
            src = ctx.get_parameter_source(
                "no_evolve" if key == "use_evolve" else ("k" if key == "k" else key)
            )
            if src is not None and src.name != "DEFAULT":
                continue
            opts[key] = value
    return opts


@click.group()
@click.option("--server", default=None, help="Base URL of a running service; default runs in-process.")
@click.pass_context
def main(ctx: click.Context, server: str | None):
    """Grounding pipeline client: single runs, evaluation, ablations, fixtures."""
    ctx.obj = server


@main.command()
@click.argument("manifest", type=click.Path())
@click.option("-o", "--out-dir", required=True, type=click.Path())
@click.option("--heatmaps", is_flag=True, help="Also write stage heatmap PNGs.")
@_with_config_options
@click.pass_context
def run(ctx: click.Context, manifest: str, out_dir: str, heatmaps: bool, **kwargs):
    """Run the pipeline on one sample manifest."""
    payload = {
        "manifest_path": manifest,
        "out_dir": out_dir,
        "options": _options_payload(ctx, kwargs),
        "heatmaps": heatmaps,
    }
    result = _post(ctx.obj, "/run", payload)
    click.echo(json.dumps(result, indent=2, sort_keys=True))


@main.command()
@click.argument("dataset_dir", type=click.Path())
@click.option("-o", "--out-dir", required=True, type=click.Path())
@click.option("--jobs", default=1, show_default=True)
@click.option("--report-name", default="report", show_default=True)
@click.option("--refine-boxes-out", default=None, type=click.Path(),
              help="Write box prompts for the external mask refiner.")
@click.option("--refined-masks-in", default=None, type=click.Path(),
              help="Directory of refined masks to re-score.")
@_with_config_options
@click.pass_context
def eval(ctx: click.Context, dataset_dir: str, out_dir: str, jobs: int, report_name: str,
         refine_boxes_out: str | None, refined_masks_in: str | None, **kwargs):
    """Evaluate every sample under DATASET_DIR and write metric reports."""
    payload = {
        "dataset_dir": dataset_dir,
        "out_dir": out_dir,
        "options": _options_payload(ctx, kwargs),
        "jobs": jobs,
        "report_name": report_name,
        "refine_boxes_out": refine_boxes_out,
        "refined_masks_in": refined_masks_in,
    }
    result = _post(ctx.obj, "/eval", payload)
    click.echo(open(result["report_text_path"]).read(), nl=False)


@main.command()
@click.argument("dataset_dir", type=click.Path())
@click.option("-o", "--out-dir", required=True, type=click.Path())
@click.option("--jobs", default=1, show_default=True)
@click.pass_context
def ablate(ctx: click.Context, dataset_dir: str, out_dir: str, jobs: int):
    """Sweep interaction strategies, evolve on/off and resolution subsets."""
    result = _post(ctx.obj, "/ablate", {"dataset_dir": dataset_dir, "out_dir": out_dir, "jobs": jobs})
    click.echo(open(result["text_path"]).read(), nl=False)


@main.command()
@click.option("-o", "--out-dir", required=True, type=click.Path())
@click.option("--count", default=50, show_default=True)
@click.option("--base-seed", default=0, show_default=True)
@click.option("--grid", default=64, show_default=True)
@click.option("--resolutions", default="32,64", show_default=True)
@click.option("--noise-level", default=0.02, show_default=True)
@click.pass_context
def fixtures(ctx: click.Context, out_dir: str, count: int, base_seed: int, grid: int,
             resolutions: str, noise_level: float):
    """Generate the synthetic fixture suite."""
    payload = {
        "out_dir": out_dir,
        "count": count,
        "base_seed": base_seed,
        "grid": grid,
        "resolutions": [int(r) for r in resolutions.split(",")],
        "noise_level": noise_level,
    }
    result = _post(ctx.obj, "/fixtures", payload)
    click.echo(f"wrote {len(result['manifest_paths'])} fixture samples under {out_dir}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host: str, port: int):
    """Start the grounding service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
