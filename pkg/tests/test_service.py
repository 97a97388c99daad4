import json
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from attnground import attnio
from attnground.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def _first_manifest(suite: Path) -> Path:
    return sorted(suite.glob("*/manifest.json"))[0]


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok"}


def test_run_writes_mask_and_box(client, small_suite_dir, tmp_path):
    manifest = _first_manifest(small_suite_dir)
    resp = client.post(
        "/run",
        json={"manifest_path": str(manifest), "out_dir": str(tmp_path), "heatmaps": True},
    )
    assert resp.status_code == 200
    body = resp.json()
    mask = attnio.read_mask_png(Path(body["mask_path"]))
    assert mask.any()
    assert body["mask_foreground"] == int(mask.sum())
    box = json.loads(Path(body["box_path"]).read_text())
    assert body["box"] == box
    x1, y1, x2, y2 = box
    assert 0 <= x1 < x2 and 0 <= y1 < y2
    assert body["heatmap_paths"]
    for p in body["heatmap_paths"].values():
        assert Path(p).exists()


def test_run_matches_ground_truth_reasonably(client, small_suite_dir, tmp_path):
    manifest = _first_manifest(small_suite_dir)
    resp = client.post(
        "/run", json={"manifest_path": str(manifest), "out_dir": str(tmp_path)}
    )
    body = resp.json()
    pred = attnio.read_mask_png(Path(body["mask_path"]))
    gt = attnio.read_mask_png(manifest.parent / "gt_mask.png")
    inter = np.logical_and(pred, gt).sum()
    union = np.logical_or(pred, gt).sum()
    assert inter / union >= 0.8


def test_run_bad_option_is_400(client, small_suite_dir, tmp_path):
    manifest = _first_manifest(small_suite_dir)
    resp = client.post(
        "/run",
        json={
            "manifest_path": str(manifest),
            "out_dir": str(tmp_path),
            "options": {"tau": 2.0},
        },
    )
    assert resp.status_code == 400
    assert "tau" in resp.json()["detail"]["message"]


def test_run_unknown_strategy_is_400(client, small_suite_dir, tmp_path):
    manifest = _first_manifest(small_suite_dir)
    resp = client.post(
        "/run",
        json={
            "manifest_path": str(manifest),
            "out_dir": str(tmp_path),
            "options": {"strategy": "telepathy"},
        },
    )
    assert resp.status_code == 400


def test_run_corrupt_tensor_is_422(client, small_suite_dir, tmp_path):
    src = _first_manifest(small_suite_dir).parent
    bad = tmp_path / "bad_sample"
    bad.mkdir()
    for f in src.iterdir():
        (bad / f.name).write_bytes(f.read_bytes())
    (bad / "cross_trace.npy").write_bytes(b"\x93NUMPY garbage")
    resp = client.post(
        "/run",
        json={"manifest_path": str(bad / "manifest.json"), "out_dir": str(tmp_path / "out")},
    )
    assert resp.status_code == 422
    detail = resp.json()["detail"]
    assert detail["sample_id"]


def test_eval_small_suite(client, small_suite_dir, tmp_path):
    resp = client.post(
        "/eval",
        json={"dataset_dir": str(small_suite_dir), "out_dir": str(tmp_path), "jobs": 2},
    )
    assert resp.status_code == 200
    body = resp.json()
    report = body["report"]
    assert set(report) >= {"rsres", "rsrec", "rsrec_tight_all"}
    assert report["rsres"]["n_samples"] == 6
    assert report["rsres"]["miou"] > 50.0
    on_disk = json.loads(Path(body["report_json_path"]).read_text())
    assert on_disk == report
    assert Path(body["report_text_path"]).read_text().strip()


def test_eval_missing_dataset_is_400(client, tmp_path):
    resp = client.post(
        "/eval", json={"dataset_dir": str(tmp_path / "nope"), "out_dir": str(tmp_path)}
    )
    assert resp.status_code == 400


def test_eval_refine_round_trip(client, small_suite_dir, tmp_path):
    boxes_path = tmp_path / "boxes.json"
    resp = client.post(
        "/eval",
        json={
            "dataset_dir": str(small_suite_dir),
            "out_dir": str(tmp_path / "first"),
            "refine_boxes_out": str(boxes_path),
        },
    )
    assert resp.status_code == 200
    prompts = json.loads(boxes_path.read_text())
    assert len(prompts) == 6
    # stand-in refiner: rasterize each prompt box into a mask
    masks_dir = tmp_path / "refined"
    masks_dir.mkdir()
    for entry in prompts:
        h, w = entry["image_size"]
        grid = np.zeros((h, w), dtype=bool)
        if entry["box"] is not None:
            x1, y1, x2, y2 = entry["box"]
            grid[y1:y2, x1:x2] = True
        attnio.write_mask_png(grid, masks_dir / f"{entry['sample_id']}.png")
    resp = client.post(
        "/eval",
        json={
            "dataset_dir": str(small_suite_dir),
            "out_dir": str(tmp_path / "second"),
            "refined_masks_in": str(masks_dir),
        },
    )
    assert resp.status_code == 200
    assert "rsres_refined" in resp.json()["report"]


def test_fixtures_endpoint(client, tmp_path):
    resp = client.post(
        "/fixtures",
        json={"out_dir": str(tmp_path), "count": 2, "base_seed": 5, "grid": 32,
              "resolutions": [16, 32]},
    )
    assert resp.status_code == 200
    paths = resp.json()["manifest_paths"]
    assert len(paths) == 2
    for p in paths:
        trace, stack, gt = attnio.load_sample(Path(p))
        assert gt is not None
        assert stack.resolutions == (16, 32)


def test_ablate_endpoint(client, small_suite_dir, tmp_path):
    resp = client.post(
        "/ablate", json={"dataset_dir": str(small_suite_dir), "out_dir": str(tmp_path), "jobs": 4}
    )
    assert resp.status_code == 200
    body = resp.json()
    rows = body["rows"]
    # 4 strategies x evolve on/off x 3 resolution subsets
    assert len(rows) == 4 * 2 * 3
    assert Path(body["json_path"]).exists() and Path(body["text_path"]).exists()
