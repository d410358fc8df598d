"""UI-exported seed files drive the CLI and service to identical results."""

import json
import math
import os
import subprocess
import sys
import time

import pytest
from fastapi.testclient import TestClient

from elastipath.fileio import read_seeds, write_image, write_json
from elastipath.service import create_app

from fixtures import circle_image, circle_seed

GOLDEN = os.path.join(os.path.dirname(__file__), "..", "frontend", "tests",
                      "golden_seeds.json")


def test_ui_golden_export_parses_as_cli_seed_file():
    doc = read_seeds(GOLDEN)
    assert [p["x"] for p in doc["points"]] == [64, 64.5, 12]
    assert doc["points"][1]["theta"] == math.pi
    assert doc["points"][2]["theta"] is None


def test_ui_exported_seeds_cli_service_parity(tmp_path):
    """The same seed values sent through the UI's export path (CLI) and its
    API path (service) yield byte-identical result documents."""
    r, center = 14.0, (32.0, 32.0)
    img = circle_image(64, 64, [center], r)
    seeds = [circle_seed(center, r, 0.0), circle_seed(center, r, math.pi)]
    params = {
        "grid": {"n_theta": 36},
        "metric": {"kind": "data_driven_finsler_elastica", "lambda": 30.0, "alpha": 30.0},
        "features": {"kind": "edge", "sigma": 2.0, "order": 5, "eta": 10.0, "p": 2.0},
    }

    # UI export format (what frontend/src/seeds.ts emits)
    ui_export = json.dumps(
        {"points": [{"x": s[0], "y": s[1], "theta": s[2]} for s in seeds],
         "params": {}}, indent=2) + "\n"
    (tmp_path / "seeds.json").write_text(ui_export)
    write_image(tmp_path / "img.png", img)
    write_json(tmp_path / "config.json", dict(params) | {
        "image": "img.png",
        "application": {"mode": "contour", "seeds": "seeds.json"},
        "output": {"dir": "out"},
    })
    proc = subprocess.run(
        [sys.executable, "-m", "elastipath.cli", "contour", "--config", "config.json"],
        capture_output=True, cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr.decode()

    client = TestClient(create_app(max_workers=1))
    import io
    import numpy as np
    from PIL import Image as PILImage
    buf = io.BytesIO()
    PILImage.fromarray((np.clip(img.data, 0, 1).T * 255).astype(np.uint8)).save(
        buf, format="PNG")
    res = client.post("/sessions",
                      files={"image": ("img.png", buf.getvalue(), "image/png")},
                      data={"params": json.dumps(params)})
    sid = res.json()["session_id"]
    for _ in range(600):
        if client.get(f"/sessions/{sid}").json()["status"] != "computing":
            break
        time.sleep(0.05)
    client.put(f"/sessions/{sid}/seeds", json={
        "points": [{"x": s[0], "y": s[1], "theta": s[2]} for s in seeds]})
    job = client.post(f"/sessions/{sid}/run", json={"mode": "contour"}).json()["job_id"]
    for _ in range(1200):
        r2 = client.get(f"/sessions/{sid}/results/{job}")
        if r2.status_code != 202:
            break
        time.sleep(0.1)
    assert r2.status_code == 200
    assert proc.stdout == r2.content
