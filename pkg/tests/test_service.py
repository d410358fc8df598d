import io
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from elastipath.fileio import seeds_document, write_image, write_json
from elastipath.service import create_app

from fixtures import ellipse_image, ellipse_seed

A, B, CENTER = 24.0, 16.0, (32.0, 32.0)
PARAMS = {
    "grid": {"n_theta": 36},
    "metric": {"kind": "data_driven_finsler_elastica", "lambda": 30.0, "alpha": 30.0},
    "features": {"kind": "edge", "sigma": 2.0, "order": 5, "eta": 10.0, "p": 2.0},
}


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(max_workers=2))


def png_bytes(img) -> bytes:
    buf = io.BytesIO()
    from PIL import Image as PILImage
    arr = (np.clip(img.data, 0, 1).T * 255).astype(np.uint8)
    PILImage.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def make_session(client, params=PARAMS):
    img = ellipse_image(64, 64, A, B, CENTER)
    r = client.post("/sessions",
                    files={"image": ("img.png", png_bytes(img), "image/png")},
                    data={"params": json.dumps(params)})
    assert r.status_code == 200, r.text
    sid = r.json()["session_id"]
    for _ in range(300):
        st = client.get(f"/sessions/{sid}").json()
        if st["status"] != "computing":
            break
        time.sleep(0.05)
    assert st["status"] == "idle", st
    return sid


def seed_points():
    p1 = ellipse_seed(A, B, CENTER, 0.0)
    p2 = ellipse_seed(A, B, CENTER, math.pi)
    return [{"x": p1[0], "y": p1[1], "theta": p1[2]},
            {"x": p2[0], "y": p2[1], "theta": p2[2]}]


def wait_job(client, sid, job, timeout=120.0):
    t0 = time.time()
    while time.time() - t0 < timeout:
        r = client.get(f"/sessions/{sid}/results/{job}")
        if r.status_code != 202:
            return r
        time.sleep(0.1)
    raise TimeoutError("job did not finish")


def test_unknown_session_404(client):
    assert client.get("/sessions/nope").status_code == 404


def test_seed_validation_422(client):
    sid = make_session(client)
    r = client.put(f"/sessions/{sid}/seeds",
                   json={"points": [{"x": 500.0, "y": 5.0, "theta": 0.0}]})
    assert r.status_code == 422
    detail = r.json()["detail"]
    assert any("x" in str(item["loc"]) for item in detail)


def test_run_with_one_seed_422(client):
    sid = make_session(client)
    r = client.put(f"/sessions/{sid}/seeds",
                   json={"points": [{"x": 10.0, "y": 10.0, "theta": 0.0}]})
    assert r.status_code == 200
    r = client.post(f"/sessions/{sid}/run", json={"mode": "contour"})
    assert r.status_code == 422


def test_contour_run_and_overlay(client):
    sid = make_session(client)
    assert client.put(f"/sessions/{sid}/seeds",
                      json={"points": seed_points()}).status_code == 200
    r = client.post(f"/sessions/{sid}/run", json={"mode": "contour"})
    assert r.status_code == 200, r.text
    job = r.json()["job_id"]
    res = wait_job(client, sid, job)
    assert res.status_code == 200
    doc = res.json()
    assert doc["mode"] == "contour" and doc["closed"]
    ovl = client.get(f"/sessions/{sid}/overlay/{job}")
    assert ovl.status_code == 200
    assert ovl.content[:8] == b"\x89PNG\r\n\x1a\n"


def test_concurrent_second_run_409(client):
    sid = make_session(client)
    client.put(f"/sessions/{sid}/seeds", json={"points": seed_points()})
    r1 = client.post(f"/sessions/{sid}/run", json={"mode": "contour"})
    assert r1.status_code == 200
    r2 = client.post(f"/sessions/{sid}/run", json={"mode": "contour"})
    assert r2.status_code == 409
    wait_job(client, sid, r1.json()["job_id"])


def test_session_isolation(client):
    sid1 = make_session(client)
    sid2 = make_session(client)
    client.put(f"/sessions/{sid1}/seeds", json={"points": seed_points()})
    st1 = client.get(f"/sessions/{sid1}").json()
    st2 = client.get(f"/sessions/{sid2}").json()
    assert st1["n_seeds"] == 2
    assert st2["n_seeds"] == 0


def test_service_matches_cli_bytes(client, tmp_path):
    """Byte-identical result documents for identical inputs."""
    sid = make_session(client)
    client.put(f"/sessions/{sid}/seeds", json={"points": seed_points()})
    r = client.post(f"/sessions/{sid}/run", json={"mode": "contour"})
    job = r.json()["job_id"]
    service_bytes = wait_job(client, sid, job).content

    img = ellipse_image(64, 64, A, B, CENTER)
    write_image(tmp_path / "img.png", img)
    write_json(tmp_path / "seeds.json", seeds_document(
        [ellipse_seed(A, B, CENTER, 0.0), ellipse_seed(A, B, CENTER, math.pi)]))
    write_json(tmp_path / "config.json", dict(PARAMS) | {
        "image": "img.png",
        "application": {"mode": "contour", "seeds": "seeds.json"},
        "output": {"dir": "out"},
    })
    proc = subprocess.run(
        [sys.executable, "-m", "elastipath.cli", "contour", "--config", "config.json"],
        capture_output=True, cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr.decode()
    assert proc.stdout == service_bytes
