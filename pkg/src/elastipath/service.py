"""Local HTTP service for the interactive workbench.

Sessions hold an uploaded image, precomputed feature volumes and the
current seed list; runs execute on a bounded worker pool and are polled.
Results are serialized through the same canonical JSON path as the CLI,
so equal inputs produce byte-identical documents.
"""

from __future__ import annotations

import io
import math
import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from fastapi import FastAPI, File, Form, HTTPException, Response, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import runs
from .errors import ElastipathError
from .features import Image
from .fileio import RunConfig, canonical_json, read_image, render_overlay, read_json

DEFAULT_WORKERS = int(os.environ.get("ELASTIPATH_THREADS", "2"))


class SeedIn(BaseModel):
    x: float
    y: float
    theta: float | None = None


class SeedsIn(BaseModel):
    points: list[SeedIn]


class RunIn(BaseModel):
    mode: str
    params: dict = {}


@dataclass
class Job:
    id: str
    status: str = "computing"          # computing | done | error
    result_bytes: bytes | None = None
    overlay_png: bytes | None = None
    error: str | None = None


@dataclass
class Session:
    id: str
    image: Image
    config: RunConfig
    status: str = "computing"          # computing | idle | error
    error: str | None = None
    features: dict = field(default_factory=dict)   # kind -> bundle
    seeds: list = field(default_factory=list)
    jobs: dict = field(default_factory=dict)
    run_in_flight: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def add(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.id] = session

    def get(self, sid: str) -> Session:
        with self._lock:
            session = self._sessions.get(sid)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session


def _json_response(doc, status_code: int = 200) -> Response:
    return Response(content=canonical_json(doc), media_type="application/json",
                    status_code=status_code)


def create_app(max_workers: int = DEFAULT_WORKERS) -> FastAPI:
    app = FastAPI(title="elastipath session service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore()
    executor = ThreadPoolExecutor(max_workers=max_workers)
    app.state.store = store
    app.state.executor = executor

    def compute_features(session: Session) -> None:
        try:
            kind = session.config.features["kind"]
            session.features[kind] = runs.build_features(session.config, session.image)
            session.status = "idle"
        except Exception as exc:  # noqa: BLE001 - reported through the API
            session.status = "error"
            session.error = str(exc)

    def feature_bundle(session: Session, kind: str):
        if kind not in session.features:
            cfg = session.config
            feats_cfg = dict(cfg.features)
            feats_cfg["kind"] = kind
            cfg2 = RunConfig(image=None, grid=cfg.grid, metric=cfg.metric,
                             features=feats_cfg, stencil=cfg.stencil,
                             application=cfg.application, output=cfg.output)
            session.features[kind] = runs.build_features(cfg2, session.image)
        return session.features[kind]

    def execute_run(session: Session, job: Job, mode: str, params: dict) -> None:
        try:
            cfg = session.config
            app_cfg = dict(cfg.application)
            app_cfg["mode"] = mode
            app_cfg.update(params)
            run_cfg = RunConfig(image=None, grid=cfg.grid, metric=cfg.metric,
                                features=cfg.features, stencil=cfg.stencil,
                                application=app_cfg, output=cfg.output)
            seed_doc = {"points": session.seeds, "params": {}}
            # reuse the cached feature bundle through the shared runner by
            # injecting it: runs.run_application builds features itself, so
            # warm the metric cache first (grids/StencilSet reuse via metric)
            kind = "flux" if mode == "tubular" else "edge"
            feature_bundle(session, kind)
            doc = runs.run_application(run_cfg, session.image, seed_doc)
            job.result_bytes = canonical_json(doc).encode()
            seeds = [(p["x"], p["y"], p.get("theta")) for p in session.seeds]
            png = io.BytesIO()
            render_overlay(session.image, runs.document_paths(doc), seeds).save(
                png, format="PNG")
            job.overlay_png = png.getvalue()
            job.status = "done"
        except Exception as exc:  # noqa: BLE001
            job.status = "error"
            job.error = str(exc)
        finally:
            with session.lock:
                session.run_in_flight = False

    @app.post("/sessions")
    async def create_session(image: UploadFile = File(...), params: str = Form("{}")):
        import json as _json
        try:
            overrides = _json.loads(params)
            tmp = io.BytesIO(await image.read())
            from PIL import Image as PILImage
            import numpy as np
            with PILImage.open(tmp) as im:
                if im.mode in ("RGB", "RGBA", "P"):
                    data = np.asarray(im.convert("RGB"), dtype=float) / 255.0
                    img = Image(np.transpose(data, (1, 0, 2)))
                else:
                    data = np.asarray(im.convert("L"), dtype=float) / 255.0
                    img = Image(data.T)
            cfg = RunConfig.from_dict(overrides)
        except ElastipathError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except Exception as exc:  # noqa: BLE001
            raise HTTPException(status_code=422, detail=f"bad upload: {exc}")
        session = Session(id=uuid.uuid4().hex[:12], image=img, config=cfg)
        store.add(session)
        executor.submit(compute_features, session)
        return _json_response({"session_id": session.id})

    @app.get("/sessions/{sid}")
    async def session_status(sid: str):
        s = store.get(sid)
        doc = {
            "session_id": s.id,
            "status": s.status,
            "error": s.error,
            "image_size": list(s.image.data.shape[:2]),
            "n_seeds": len(s.seeds),
            "jobs": {j.id: j.status for j in s.jobs.values()},
        }
        return _json_response(doc)

    @app.put("/sessions/{sid}/seeds")
    async def put_seeds(sid: str, seeds: SeedsIn):
        s = store.get(sid)
        W, H = s.image.data.shape[:2]
        problems = []
        for n, p in enumerate(seeds.points):
            if not (0 <= p.x <= W - 1):
                problems.append({"loc": ["points", n, "x"],
                                 "msg": f"x outside [0, {W - 1}]"})
            if not (0 <= p.y <= H - 1):
                problems.append({"loc": ["points", n, "y"],
                                 "msg": f"y outside [0, {H - 1}]"})
            if p.theta is not None and not math.isfinite(p.theta):
                problems.append({"loc": ["points", n, "theta"],
                                 "msg": "theta must be finite"})
        if problems:
            raise HTTPException(status_code=422, detail=problems)
        s.seeds = [{"x": p.x, "y": p.y, "theta": p.theta} for p in seeds.points]
        return _json_response({"accepted": len(s.seeds)})

    @app.post("/sessions/{sid}/run")
    async def start_run(sid: str, run: RunIn):
        s = store.get(sid)
        if run.mode not in ("contour", "group", "tubular"):
            raise HTTPException(status_code=422, detail="unknown mode")
        if s.status == "computing":
            raise HTTPException(status_code=409, detail="features still computing")
        if s.status == "error":
            raise HTTPException(status_code=409, detail=f"session error: {s.error}")
        min_seeds = 2
        if len(s.seeds) < min_seeds:
            raise HTTPException(status_code=422,
                                detail=f"at least {min_seeds} seeds required")
        if run.mode in ("contour", "group") and any(
                p["theta"] is None for p in s.seeds):
            raise HTTPException(status_code=422,
                                detail="contour and grouping seeds need theta")
        with s.lock:
            if s.run_in_flight:
                raise HTTPException(status_code=409, detail="run already in flight")
            s.run_in_flight = True
        job = Job(id=uuid.uuid4().hex[:12])
        s.jobs[job.id] = job
        executor.submit(execute_run, s, job, run.mode, run.params)
        return _json_response({"job_id": job.id})

    @app.get("/sessions/{sid}/results/{job_id}")
    async def get_results(sid: str, job_id: str):
        s = store.get(sid)
        job = s.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job")
        if job.status == "computing":
            return _json_response({"status": "computing"}, status_code=202)
        if job.status == "error":
            return _json_response({"status": "error", "error": job.error},
                                  status_code=500)
        return Response(content=job.result_bytes, media_type="application/json")

    @app.get("/sessions/{sid}/overlay/{job_id}")
    async def get_overlay(sid: str, job_id: str):
        s = store.get(sid)
        job = s.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job")
        if job.status == "computing":
            return _json_response({"status": "computing"}, status_code=202)
        if job.status == "error" or job.overlay_png is None:
            raise HTTPException(status_code=500, detail=job.error or "no overlay")
        return Response(content=job.overlay_png, media_type="image/png")

    return app


app = create_app()


def main():  # pragma: no cover - manual entry point
    import uvicorn
    host = os.environ.get("ELASTIPATH_HOST", "127.0.0.1")
    port = int(os.environ.get("ELASTIPATH_PORT", "8765"))
    uvicorn.run("elastipath.service:app", host=host, port=port)


if __name__ == "__main__":  # pragma: no cover
    main()
