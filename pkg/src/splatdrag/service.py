"""HTTP service consumed by the drag-annotator UI.

Holds one loaded asset, serves its rig renders (PNG images, raw float32
depth with a one-line JSON header), validates posted drag sets against the
rendered depth, and executes pipeline runs one at a time on a FIFO worker.
"""

from __future__ import annotations

import io
import logging
import queue
import threading
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, HTMLResponse, Response
from pydantic import BaseModel, Field

from .core.drags import DragSet, save_dragset
from .core.errors import ValidationError
from .core.images import encode_float_payload
from .dragproject import project_pairs
from .pipeline import RunConfig, RunManifest, load_asset, run_pipeline
from .render import render_rig

log = logging.getLogger(__name__)


class DragPairModel(BaseModel):
    source: list[float] = Field(min_length=3, max_length=3)
    target: list[float] = Field(min_length=3, max_length=3)


class DragSetModel(BaseModel):
    pairs: list[DragPairModel] = Field(min_length=1)


class RunRequestModel(BaseModel):
    drags_id: str
    overrides: dict[str, Any] = Field(default_factory=dict)


@dataclass
class Job:
    id: str
    config: RunConfig
    status: str = "queued"
    error: str | None = None


@dataclass
class ServiceState:
    asset_path: Path
    artifact_root: Path
    run_defaults: dict[str, Any] = field(default_factory=dict)
    jobs: dict[str, Job] = field(default_factory=dict)
    drag_files: dict[str, Path] = field(default_factory=dict)

    def __post_init__(self):
        self.artifact_root.mkdir(parents=True, exist_ok=True)
        self.asset = load_asset(self.asset_path)
        reserved = {"asset", "drags", "out_dir"}
        cfg = RunConfig(asset=str(self.asset_path), drags="unused", out_dir="unused",
                        **{k: v for k, v in self.run_defaults.items()
                           if k in RunConfig.__dataclass_fields__ and k not in reserved})
        self.rig = cfg.rig()
        self.views = render_rig(self.asset, self.rig)
        self.queue: queue.Queue[str] = queue.Queue()
        self.worker = threading.Thread(target=self._work, daemon=True)
        self.worker.start()

    def _work(self):
        while True:
            job_id = self.queue.get()
            if job_id is None:
                self.queue.task_done()
                return
            job = self.jobs[job_id]
            job.status = "running"
            try:
                run_pipeline(job.config)
                job.status = "complete"
            except Exception as exc:  # noqa: BLE001 - surfaced via the API
                job.status = "failed"
                job.error = f"{type(exc).__name__}: {exc}"
                log.error("run %s failed: %s", job_id, exc)
            finally:
                self.queue.task_done()

    def shutdown(self):
        """Join the worker; leaving it daemonized risks aborting interpreter exit."""
        if self.worker.is_alive():
            self.queue.put(None)
            self.worker.join(timeout=30)


def create_app(
    asset_path: str | Path,
    artifact_root: str | Path,
    run_defaults: dict[str, Any] | None = None,
) -> FastAPI:
    state = ServiceState(
        asset_path=Path(asset_path),
        artifact_root=Path(artifact_root),
        run_defaults=run_defaults or {},
    )

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        state.shutdown()

    app = FastAPI(title="splatdrag service", lifespan=lifespan)
    app.state.service = state

    png_cache: dict[int, bytes] = {}
    depth_cache: dict[int, bytes] = {}

    @app.get("/asset/views")
    def asset_views():
        return {
            "resolution": state.rig.resolution,
            "background": state.rig.background,
            "views": [
                {
                    "index": i,
                    "azimuth": state.rig.azimuths[i],
                    "elevation": state.rig.elevation,
                    "distance": state.rig.distance,
                    "fov_y": state.rig.fov_y,
                    "image": f"/asset/views/{i}/image.png",
                    "depth": f"/asset/views/{i}/depth.bin",
                }
                for i in range(4)
            ],
        }

    @app.get("/asset/views/{index}/image.png")
    def view_image(index: int):
        if not 0 <= index < 4:
            raise HTTPException(404, "view index out of range")
        if index not in png_cache:
            buf = io.BytesIO()
            arr = np.clip(state.views.rgb[index] * 255.0, 0, 255).round().astype(np.uint8)
            from PIL import Image

            Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
            png_cache[index] = buf.getvalue()
        return Response(png_cache[index], media_type="image/png")

    @app.get("/asset/views/{index}/depth.bin")
    def view_depth(index: int):
        if not 0 <= index < 4:
            raise HTTPException(404, "view index out of range")
        if index not in depth_cache:
            # a pick is only meaningful where the surface is solid: mask the
            # soft splat tails so finite depth == valid foreground pick
            masked = np.where(
                state.views.alpha[index] >= 0.5, state.views.depth[index], np.inf
            ).astype(np.float32)
            depth_cache[index] = encode_float_payload(masked)
        return Response(depth_cache[index], media_type="application/octet-stream")

    @app.post("/drags")
    def post_drags(body: DragSetModel):
        try:
            drags = DragSet(
                sources=[p.source for p in body.pairs],
                targets=[p.target for p in body.pairs],
            )
            drags = project_pairs(drags, state.views, state.rig)
        except ValidationError as exc:
            raise HTTPException(400, str(exc)) from exc
        drag_id = uuid.uuid4().hex[:12]
        path = state.artifact_root / f"drags_{drag_id}.json"
        save_dragset(drags, path)
        state.drag_files[drag_id] = path
        return {"id": drag_id, "drags": drags.to_json()}

    @app.post("/runs", status_code=201)
    def post_run(body: RunRequestModel):
        if body.drags_id not in state.drag_files:
            raise HTTPException(404, f"unknown drags id {body.drags_id!r}")
        run_id = uuid.uuid4().hex[:12]
        fields = dict(state.run_defaults)
        fields.update(body.overrides)
        known = set(RunConfig.__dataclass_fields__)
        unknown = set(fields) - known
        if unknown:
            raise HTTPException(400, f"unknown config fields: {sorted(unknown)}")
        try:
            config = RunConfig(
                asset=str(state.asset_path),
                drags=str(state.drag_files[body.drags_id]),
                out_dir=str(state.artifact_root / "runs" / run_id),
                **{k: v for k, v in fields.items() if k not in ("asset", "drags", "out_dir")},
            )
            config.validate()
        except (ValidationError, TypeError) as exc:
            raise HTTPException(400, str(exc)) from exc
        job = Job(id=run_id, config=config)
        state.jobs[run_id] = job
        state.queue.put(run_id)
        return {"id": run_id, "status": job.status}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        job = state.jobs.get(run_id)
        if job is None:
            raise HTTPException(404, f"unknown run id {run_id!r}")
        manifest = RunManifest.load(job.config.out_dir)
        return {
            "id": run_id,
            "status": job.status,
            "error": job.error,
            "manifest": None if manifest is None else {
                "config": manifest.config,
                "stages": manifest.stages,
            },
        }

    @app.get("/runs/{run_id}/artifacts/{name:path}")
    def get_artifact(run_id: str, name: str):
        job = state.jobs.get(run_id)
        if job is None:
            raise HTTPException(404, f"unknown run id {run_id!r}")
        root = Path(job.config.out_dir).resolve()
        target = (root / name).resolve()
        if root not in target.parents and target != root:
            raise HTTPException(400, "artifact path escapes the run directory")
        if not target.is_file():
            raise HTTPException(404, f"no artifact {name!r}")
        return FileResponse(target)

    @app.get("/", response_class=HTMLResponse)
    def index():
        ui = Path(__file__).resolve().parent / "static" / "annotator.html"
        if ui.exists():
            return ui.read_text(encoding="utf-8")
        return "<html><body><p>splatdrag service; annotator UI not bundled.</p></body></html>"

    @app.get("/static/{name}")
    def static_file(name: str):
        base = Path(__file__).resolve().parent / "static"
        target = (base / name).resolve()
        if base not in target.parents or not target.is_file():
            raise HTTPException(404, "not found")
        media = "application/javascript" if name.endswith(".js") else "text/plain"
        return Response(target.read_bytes(), media_type=media)

    return app


def serve(
    asset_path: str | Path,
    artifact_root: str | Path,
    port: int = 8000,
    host: str = "127.0.0.1",
    run_defaults: dict[str, Any] | None = None,
) -> None:
    import uvicorn

    app = create_app(asset_path, artifact_root, run_defaults)
    uvicorn.run(app, host=host, port=port, log_level="warning")
