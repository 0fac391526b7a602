"""HTTP JSON API over the pipeline: jobs, scene revisions, edits, SVG, metrics."""

from __future__ import annotations

import threading
from collections import defaultdict
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field

from .errors import (ChatBackendError, DecorError, EditError,
                     InfeasibleEditError, InfeasibleLayoutError, MeshParseError,
                     NoSurfaceError, RetrievalError, StageExhaustedError)
from .metrics import metrics_report
from .pipeline import (EditOp, JobRequest, apply_edit, decorate, export_svg,
                       interpret_edit, persist_job)


class JobBody(BaseModel):
    prompt: str
    n_assets: int = Field(ge=1)
    mesh_path: str | None = None
    mesh_obj: str | None = None
    seed: int = 0
    params: dict = Field(default_factory=dict)


class EditBody(BaseModel):
    instruction: str | None = None
    ops: list[dict] | None = None


def _error_status(exc: Exception) -> int:
    if isinstance(exc, (InfeasibleLayoutError, InfeasibleEditError)):
        return 409
    if isinstance(exc, ChatBackendError):
        return 502
    if isinstance(exc, (StageExhaustedError, EditError, MeshParseError,
                        NoSurfaceError, RetrievalError, ValueError)):
        return 422
    return 500


def create_app(client=None, catalog=None, sidecar=None,
               jobs_dir: str | Path | None = None) -> FastAPI:
    if client is None:
        from .llm import RuleStubClient
        client = RuleStubClient()

    app = FastAPI(title="decorkit", version="0.1.0")
    scenes: dict[str, list] = {}       # scene id -> revision list
    locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
    app.state.scenes = scenes

    @app.exception_handler(DecorError)
    def _decor_error(_req: Request, exc: DecorError):
        return JSONResponse(status_code=_error_status(exc),
                            content={"error": {"type": type(exc).__name__,
                                               "message": str(exc)}})

    def _persist(job_id: str, scene, request=None):
        if jobs_dir is not None:
            persist_job(jobs_dir, job_id, scene, request=request,
                        revision=len(scenes[job_id]) - 1)

    @app.post("/jobs")
    def create_job(body: JobBody):
        request = JobRequest(prompt=body.prompt, n_assets=body.n_assets,
                             mesh_path=body.mesh_path, mesh_obj=body.mesh_obj,
                             seed=body.seed, params=body.params)
        scene = decorate(request, client, catalog=catalog, sidecar=sidecar)
        job_id = request.job_id()
        scenes[job_id] = [scene]
        _persist(job_id, scene, request=request)
        return {"job_id": job_id, "scene_id": job_id, "status": "done"}

    def _revisions(scene_id: str) -> list:
        if scene_id not in scenes:
            return []
        return scenes[scene_id]

    def _pick(scene_id: str, rev: int | None):
        revisions = _revisions(scene_id)
        if not revisions:
            return None, None
        if rev is None:
            rev = len(revisions) - 1
        if not 0 <= rev < len(revisions):
            return None, None
        return revisions[rev], rev

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        scene, _rev = _pick(job_id, None)
        if scene is None:
            return JSONResponse(status_code=404,
                                content={"error": {"type": "NotFound",
                                                   "message": f"no job {job_id}"}})
        return {"job_id": job_id, "scene_id": job_id, "status": "done",
                "scene": scene.to_json_dict(),
                "revisions": len(scenes[job_id])}

    @app.get("/scenes/{scene_id}")
    def get_scene(scene_id: str, rev: int | None = Query(default=None)):
        scene, picked = _pick(scene_id, rev)
        if scene is None:
            return JSONResponse(status_code=404,
                                content={"error": {"type": "NotFound",
                                                   "message": f"no scene {scene_id}"}})
        return {"scene_id": scene_id, "revision": picked,
                "revisions": len(scenes[scene_id]),
                "scene": scene.to_json_dict()}

    @app.post("/scenes/{scene_id}/edits")
    def post_edit(scene_id: str, body: EditBody):
        # edits on one scene are serialized; reads stay lock-free
        with locks[scene_id]:
            scene, _rev = _pick(scene_id, None)
            if scene is None:
                return JSONResponse(status_code=404,
                                    content={"error": {"type": "NotFound",
                                                       "message": f"no scene {scene_id}"}})
            if body.ops:
                ops = [EditOp.from_json(o) for o in body.ops]
            elif body.instruction:
                ops = interpret_edit(body.instruction, scene, client)
            else:
                return JSONResponse(status_code=422,
                                    content={"error": {"type": "BadEdit",
                                                       "message": "need instruction or ops"}})
            edited = apply_edit(scene, ops, client=client, catalog=catalog,
                                sidecar=sidecar)
            scenes[scene_id].append(edited)
            _persist(scene_id, edited)
            return {"scene_id": scene_id, "revision": len(scenes[scene_id]) - 1,
                    "revisions": len(scenes[scene_id]),
                    "ops": [op.to_json() for op in ops],
                    "scene": edited.to_json_dict()}

    @app.get("/scenes/{scene_id}/svg")
    def get_svg(scene_id: str, surface: int = Query(default=0),
                rev: int | None = Query(default=None)):
        scene, _picked = _pick(scene_id, rev)
        if scene is None:
            return JSONResponse(status_code=404,
                                content={"error": {"type": "NotFound",
                                                   "message": f"no scene {scene_id}"}})
        try:
            svg = export_svg(scene, surface)
        except IndexError as exc:
            return JSONResponse(status_code=404,
                                content={"error": {"type": "BadSurface",
                                                   "message": str(exc)}})
        return Response(content=svg, media_type="image/svg+xml")

    @app.get("/scenes/{scene_id}/metrics")
    def get_metrics(scene_id: str, rev: int | None = Query(default=None)):
        scene, _picked = _pick(scene_id, rev)
        if scene is None:
            return JSONResponse(status_code=404,
                                content={"error": {"type": "NotFound",
                                                   "message": f"no scene {scene_id}"}})
        return metrics_report([scene])

    return app
