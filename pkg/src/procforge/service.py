"""REST management API over the workflow runtime.

All mutations funnel through the runtime's serialized command stream;
responses are canonical JSON (sorted keys, compact separators) so API
tests can compare bytes. Every error raised by the engine, scheduler,
simulator or store maps to exactly one (status, code) pair; see
``ERROR_STATUS``.
"""

from __future__ import annotations

import base64
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml
from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from starlette.exceptions import HTTPException as StarletteHTTPException

from .cloud import TaskProfile, parse_topology
from .errors import (
    InvalidModel,
    ModelSyntaxError,
    NotFound,
    ProcForgeError,
    SchemaError,
)
from .model import serialize_process
from .provenance import ProvenanceStore, canonical_json
from .runtime import WorkflowRuntime

ERROR_STATUS = {
    "SyntaxError": 400,
    "SchemaError": 400,
    "InvalidModel": 400,
    "UnresolvedReference": 400,
    "RecursiveSubWorkflow": 400,
    "AmbiguousBoundary": 400,
    "CyclicModel": 400,
    "MissingExternalInput": 400,
    "ClockRegression": 400,
    "UnknownMachineType": 400,
    "RoleMismatch": 403,
    "NotFound": 404,
    "MethodNotAllowed": 405,
    "IllegalState": 409,
    "ConstraintViolation": 409,
    "CapacityExceeded": 409,
    "InstanceNotRunning": 409,
    "MixedClouds": 409,
    "UnknownDecisionLabel": 422,
    "StorageFailure": 500,
    "HashMismatch": 500,
    "CorruptLog": 500,
}


def canonical(data, status_code: int = 200) -> Response:
    return Response(content=canonical_json(data), status_code=status_code,
                    media_type="application/json")


async def _json_body(request: Request) -> dict:
    raw = await request.body()
    if not raw:
        raise SchemaError("request body required")
    try:
        body = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ModelSyntaxError(f"request body is not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise SchemaError("request body must be a JSON object")
    return body


def _parse_profiles(raw) -> dict[str, TaskProfile]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise SchemaError("'profiles' must map activity ids to profile objects")
    profiles = {}
    for aid, entry in raw.items():
        if not isinstance(entry, dict) or "base_duration_s" not in entry:
            raise SchemaError(f"profile for '{aid}' requires base_duration_s")
        allowed = {"base_duration_s", "serial_fraction", "sync_overhead_s_per_node"}
        unknown = sorted(set(entry) - allowed)
        if unknown:
            raise SchemaError(f"profile for '{aid}': unknown key(s) {', '.join(unknown)}")
        try:
            profiles[aid] = TaskProfile(
                base_duration_s=int(entry["base_duration_s"]),
                serial_fraction=float(entry.get("serial_fraction", 0.0)),
                sync_overhead_s_per_node=float(entry.get("sync_overhead_s_per_node", 0.0)),
            )
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"profile for '{aid}': {exc}") from exc
        if not 0.0 <= profiles[aid].serial_fraction <= 1.0:
            raise SchemaError(f"profile for '{aid}': serial_fraction must be in [0, 1]")
        if profiles[aid].base_duration_s < 1 or profiles[aid].sync_overhead_s_per_node < 0:
            raise SchemaError(f"profile for '{aid}': durations must be positive")
    return profiles


def build_app(runtime: WorkflowRuntime, ui_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="procforge", docs_url=None, redoc_url=None, openapi_url=None)

    # the console may be served from any static host
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(ProcForgeError)
    async def _domain_error(request: Request, exc: ProcForgeError):
        body = {"code": exc.code, "error": exc.message}
        if isinstance(exc, InvalidModel):
            body["violations"] = [
                {"code": v.code, "subject": v.subject, "message": v.message}
                for v in exc.violations
            ]
        return canonical(body, ERROR_STATUS.get(exc.code, 500))

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request: Request, exc: StarletteHTTPException):
        code = "NotFound" if exc.status_code == 404 else (
            "MethodNotAllowed" if exc.status_code == 405 else "HttpError")
        return canonical({"code": code, "error": str(exc.detail)}, exc.status_code)

    @app.exception_handler(RequestValidationError)
    async def _param_error(request: Request, exc: RequestValidationError):
        return canonical({"code": "SchemaError", "error": "invalid request parameters"}, 400)

    # -- models ---------------------------------------------------------------

    @app.post("/models")
    async def post_model(request: Request):
        body = await _json_body(request)
        document = body.get("document")
        if not isinstance(document, str):
            raise SchemaError("'document' must be the YAML model text")
        model = runtime.register_model(document)
        return canonical({"model_id": model.model_id}, 201)

    @app.get("/models/{model_id}")
    async def get_model(model_id: str):
        model = runtime.models.get(model_id)
        if model is None:
            raise NotFound(f"model '{model_id}' is not registered")
        return canonical({
            "model_id": model.model_id,
            "name": model.name,
            "document": serialize_process(model),
        })

    # -- instances --------------------------------------------------------------

    @app.post("/instances")
    async def post_instance(request: Request):
        body = await _json_body(request)
        model_id = body.get("model_id")
        if not isinstance(model_id, str):
            raise SchemaError("'model_id' must be a string")
        inputs = body.get("external_inputs", [])
        if not isinstance(inputs, list) or any(not isinstance(x, str) for x in inputs):
            raise SchemaError("'external_inputs' must be a list of artifact ids")
        unknown = sorted(set(body) - {"model_id", "external_inputs", "profiles"})
        if unknown:
            raise SchemaError(f"unknown key(s): {', '.join(unknown)}")
        profiles = _parse_profiles(body.get("profiles"))
        instance = runtime.create_instance(model_id, set(inputs), profiles)
        return canonical({"instance_id": instance.instance_id}, 201)

    @app.get("/instances")
    async def list_instances():
        with runtime._lock:
            items = [
                {
                    "instance_id": iid,
                    "model_id": inst.model.model_id,
                    "status": inst.status.value,
                    "sim_time_s": inst.sim_time_s,
                }
                for iid, inst in sorted(runtime.engine.instances.items())
            ]
        return canonical({"instances": items})

    @app.get("/instances/{instance_id}")
    async def get_instance(instance_id: str):
        return canonical(runtime.snapshot(instance_id))

    @app.get("/instances/{instance_id}/report")
    async def get_report(instance_id: str):
        return canonical(runtime.export_report(instance_id))

    @app.get("/instances/{instance_id}/events")
    async def get_events(instance_id: str, from_seq: int = 0):
        runtime._instance(instance_id)
        records = runtime.store.read_events(instance_id=instance_id)
        last_seq = max((r.global_seq for r in records), default=0)
        events = [
            {"seq": r.global_seq, "t": r.sim_time_s, "kind": r.kind, "payload": r.payload}
            for r in records if r.global_seq > from_seq
        ]
        return canonical({"events": events, "last_seq": last_seq})

    # -- tasks -------------------------------------------------------------------

    @app.get("/tasks")
    async def get_tasks(role: Optional[str] = None, instance: Optional[str] = None):
        return canonical({"tasks": runtime.worklist(role=role, instance_id=instance)})

    @app.post("/tasks/{task_id}/complete")
    async def complete_task(task_id: str, request: Request):
        body = await _json_body(request)
        actor_role = body.get("role")
        if not isinstance(actor_role, str):
            raise SchemaError("'role' must be a string")
        label = body.get("decision_label")
        if label is not None and not isinstance(label, str):
            raise SchemaError("'decision_label' must be a string when present")
        if ":" not in task_id:
            raise NotFound(f"no task '{task_id}'")
        instance_id, activity_id = task_id.split(":", 1)
        runtime.complete_task(instance_id, activity_id, actor_role, label)
        return canonical({
            "task_id": task_id,
            "instance_id": instance_id,
            "activity_id": activity_id,
            "state": "Completed",
        })

    # -- artifacts ------------------------------------------------------------------

    @app.get("/artifacts/{artifact_id}")
    async def get_artifact(artifact_id: str, version: Optional[int] = None):
        meta, content = runtime.store.get_artifact(artifact_id, version)
        return canonical({
            "artifact_id": meta.artifact_id,
            "version": meta.version,
            "content_hash": meta.content_hash,
            "size_bytes": meta.size_bytes,
            "producer": meta.producer,
            "created_at_s": meta.created_at_s,
            "consumed": [list(c) for c in meta.consumed],
            "content_b64": base64.b64encode(content).decode(),
        })

    # -- costs and clock ---------------------------------------------------------------

    @app.get("/costs")
    async def get_costs(cloud: Optional[str] = None):
        return canonical(runtime.costs(cloud))

    @app.post("/clock/advance")
    async def advance_clock(request: Request):
        body = await _json_body(request)
        seconds = body.get("seconds")
        if isinstance(seconds, bool) or not isinstance(seconds, int) or seconds < 0:
            raise SchemaError("'seconds' must be a non-negative integer")
        return canonical(runtime.advance_time(seconds))

    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


# ---------------------------------------------------------------------------
# server configuration
# ---------------------------------------------------------------------------

@dataclass
class ServerConfig:
    listen_address: str = "127.0.0.1:8080"
    data_dir: str = "procforge-data"
    cloud_topology_path: Optional[str] = None
    model_library_paths: list = field(default_factory=list)
    clock_mode: str = "manual"          # "manual" or "autostep"
    step_s: int = 3600                  # autostep increment per wall second
    ui_dir: Optional[str] = None


def load_config(path: Optional[str] = None, env: Optional[dict] = None) -> ServerConfig:
    import os

    env = dict(os.environ if env is None else env)
    config = ServerConfig()
    if path is not None:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(doc, dict):
            raise SchemaError("server config must be a mapping")
        allowed = {"listen_address", "data_dir", "cloud_topology_path",
                   "model_library_paths", "clock_mode", "ui_dir"}
        unknown = sorted(set(doc) - allowed)
        if unknown:
            raise SchemaError(f"server config: unknown key(s) {', '.join(unknown)}")
        config.listen_address = doc.get("listen_address", config.listen_address)
        config.data_dir = doc.get("data_dir", config.data_dir)
        config.cloud_topology_path = doc.get("cloud_topology_path")
        config.model_library_paths = list(doc.get("model_library_paths") or [])
        mode = doc.get("clock_mode", "manual")
        if isinstance(mode, str):
            config.clock_mode = mode
        elif isinstance(mode, dict) and mode.get("mode") in ("manual", "autostep"):
            config.clock_mode = mode["mode"]
            config.step_s = int(mode.get("step_s", config.step_s))
        else:
            raise SchemaError("clock_mode must be 'manual' or {mode: autostep, step_s: N}")
        if config.clock_mode not in ("manual", "autostep"):
            raise SchemaError("clock_mode must be 'manual' or 'autostep'")
        if config.clock_mode == "autostep" and config.step_s <= 0:
            raise SchemaError("autostep step_s must be positive")
        config.ui_dir = doc.get("ui_dir")
    if env.get("PROCFORGE_DATA_DIR"):
        config.data_dir = env["PROCFORGE_DATA_DIR"]
    return config


def build_runtime(config: ServerConfig) -> WorkflowRuntime:
    """Assemble a runtime from config: topology, store, model library."""
    from importlib import resources

    if config.cloud_topology_path:
        topology_text = Path(config.cloud_topology_path).read_text(encoding="utf-8")
    else:
        topology_text = resources.files("procforge").joinpath("data/topology.yaml").read_text()
    clouds = parse_topology(topology_text)
    store = ProvenanceStore(config.data_dir)
    runtime = WorkflowRuntime(clouds, store)
    for library_path in config.model_library_paths:
        runtime.register_model(Path(library_path).read_text(encoding="utf-8"))
    return runtime


class AutoStepper:
    """Advances simulated time by step_s once per wall-clock second."""

    def __init__(self, runtime: WorkflowRuntime, step_s: int):
        self.runtime = runtime
        self.step_s = step_s
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._loop, daemon=True)

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()

    def _loop(self) -> None:
        while not self._stop.wait(1.0):
            self.runtime.advance_time(self.step_s)
