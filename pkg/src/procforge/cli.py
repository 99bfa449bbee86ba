"""Operator command line: validate and run models, serve and query the API.

``validate`` and ``run`` work entirely locally; ``tasks``, ``complete`` and
``report`` are thin clients for a running server. Exit codes: 0 success,
1 validation failure, 2 runtime failure.
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path
from typing import Optional

import click
import httpx
import yaml

from .cloud import DEFAULT_PROFILE, TaskProfile, parse_topology
from .engine import InstanceStatus
from .errors import ProcForgeError, SchemaError
from .model import parse_process, validate as validate_model
from .provenance import ProvenanceStore
from .runtime import WorkflowRuntime
from .service import AutoStepper, build_app, build_runtime, load_config

DEFAULT_SERVER = "http://127.0.0.1:8080"


@click.group()
def main():
    """Software process enactment on a simulated hybrid cloud."""


@main.command("validate")
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
def validate_cmd(model_path: str):
    """Check a process definition; lists violations on failure."""
    try:
        model = parse_process(Path(model_path).read_text(encoding="utf-8"))
    except ProcForgeError as exc:
        click.echo(f"{exc.code}: {exc.message}", err=True)
        sys.exit(1)
    violations = validate_model(model)
    if violations:
        for v in violations:
            click.echo(f"{v.code} [{v.subject}]: {v.message}", err=True)
        sys.exit(1)
    click.echo("OK")


def _load_answers(path: Optional[str]) -> dict:
    if path is None:
        return {}
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(doc, dict):
        raise SchemaError("answers file must map activity ids to {role, decision_label}")
    answers = {}
    for aid, entry in doc.items():
        if not isinstance(entry, dict) or "role" not in entry:
            raise SchemaError(f"answer for '{aid}' requires a role")
        answers[aid] = {"role": entry["role"], "decision_label": entry.get("decision_label")}
    return answers


def _load_profiles(path: Optional[str]) -> tuple[TaskProfile, dict[str, TaskProfile]]:
    if path is None:
        return DEFAULT_PROFILE, {}
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(doc, dict):
        raise SchemaError("profiles file must be a mapping")

    def to_profile(entry) -> TaskProfile:
        if not isinstance(entry, dict) or "base_duration_s" not in entry:
            raise SchemaError("profile entries require base_duration_s")
        return TaskProfile(
            base_duration_s=int(entry["base_duration_s"]),
            serial_fraction=float(entry.get("serial_fraction", 0.0)),
            sync_overhead_s_per_node=float(entry.get("sync_overhead_s_per_node", 0.0)),
        )

    default = to_profile(doc["default"]) if "default" in doc else DEFAULT_PROFILE
    activities = {aid: to_profile(entry) for aid, entry in (doc.get("activities") or {}).items()}
    return default, activities


def _register_library(runtime: WorkflowRuntime, library_dir: Path, primary_id: str) -> None:
    """Best-effort registration of sibling model files for subworkflow refs."""
    for candidate in sorted(library_dir.glob("*.yaml")):
        try:
            model = parse_process(candidate.read_text(encoding="utf-8"))
        except ProcForgeError:
            continue
        if model.model_id != primary_id and model.model_id not in runtime.models:
            try:
                runtime.register_model(candidate.read_text(encoding="utf-8"))
            except ProcForgeError:
                continue


@main.command("run")
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--answers", "answers_path", type=click.Path(exists=True, dir_okay=False),
              help="Scripted completions for manual tasks.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False),
              help="Write the run report to this file.")
@click.option("--topology", "topology_path", type=click.Path(exists=True, dir_okay=False),
              help="Cloud topology file (defaults to the bundled hybrid pair).")
@click.option("--profiles", "profiles_path", type=click.Path(exists=True, dir_okay=False),
              help="Task duration profiles per activity.")
@click.option("--library", "library_dir", type=click.Path(exists=True, file_okay=False),
              help="Directory of models for subworkflow references (defaults to the model's directory).")
@click.option("--data-dir", "data_dir", type=click.Path(file_okay=False),
              help="Provenance directory (defaults to a fresh temporary one).")
def run_cmd(model_path, answers_path, report_path, topology_path, profiles_path, library_dir, data_dir):
    """Enact a model to quiescence under manual simulated time.

    Every declared-external artifact is supplied automatically. Manual
    tasks are completed from the answers file; without an entry the task
    is prompted for interactively, or the run stops with exit code 2 when
    stdin is not a terminal.
    """
    try:
        document = Path(model_path).read_text(encoding="utf-8")
        model = parse_process(document)
        violations = validate_model(model)
        if violations:
            for v in violations:
                click.echo(f"{v.code} [{v.subject}]: {v.message}", err=True)
            sys.exit(1)
    except ProcForgeError as exc:
        click.echo(f"{exc.code}: {exc.message}", err=True)
        sys.exit(1)

    try:
        answers = _load_answers(answers_path)
        default_profile, profiles = _load_profiles(profiles_path)
        if topology_path:
            clouds = parse_topology(Path(topology_path).read_text(encoding="utf-8"))
        else:
            from importlib import resources
            clouds = parse_topology(resources.files("procforge").joinpath("data/topology.yaml").read_text())
        store = ProvenanceStore(data_dir or tempfile.mkdtemp(prefix="procforge-"))
        runtime = WorkflowRuntime(clouds, store, default_profile=default_profile)
        runtime.register_model(document)
        _register_library(runtime, Path(library_dir) if library_dir else Path(model_path).parent,
                          model.model_id)
        externals = {a.artifact_id for a in model.artifacts if a.external}
        instance = runtime.create_instance(model.model_id, externals, profiles)
        exit_code = _drive(runtime, instance, answers)
    except ProcForgeError as exc:
        click.echo(f"{exc.code}: {exc.message}", err=True)
        sys.exit(2)

    report = runtime.export_report(instance.instance_id)
    if report_path:
        Path(report_path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    click.echo(f"instance {instance.instance_id}: {report['status']} "
               f"at t={report['sim_time_s']}s, total cost {report['costs']['total']}")
    sys.exit(exit_code)


def _drive(runtime: WorkflowRuntime, instance, answers: dict) -> int:
    """Advance time and feed human answers until the instance settles."""
    while True:
        runtime.run_to_quiescence()
        if instance.status is not InstanceStatus.RUNNING:
            return 0 if instance.status is InstanceStatus.COMPLETED else 2
        tasks = runtime.worklist(instance_id=instance.instance_id)
        if not tasks:
            click.echo("stuck: no pending events and no open tasks (placements deferred?)", err=True)
            return 2
        progressed = False
        for task in tasks:
            aid = task["activity_id"]
            if aid in answers:
                entry = answers[aid]
                runtime.complete_task(instance.instance_id, aid, entry["role"], entry.get("decision_label"))
                progressed = True
            elif sys.stdin.isatty():
                prompt = f"activity '{aid}' (role {task['role']})"
                if task["guard_options"]:
                    label = click.prompt(f"{prompt} decision {task['guard_options']}",
                                         type=click.Choice(task["guard_options"]))
                else:
                    click.confirm(f"complete {prompt}?", default=True)
                    label = None
                runtime.complete_task(instance.instance_id, aid, task["role"], label)
                progressed = True
        if not progressed:
            missing = ", ".join(t["activity_id"] for t in tasks)
            click.echo(f"no scripted answer for open task(s): {missing}", err=True)
            return 2


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
def serve_cmd(config_path):
    """Start the REST management API."""
    import uvicorn

    config = load_config(config_path)
    runtime = build_runtime(config)
    app = build_app(runtime, ui_dir=config.ui_dir)
    stepper = None
    if config.clock_mode == "autostep":
        stepper = AutoStepper(runtime, config.step_s)
        stepper.start()
    host, _, port = config.listen_address.partition(":")
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080), log_level="warning")
    finally:
        if stepper:
            stepper.stop()


def _client(server: str) -> httpx.Client:
    return httpx.Client(base_url=server, timeout=30.0)


def _server_option(func):
    return click.option("--server", default=None,
                        help=f"API base URL (default $PROCFORGE_SERVER or {DEFAULT_SERVER})")(func)


def _resolve_server(server: Optional[str]) -> str:
    import os

    return server or os.environ.get("PROCFORGE_SERVER") or DEFAULT_SERVER


def _fail_on_error(response: httpx.Response) -> None:
    if response.status_code >= 400:
        try:
            body = response.json()
            click.echo(f"{body.get('code', response.status_code)}: {body.get('error', '')}", err=True)
        except json.JSONDecodeError:
            click.echo(f"HTTP {response.status_code}", err=True)
        sys.exit(2)


@main.command("tasks")
@click.option("--role", default=None)
@_server_option
def tasks_cmd(role, server):
    """List open manual tasks, optionally filtered by role."""
    with _client(_resolve_server(server)) as client:
        response = client.get("/tasks", params={"role": role} if role else None)
        _fail_on_error(response)
        tasks = response.json()["tasks"]
    if not tasks:
        click.echo("no open tasks")
        return
    for task in tasks:
        guards = f" decisions: {', '.join(task['guard_options'])}" if task["guard_options"] else ""
        click.echo(f"{task['task_id']}  role={task['role']}  waiting since t={task['waiting_since_s']}s{guards}")


@main.command("complete")
@click.argument("task_id")
@click.option("--role", required=True)
@click.option("--label", default=None)
@_server_option
def complete_cmd(task_id, role, label, server):
    """Complete one manual task or decision."""
    body = {"role": role}
    if label is not None:
        body["decision_label"] = label
    with _client(_resolve_server(server)) as client:
        response = client.post(f"/tasks/{task_id}/complete", json=body)
        _fail_on_error(response)
    click.echo(f"{task_id}: Completed")


@main.command("report")
@click.argument("instance_id")
@click.option("--out", "out_path", type=click.Path(dir_okay=False))
@_server_option
def report_cmd(instance_id, out_path, server):
    """Fetch the diagnostics report for one instance."""
    with _client(_resolve_server(server)) as client:
        response = client.get(f"/instances/{instance_id}/report")
        _fail_on_error(response)
        report = response.json()
    text = json.dumps(report, indent=2, sort_keys=True)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
    else:
        click.echo(text)


if __name__ == "__main__":
    main()
