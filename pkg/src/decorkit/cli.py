"""Command line interface: decorate, edit, metrics, svg, serve.

Exit codes: 0 success, 2 validation failure, 3 infeasible layout/edit,
4 backend error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import (ChatBackendError, CompileError, EditError,
                     InfeasibleEditError, InfeasibleLayoutError, MeshParseError,
                     NoSurfaceError, RetrievalError, StageExhaustedError)
from .llm import HttpChatClient, RuleStubClient, ScriptedStubClient
from .metrics import metrics_report
from .pipeline import (EditOp, JobRequest, apply_edit, decorate, export_svg,
                       interpret_edit, persist_job)
from .retrieval import load_catalog, load_sidecar
from .scene import scene_from_json, scene_to_json

EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_BACKEND = 4

_VALIDATION_ERRORS = (StageExhaustedError, CompileError, MeshParseError,
                      NoSurfaceError, RetrievalError, ValueError)
_INFEASIBLE_ERRORS = (InfeasibleLayoutError, InfeasibleEditError)


def _exit_for(exc: Exception) -> int:
    if isinstance(exc, _INFEASIBLE_ERRORS):
        return EXIT_INFEASIBLE
    if isinstance(exc, ChatBackendError):
        return EXIT_BACKEND
    if isinstance(exc, (EditError, *_VALIDATION_ERRORS)):
        return EXIT_VALIDATION
    raise exc


def _fail(exc: Exception):
    click.echo(f"error: {exc}", err=True)
    sys.exit(_exit_for(exc))


def _make_client(stub_dir: str | None, endpoint: str | None, model: str | None):
    if endpoint:
        return HttpChatClient(endpoint=endpoint, model=model or "")
    if stub_dir:
        return ScriptedStubClient(fixtures_dir=stub_dir)
    return RuleStubClient()


def _load_catalog_opts(catalog_path, sidecar_path):
    catalog = load_catalog(catalog_path) if catalog_path else None
    sidecar = load_sidecar(sidecar_path) if sidecar_path else None
    return catalog, sidecar


backend_options = [
    click.option("--stub-dir", type=click.Path(exists=True, file_okay=False),
                 default=None, help="Directory of numbered stub reply files."),
    click.option("--endpoint", default=None,
                 help="OpenAI-compatible chat endpoint (else: rule stub)."),
    click.option("--model", default=None, help="Backend model name."),
    click.option("--catalog", "catalog_path",
                 type=click.Path(exists=True, dir_okay=False), default=None),
    click.option("--sidecar", "sidecar_path",
                 type=click.Path(exists=True, dir_okay=False), default=None,
                 help="Precomputed embedding sidecar for retrieval."),
]


def _with_backend_options(fn):
    for opt in reversed(backend_options):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option()
def main():
    """Furniture decoration engine."""


@main.command("decorate")
@click.option("--mesh", "mesh_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--prompt", required=True)
@click.option("--assets", "n_assets", type=int, required=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", "jobs_dir", type=click.Path(file_okay=False),
              default="decor-jobs", show_default=True)
@click.option("--param", "params", multiple=True,
              help="Solver override as key=value (repeatable).")
@_with_backend_options
def decorate_cmd(mesh_path, prompt, n_assets, seed, jobs_dir, params,
                 stub_dir, endpoint, model, catalog_path, sidecar_path):
    """Run the full pipeline on a furniture mesh."""
    try:
        overrides = {}
        for p in params:
            key, _, value = p.partition("=")
            overrides[key] = float(value)
        request = JobRequest(prompt=prompt, n_assets=n_assets,
                             mesh_path=mesh_path, seed=seed, params=overrides)
        client = _make_client(stub_dir, endpoint, model)
        catalog, sidecar = _load_catalog_opts(catalog_path, sidecar_path)
        scene = decorate(request, client, catalog=catalog, sidecar=sidecar,
                         jobs_dir=jobs_dir)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        _fail(exc)
    report = metrics_report([scene])
    click.echo(json.dumps({"job_id": request.job_id(),
                           "job_dir": str(Path(jobs_dir) / request.job_id()),
                           "assets": len(scene.assets),
                           "surfaces": len(scene.furniture.surfaces),
                           **report}, indent=2))


@main.command("edit")
@click.option("--scene", "scene_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--instruction", default=None, help="Free-form edit instruction.")
@click.option("--ops", "ops_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON file with structured edit ops.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Output scene path (default: overwrite the input).")
@_with_backend_options
def edit_cmd(scene_path, instruction, ops_path, out_path,
             stub_dir, endpoint, model, catalog_path, sidecar_path):
    """Apply a free-form or structured edit to a persisted scene."""
    if not instruction and not ops_path:
        click.echo("error: provide --instruction or --ops", err=True)
        sys.exit(EXIT_VALIDATION)
    try:
        scene = scene_from_json(Path(scene_path).read_text(encoding="utf-8"))
        client = _make_client(stub_dir, endpoint, model)
        catalog, sidecar = _load_catalog_opts(catalog_path, sidecar_path)
        if ops_path:
            raw = json.loads(Path(ops_path).read_text(encoding="utf-8"))
            ops = [EditOp.from_json(o) for o in raw.get("ops", raw)]
        else:
            ops = interpret_edit(instruction, scene, client)
        edited = apply_edit(scene, ops, client=client, catalog=catalog,
                            sidecar=sidecar)
    except Exception as exc:  # noqa: BLE001
        _fail(exc)
    target = Path(out_path or scene_path)
    target.write_text(scene_to_json(edited), encoding="utf-8")
    click.echo(json.dumps({"scene": str(target),
                           "ops": [op.to_json() for op in ops],
                           **metrics_report([edited])}, indent=2))


@main.command("metrics")
@click.option("--scenes", "scene_paths", multiple=True, required=True,
              type=click.Path(exists=True, dir_okay=False))
def metrics_cmd(scene_paths):
    """Feasibility metrics over one or more scene JSON files."""
    try:
        scenes = [scene_from_json(Path(p).read_text(encoding="utf-8"))
                  for p in scene_paths]
        report = metrics_report(scenes)
    except Exception as exc:  # noqa: BLE001
        _fail(exc)
    click.echo(json.dumps(report, indent=2))


@main.command("svg")
@click.option("--scene", "scene_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--surface", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def svg_cmd(scene_path, surface, out_path):
    """Render the 2D projection of one surface."""
    try:
        scene = scene_from_json(Path(scene_path).read_text(encoding="utf-8"))
        svg = export_svg(scene, surface)
    except IndexError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    except Exception as exc:  # noqa: BLE001
        _fail(exc)
    if out_path:
        Path(out_path).write_text(svg, encoding="utf-8")
        click.echo(out_path)
    else:
        click.echo(svg, nl=False)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8211, show_default=True)
@click.option("--jobs-dir", type=click.Path(file_okay=False), default=None)
@_with_backend_options
def serve_cmd(host, port, jobs_dir, stub_dir, endpoint, model,
              catalog_path, sidecar_path):
    """Serve the HTTP JSON API."""
    import uvicorn

    from .server import create_app

    try:
        client = _make_client(stub_dir, endpoint, model)
        catalog, sidecar = _load_catalog_opts(catalog_path, sidecar_path)
        app = create_app(client=client, catalog=catalog, sidecar=sidecar,
                         jobs_dir=jobs_dir)
    except Exception as exc:  # noqa: BLE001
        _fail(exc)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
