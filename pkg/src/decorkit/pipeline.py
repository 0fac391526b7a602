"""End-to-end orchestration: decorate, edit, SVG export, job persistence.

decorate runs surface extraction, the three validated LLM stages, constraint
compilation, the solver and catalog retrieval, and returns a scene that is
guaranteed hard-feasible.  Edits mutate a copy, re-solve only the affected
surfaces with warm-start anchors, and leave the original scene untouched on
any failure.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import zlib
from dataclasses import dataclass, field
from pathlib import Path

from .agents import StageContext, run_stage, validate_plan
from .compiler import compile_plan, restrict_to_surfaces
from .errors import (EditError, InfeasibleEditError, InfeasibleLayoutError,
                     StageExhaustedError, UnresolvableTargetError)
from .geometry import extract_surfaces, load_mesh
from .metrics import metrics_report
from .optimizer import AnchorTerm, SolverParams, check_hard, solve
from .retrieval import CatalogEntry, EmbeddingSidecar, build_query, retrieve
from .scene import (AssetSpec, DecorScene, Furniture, Layout, Orientation,
                    PlanDirective, canonical_json, copy_scene, placed_footprint,
                    scene_to_json)

ANCHOR_WEIGHT = 0.25
ANCHOR_RADIUS_CM = 30.0


@dataclass
class JobRequest:
    prompt: str
    n_assets: int
    mesh_path: str | None = None
    mesh_obj: str | None = None          # inline OBJ content wins over the path
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_assets < 1:
            raise ValueError("n_assets must be >= 1")
        if not self.mesh_path and not self.mesh_obj:
            raise ValueError("a mesh_path or inline mesh_obj is required")

    def to_json(self) -> dict:
        return {"prompt": self.prompt, "n_assets": self.n_assets,
                "mesh_path": self.mesh_path, "mesh_obj": self.mesh_obj,
                "seed": self.seed, "params": self.params}

    def job_id(self) -> str:
        digest = hashlib.sha256(
            canonical_json(self.to_json()).encode("utf-8")).hexdigest()
        return digest[:12]

    def solver_params(self) -> SolverParams:
        return SolverParams(seed=self.seed, **self.params)

    def mesh_text(self) -> str:
        if self.mesh_obj:
            return self.mesh_obj
        return Path(self.mesh_path).read_text(encoding="utf-8")


@dataclass
class EditOp:
    kind: str
    target: str | None = None
    asset: dict | None = None            # draft for insert / replace
    dims: dict | None = None             # resize
    directives: list[dict] | None = None  # reposition
    direction: str | None = None         # rotate

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        for key in ("target", "asset", "dims", "directives", "direction"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "EditOp":
        return cls(kind=obj["kind"], target=obj.get("target"),
                   asset=obj.get("asset"), dims=obj.get("dims"),
                   directives=obj.get("directives"), direction=obj.get("direction"))


def _slug(name: str) -> str:
    s = re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")
    return s or "asset"


def _assign_ids(drafts: list[dict], taken: set[str] | None = None) -> list[AssetSpec]:
    taken = set(taken or ())
    out = []
    for draft in drafts:
        base = _slug(draft["name"])
        aid = base
        n = 1
        while aid in taken:
            n += 1
            aid = f"{base}-{n}"
        taken.add(aid)
        out.append(AssetSpec(id=aid, name=draft["name"],
                             width_cm=float(draft["width_cm"]),
                             depth_cm=float(draft["depth_cm"]),
                             height_cm=float(draft["height_cm"]),
                             surface_index=int(draft["surface_index"])))
    return out


def _retrieval_seed(base_seed: int, asset_id: str) -> int:
    return (base_seed & 0x7FFFFFFF) ^ zlib.crc32(asset_id.encode("utf-8"))


def _bind(assets: list[AssetSpec], catalog: list[CatalogEntry] | None,
          sidecar: EmbeddingSidecar | None, seed: int,
          existing: dict[str, str] | None = None,
          only: set[str] | None = None) -> dict[str, str]:
    bindings = dict(existing or {})
    if catalog is None:
        return bindings
    for a in assets:
        if only is not None and a.id not in only:
            continue
        query = build_query(a.style, a.material, a.name)
        entry = retrieve(query, catalog, k=10,
                         seed=_retrieval_seed(seed, a.id), sidecar=sidecar)
        bindings[a.id] = entry.id
    return bindings


def decorate(request: JobRequest, client, catalog: list[CatalogEntry] | None = None,
             sidecar: EmbeddingSidecar | None = None,
             jobs_dir: str | Path | None = None) -> DecorScene:
    """Full pipeline: surfaces -> select -> stylize -> plan -> compile ->
    solve -> retrieve.  The returned scene passes check_hard; nothing is
    persisted unless the whole run succeeds."""
    mesh = load_mesh(request.mesh_text())
    surfaces = extract_surfaces(mesh)
    params = request.solver_params()

    ctx = StageContext(prompt=request.prompt, n_assets=request.n_assets,
                       surfaces=[s.summary() for s in surfaces],
                       seed=request.seed)
    transcripts: list[dict] = []

    selected = run_stage("select", ctx, client)
    transcripts.extend(selected.transcript)
    assets = _assign_ids(selected.output)

    ctx.assets = [a.to_json() for a in assets]
    styled = run_stage("stylize", ctx, client)
    transcripts.extend(styled.transcript)
    by_id = {a.id: a for a in assets}
    for entry in styled.output:
        a = by_id[entry["id"]]
        a.style = entry["style"]
        a.material = entry["material"]

    ctx.assets = [a.to_json() for a in assets]
    planned = run_stage("plan", ctx, client)
    transcripts.extend(planned.transcript)
    directives: list[PlanDirective] = planned.output

    cs = compile_plan(directives, assets, surfaces)
    layout = solve(cs, surfaces, params)
    bindings = _bind(assets, catalog, sidecar, request.seed)

    scene = DecorScene(
        furniture=Furniture(request.mesh_path, surfaces),
        assets=assets, directives=directives, layout=layout, bindings=bindings,
    )
    scene.provenance.prompt = request.prompt
    scene.provenance.n_assets = request.n_assets
    scene.provenance.seed = request.seed
    scene.provenance.transcripts = transcripts

    if jobs_dir is not None:
        persist_job(jobs_dir, request.job_id(), scene, request=request, revision=0)
    return scene


def interpret_edit(instruction: str, scene: DecorScene, client,
                   max_retries: int = 5) -> list[EditOp]:
    """Map a free-form instruction to structured edit operations, with the
    same validate/revise loop as the other stages."""
    ctx = StageContext(
        prompt=scene.provenance.prompt or "",
        n_assets=max(1, len(scene.assets)),
        surfaces=[s.summary() for s in scene.furniture.surfaces],
        seed=scene.provenance.seed,
        assets=[a.to_json() for a in scene.assets],
        instruction=instruction,
    )
    try:
        result = run_stage("edit", ctx, client, max_retries=max_retries)
    except StageExhaustedError as exc:
        if exc.report and any(v.code == "unresolvable_target"
                              for v in exc.report.violations):
            raise UnresolvableTargetError(
                f"instruction {instruction!r} names no asset in the scene") from exc
        raise
    return [EditOp.from_json(op) for op in result.output]


def apply_edit(scene: DecorScene, ops: list[EditOp], client=None,
               params: SolverParams | None = None,
               catalog: list[CatalogEntry] | None = None,
               sidecar: EmbeddingSidecar | None = None) -> DecorScene:
    """Apply structured edits on a copy of the scene: re-validates the plan,
    re-solves only affected surfaces (warm-started), re-binds only inserted
    or replaced assets.  Raises without touching the input scene."""
    if not ops:
        raise EditError("empty_edit", "no operations to apply")
    params = params or SolverParams(seed=scene.provenance.seed)
    working = copy_scene(scene)
    edited: set[str] = set()
    rebind: set[str] = set()
    affected: set[int] = set()

    for op in ops:
        if op.kind == "remove":
            target = _require_target(working, op)
            affected.add(target.surface_index)
            _drop_asset(working, target.id, edited)
        elif op.kind == "insert":
            draft = _require_draft(op)
            spec = _assign_ids([draft], taken={a.id for a in working.assets})[0]
            _require_fit(working, spec)
            working.assets.append(spec)
            edited.add(spec.id)
            rebind.add(spec.id)
            affected.add(spec.surface_index)
        elif op.kind == "replace":
            target = _require_target(working, op)
            draft = _require_draft(op)
            target.name = draft["name"]
            target.width_cm = float(draft["width_cm"])
            target.depth_cm = float(draft["depth_cm"])
            target.height_cm = float(draft["height_cm"])
            target.style = draft.get("style", target.style)
            target.material = draft.get("material", target.material)
            _require_fit(working, target)
            edited.add(target.id)
            rebind.add(target.id)
            affected.add(target.surface_index)
        elif op.kind == "resize":
            target = _require_target(working, op)
            dims = op.dims or {}
            for key in ("width_cm", "depth_cm", "height_cm"):
                v = dims.get(key)
                if not isinstance(v, (int, float)) or v <= 0:
                    raise EditError("bad_dims", f"resize needs positive {key}")
            target.width_cm = float(dims["width_cm"])
            target.depth_cm = float(dims["depth_cm"])
            target.height_cm = float(dims["height_cm"])
            _require_fit(working, target)
            edited.add(target.id)
            affected.add(target.surface_index)
        elif op.kind == "reposition":
            target = _require_target(working, op)
            new = [PlanDirective.from_json(d) for d in (op.directives or [])]
            if any(d.subject != target.id for d in new):
                raise EditError("bad_directive",
                                "reposition directives must address the target")
            working.directives = ([d for d in working.directives
                                   if d.subject != target.id] + new)
            edited.add(target.id)
            affected.add(target.surface_index)
        elif op.kind == "rotate":
            target = _require_target(working, op)
            try:
                Orientation.from_direction(op.direction or "")
            except ValueError as exc:
                raise EditError("bad_direction", str(exc)) from exc
            working.directives = ([d for d in working.directives
                                   if not (d.subject == target.id
                                           and d.kind == "orientation")]
                                  + [PlanDirective(subject=target.id,
                                                   kind="orientation",
                                                   direction=op.direction)])
            edited.add(target.id)
            affected.add(target.surface_index)
        else:
            raise EditError("bad_op", f"unknown edit kind {op.kind!r}")

    report = validate_plan([d.to_json() for d in working.directives],
                           working.assets)
    if not report.ok:
        codes = "; ".join(v.code for v in report.violations)
        raise EditError("plan_invalid", f"edit leaves an invalid plan: {codes}")

    cs = compile_plan(working.directives, working.assets,
                      working.furniture.surfaces)
    sub = restrict_to_surfaces(cs, affected)
    anchors = {}
    for aid in sub.assets:
        if aid in edited or aid not in scene.layout:
            continue
        prev = scene.layout[aid]
        anchors[aid] = AnchorTerm(prev.x_cm, prev.y_cm,
                                  weight=ANCHOR_WEIGHT, radius_cm=ANCHOR_RADIUS_CM)
    obstacles = []
    for a in working.assets:
        if a.surface_index in affected:
            continue
        prev = scene.layout[a.id]
        obstacles.append((placed_footprint(a, prev), prev.z_cm,
                          prev.z_cm + a.height_cm))
    try:
        partial = solve(sub, working.furniture.surfaces, params,
                        anchors=anchors, obstacles=obstacles)
    except InfeasibleLayoutError as exc:
        raise InfeasibleEditError(str(exc)) from exc

    merged = Layout()
    for a in working.assets:
        if a.surface_index in affected:
            merged.placements[a.id] = partial[a.id]
        else:
            merged.placements[a.id] = scene.layout[a.id]
    working.layout = merged

    leftover = check_hard(merged, cs, working.furniture.surfaces, params)
    if leftover:
        raise InfeasibleEditError(f"edit leaves hard violations: {leftover}")

    for aid in list(working.bindings):
        if aid not in {a.id for a in working.assets}:
            del working.bindings[aid]
    working.bindings = _bind(working.assets, catalog, sidecar,
                             scene.provenance.seed, existing=working.bindings,
                             only=rebind)
    working.provenance.transcripts = (list(working.provenance.transcripts)
                                      + [{"stage": "edit",
                                          "ops": [op.to_json() for op in ops]}])
    return working


def _require_target(scene: DecorScene, op: EditOp) -> AssetSpec:
    if not op.target:
        raise EditError("missing_target", f"{op.kind} needs a target asset id")
    try:
        return scene.asset(op.target)
    except KeyError:
        raise UnresolvableTargetError(
            f"{op.kind} targets unknown asset '{op.target}'") from None


def _require_draft(op: EditOp) -> dict:
    draft = op.asset
    if not isinstance(draft, dict):
        raise EditError("missing_draft", f"{op.kind} needs an asset draft")
    for key in ("name", "width_cm", "depth_cm", "height_cm", "surface_index"):
        if key not in draft:
            raise EditError("missing_draft", f"asset draft is missing {key}")
    if min(float(draft["width_cm"]), float(draft["depth_cm"]),
           float(draft["height_cm"])) <= 0:
        raise EditError("bad_dims", "asset draft dims must be positive")
    return draft


def _require_fit(scene: DecorScene, asset: AssetSpec):
    try:
        surface = scene.surface(asset.surface_index)
    except IndexError:
        raise EditError("bad_surface",
                        f"no surface with index {asset.surface_index}") from None
    w, d = asset.width_cm, asset.depth_cm
    sw, sd = surface.bbox.width, surface.bbox.depth
    if min(w, d) > min(sw, sd) or max(w, d) > max(sw, sd):
        raise InfeasibleEditError(
            f"'{asset.id}' ({w} x {d} cm) exceeds surface {asset.surface_index} "
            f"bounds ({sw:.0f} x {sd:.0f} cm)")


def _drop_asset(scene: DecorScene, asset_id: str, edited: set[str]):
    scene.assets = [a for a in scene.assets if a.id != asset_id]
    scene.layout.placements.pop(asset_id, None)
    scene.bindings.pop(asset_id, None)
    kept = []
    for d in scene.directives:
        if d.subject == asset_id or d.reference == asset_id:
            # assets that were stacked on the removed one fall back to the surface
            if d.relation == "on_top_of" and d.reference == asset_id:
                edited.add(d.subject)
            continue
        kept.append(d)
    scene.directives = kept


# --- SVG export ---------------------------------------------------------------

SVG_PAD_CM = 5.0


def export_svg(scene: DecorScene, surface_index: int) -> str:
    """2D projection of one surface: boundary, 3x3 region gridlines, labeled
    asset rectangles with yaw arrows; stacked assets drawn red on top.
    1 SVG unit = 1 cm; byte-stable for identical scenes."""
    surface = scene.surface(surface_index)
    bbox = surface.bbox
    pad = SVG_PAD_CM
    width = bbox.width + 2 * pad
    height = bbox.depth + 2 * pad

    def fx(x: float) -> str:
        return f"{x - bbox.min_x + pad:.2f}"

    def fy(y: float) -> str:
        return f"{bbox.max_y - y + pad:.2f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width:.2f} {height:.2f}" '
        f'width="{width:.2f}" height="{height:.2f}">',
        f'<rect x="0" y="0" width="{width:.2f}" height="{height:.2f}" fill="#ffffff"/>',
    ]
    pts = " ".join(f"{fx(x)},{fy(y)}" for x, y in surface.boundary)
    parts.append(f'<polygon points="{pts}" fill="#f7f5f0" stroke="#444444" '
                 f'stroke-width="0.8"/>')

    for i in (1, 2):
        gx = bbox.min_x + bbox.width * i / 3.0
        gy = bbox.min_y + bbox.depth * i / 3.0
        parts.append(f'<line x1="{fx(gx)}" y1="{fy(bbox.min_y)}" x2="{fx(gx)}" '
                     f'y2="{fy(bbox.max_y)}" stroke="#bbbbbb" stroke-width="0.4" '
                     f'stroke-dasharray="3,3"/>')
        parts.append(f'<line x1="{fx(bbox.min_x)}" y1="{fy(gy)}" x2="{fx(bbox.max_x)}" '
                     f'y2="{fy(gy)}" stroke="#bbbbbb" stroke-width="0.4" '
                     f'stroke-dasharray="3,3"/>')

    drawn = [(scene.layout.stack_level(a.id), a.id, a) for a in scene.assets
             if a.surface_index == surface_index]
    for _level, aid, asset in sorted(drawn, key=lambda t: (t[0], t[1])):
        p = scene.layout[aid]
        rect = placed_footprint(asset, p)
        stacked = p.stack_base is not None
        fill = "#f2b8b5" if stacked else "#cfe3f5"
        stroke = "#c0392b" if stacked else "#34495e"
        parts.append(
            f'<rect x="{fx(rect.min_x)}" y="{fy(rect.max_y)}" '
            f'width="{rect.width:.2f}" height="{rect.depth:.2f}" fill="{fill}" '
            f'stroke="{stroke}" stroke-width="0.6" data-asset="{aid}"/>')
        cx, cy = rect.center
        # yaw arrow: front of the asset (local -y) rotated counterclockwise
        yaw = math.radians(p.orientation.yaw_deg)
        ln = min(rect.width, rect.depth) * 0.35
        dx = ln * math.sin(yaw)
        dy = -ln * math.cos(yaw)
        parts.append(
            f'<line x1="{fx(cx)}" y1="{fy(cy)}" x2="{fx(cx + dx)}" '
            f'y2="{fy(cy + dy)}" stroke="{stroke}" stroke-width="0.6"/>')
        font = max(2.5, min(6.0, rect.width * 0.16))
        parts.append(
            f'<text x="{fx(cx)}" y="{fy(cy - rect.depth * 0.28)}" '
            f'font-size="{font:.2f}" text-anchor="middle" fill="#222222" '
            f'font-family="sans-serif">{_xml_escape(asset.name)}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _xml_escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


# --- persistence ----------------------------------------------------------------

def persist_job(jobs_dir: str | Path, job_id: str, scene: DecorScene,
                request: JobRequest | None = None, revision: int = 0) -> Path:
    """One directory per job: request, scene revisions, latest scene,
    metrics, transcripts.  Only called after a fully successful run."""
    root = Path(jobs_dir) / job_id
    root.mkdir(parents=True, exist_ok=True)
    if request is not None:
        (root / "request.json").write_text(canonical_json(request.to_json()),
                                           encoding="utf-8")
    text = scene_to_json(scene)
    (root / f"scene_rev_{revision:03d}.json").write_text(text, encoding="utf-8")
    (root / "scene.json").write_text(text, encoding="utf-8")
    (root / "metrics.json").write_text(
        canonical_json(metrics_report([scene])), encoding="utf-8")
    lines = [json.dumps(t, sort_keys=True) for t in scene.provenance.transcripts]
    (root / "transcripts.jsonl").write_text("\n".join(lines) + "\n",
                                            encoding="utf-8")
    return root
