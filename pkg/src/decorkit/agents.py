"""LLM stages (select, stylize, plan, edit) and their deterministic validators.

A stage completes only when a proposal passes its validator; every failed
attempt feeds the violation list back to the model as a revision request.
Validators report, they never raise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from .banks import MATERIAL_BANK, STYLE_BANK, canonical_material, canonical_style
from .errors import StageExhaustedError
from .llm import CONTEXT_BEGIN, CONTEXT_END, ChatRequest
from .scene import (ALIGNMENT_RELATIONS, DIRECTIONS, DISTANCE_RELATIONS,
                    KIND_ALIGNMENT, KIND_DISTANCE, KIND_GLOBAL, KIND_ORIENTATION,
                    KIND_RELATIVE, REGIONS, RELATIVE_RELATIONS, AssetSpec,
                    PlanDirective)

PROMPT_VERSION = 1

SURFACE_FILL_CAP = 0.7  # summed footprint area per surface, fraction of area

_EPS = 1e-9


@dataclass
class Violation:
    code: str
    message: str
    item: object = None

    def to_json(self) -> dict:
        return {"code": self.code, "message": self.message,
                "item": self.item if isinstance(self.item, (str, int, float, type(None))) else repr(self.item)}


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, message: str, item: object = None):
        self.violations.append(Violation(code, message, item))

    def to_json(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_json() for v in self.violations]}


@dataclass
class StageContext:
    """Inputs shared by every stage: requirement, asset budget, surfaces."""

    prompt: str
    n_assets: int
    surfaces: list[dict]
    seed: int = 0
    assets: list[dict] | None = None        # populated once selection is done
    instruction: str | None = None          # edit stage only

    def __post_init__(self):
        if self.n_assets < 1:
            raise ValueError("n_assets must be >= 1")

    def block(self, stage: str) -> str:
        ctx = {"stage": stage, "prompt": self.prompt, "n_assets": self.n_assets,
               "seed": self.seed, "surfaces": self.surfaces}
        if self.assets is not None:
            ctx["assets"] = self.assets
        if self.instruction is not None:
            ctx["instruction"] = self.instruction
        return json.dumps(ctx, sort_keys=True)


STAGE_SCHEMAS = {
    "select": json.dumps({
        "type": "object",
        "required": ["assets"],
        "properties": {"assets": {"type": "array", "items": {
            "type": "object",
            "required": ["name", "width_cm", "depth_cm", "height_cm", "surface_index"],
            "properties": {"name": {"type": "string"},
                           "width_cm": {"type": "number"},
                           "depth_cm": {"type": "number"},
                           "height_cm": {"type": "number"},
                           "surface_index": {"type": "integer"}}}}},
    }),
    "stylize": json.dumps({
        "type": "object",
        "required": ["assignments"],
        "properties": {"assignments": {"type": "array", "items": {
            "type": "object",
            "required": ["id", "style", "material"],
            "properties": {"id": {"type": "string"}, "style": {"type": "string"},
                           "material": {"type": "string"}}}}},
    }),
    "plan": json.dumps({
        "type": "object",
        "required": ["directives"],
        "properties": {"directives": {"type": "array", "items": {
            "type": "object",
            "required": ["subject", "kind"],
            "properties": {"subject": {"type": "string"}, "kind": {"type": "string"},
                           "region": {"type": "string"}, "reference": {"type": "string"},
                           "relation": {"type": "string"}, "direction": {"type": "string"}}}}},
    }),
    "edit": json.dumps({
        "type": "object",
        "required": ["ops"],
        "properties": {"ops": {"type": "array", "items": {"type": "object",
                                                          "required": ["kind"]}}},
    }),
}

_PROMPT_FILES = {"select": "selector.txt", "stylize": "stylist.txt",
                 "plan": "planner.txt", "edit": "editor.txt"}


def _system_prompt(stage: str) -> str:
    text = resources.files("decorkit.prompts").joinpath(_PROMPT_FILES[stage]).read_text("utf-8")
    text = text.replace("{styles}", ", ".join(STYLE_BANK))
    text = text.replace("{materials}", ", ".join(MATERIAL_BANK))
    return text.replace("{context}", "").strip()


@dataclass
class StageResult:
    output: object
    transcript: list[dict]
    attempts: int


def run_stage(stage: str, ctx: StageContext, client, max_retries: int = 5,
              model: str = "", timeout_s: float = 120.0) -> StageResult:
    """Run one LLM stage until its validator passes, appending revision
    requests after each failure; raises StageExhaustedError after
    ``max_retries`` attempts."""
    if stage not in _PROMPT_FILES:
        raise ValueError(f"unknown stage '{stage}'")
    messages = [
        {"role": "system", "content": _system_prompt(stage)},
        {"role": "user", "content": (
            f"Requirement: {ctx.prompt}\n\n{CONTEXT_BEGIN}\n{ctx.block(stage)}\n"
            f"{CONTEXT_END}\n\nReply with the JSON object only.")},
    ]
    transcript: list[dict] = []
    report = ValidationReport()
    for attempt in range(1, max_retries + 1):
        request = ChatRequest(model=model, messages=list(messages),
                              response_schema=STAGE_SCHEMAS[stage],
                              seed=ctx.seed, timeout_s=timeout_s)
        response = client.complete(request)
        output, report = _check(stage, response.content, ctx)
        transcript.append({"stage": stage, "attempt": attempt,
                           "response": response.content, **report.to_json()})
        if report.ok:
            return StageResult(output=output, transcript=transcript, attempts=attempt)
        messages.append({"role": "assistant", "content": response.content})
        messages.append({"role": "user", "content": _revision_request(report)})
    raise StageExhaustedError(stage, report, transcript)


def _revision_request(report: ValidationReport) -> str:
    lines = [f"- {v.code}: {v.message}" for v in report.violations]
    return ("Your proposal failed validation:\n" + "\n".join(lines)
            + "\nRevise it and resend the complete JSON object.")


def _check(stage: str, content: str, ctx: StageContext):
    try:
        obj = json.loads(content)
    except (json.JSONDecodeError, TypeError):
        r = ValidationReport()
        r.add("bad_json", "response is not valid JSON")
        return None, r

    if stage == "select":
        drafts, report = _extract_list(obj, "assets")
        if report.ok:
            report = validate_assets(drafts, ctx.surfaces, ctx.n_assets)
        return drafts, report
    if stage == "stylize":
        assignments, report = _extract_list(obj, "assignments")
        if report.ok:
            report = validate_styles(assignments, [a["id"] for a in ctx.assets or []])
        return assignments, report
    if stage == "plan":
        raw, report = _extract_list(obj, "directives")
        if not report.ok:
            return raw, report
        assets = [AssetSpec.from_json(a) for a in ctx.assets or []]
        report = validate_plan(raw, assets)
        if report.ok:
            return [PlanDirective.from_json(d) for d in raw], report
        return raw, report
    if stage == "edit":
        ops, report = _extract_list(obj, "ops")
        if report.ok:
            report = validate_edit_ops(ops, ctx.assets or [], ctx.surfaces)
        return ops, report
    raise ValueError(f"unknown stage '{stage}'")


def _extract_list(obj, key: str):
    report = ValidationReport()
    if not isinstance(obj, dict) or not isinstance(obj.get(key), list):
        report.add("bad_json", f"expected an object with a '{key}' array")
        return [], report
    bad = [x for x in obj[key] if not isinstance(x, dict)]
    if bad:
        report.add("bad_field", f"'{key}' entries must be objects", bad[0])
        return [], report
    return obj[key], report


# --- validators --------------------------------------------------------------

def validate_assets(proposal: list[dict], surfaces: list[dict],
                    n_assets: int) -> ValidationReport:
    """Gate for the selection stage: count, field sanity, surface fit,
    populate-every-surface, and the per-surface fill cap."""
    report = ValidationReport()
    if len(proposal) != n_assets:
        report.add("count_mismatch",
                   f"proposed {len(proposal)} assets, requirement is {n_assets}")

    by_index = {int(s["index"]): s for s in surfaces}
    per_surface_count = {i: 0 for i in by_index}
    per_surface_fill = {i: 0.0 for i in by_index}

    for pos, draft in enumerate(proposal):
        label = draft.get("name", f"asset #{pos}")
        name = draft.get("name")
        if not isinstance(name, str) or not name.strip():
            report.add("bad_field", f"asset #{pos} is missing a name", label)
            continue
        dims = []
        bad = False
        for key in ("width_cm", "depth_cm", "height_cm"):
            v = draft.get(key)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
                report.add("bad_field", f"'{label}' has invalid {key}", label)
                bad = True
                break
            dims.append(float(v))
        if bad:
            continue
        sidx = draft.get("surface_index")
        if not isinstance(sidx, int) or isinstance(sidx, bool):
            report.add("bad_field", f"'{label}' has invalid surface_index", label)
            continue
        if sidx not in by_index:
            report.add("bad_surface", f"'{label}' targets unknown surface {sidx}", label)
            continue
        s = by_index[sidx]
        w, d = dims[0], dims[1]
        sw, sd = float(s["width_cm"]), float(s["depth_cm"])
        if (min(w, d) > min(sw, sd) + _EPS) or (max(w, d) > max(sw, sd) + _EPS):
            report.add("oversize",
                       f"'{label}' ({w} x {d}) exceeds surface {sidx} bounds "
                       f"({sw:.1f} x {sd:.1f})", label)
            continue
        per_surface_count[sidx] += 1
        per_surface_fill[sidx] += w * d

    if per_surface_count and max(per_surface_count.values(), default=0) >= 2:
        for i, c in sorted(per_surface_count.items()):
            if c == 0:
                report.add("unpopulated_surface",
                           f"surface {i} holds no assets while others hold several", i)
    for i in sorted(per_surface_fill):
        area = float(by_index[i]["area_cm2"])
        if per_surface_fill[i] > SURFACE_FILL_CAP * area + _EPS:
            report.add("overfill",
                       f"surface {i} fill {per_surface_fill[i]:.0f} cm2 exceeds "
                       f"{SURFACE_FILL_CAP:.0%} of its {area:.0f} cm2", i)
    return report


def validate_styles(proposal: list[dict], asset_ids: list[str],
                    style_bank: tuple[str, ...] = STYLE_BANK,
                    material_bank: tuple[str, ...] = MATERIAL_BANK) -> ValidationReport:
    """Gate for the stylist stage: bank membership and full coverage."""
    report = ValidationReport()
    known = set(asset_ids)
    seen: set[str] = set()
    styles = {s.lower() for s in style_bank}
    materials = {m.lower() for m in material_bank}
    for pos, entry in enumerate(proposal):
        aid = entry.get("id")
        if not isinstance(aid, str) or aid not in known:
            report.add("unknown_asset", f"assignment #{pos} targets unknown asset {aid!r}", aid)
            continue
        if aid in seen:
            report.add("duplicate_assignment", f"asset '{aid}' assigned twice", aid)
            continue
        seen.add(aid)
        style = entry.get("style")
        if not isinstance(style, str) or style.strip().lower() not in styles:
            report.add("unknown_style", f"style {style!r} is not in the bank", aid)
        material = entry.get("material")
        if not isinstance(material, str) or material.strip().lower() not in materials:
            report.add("unknown_material", f"material {material!r} is not in the bank", aid)
    for aid in asset_ids:
        if aid not in seen:
            report.add("missing_assignment", f"asset '{aid}' has no style/material", aid)
    return report


def validate_plan(directives: list[dict], assets: list[AssetSpec]) -> ValidationReport:
    """Gate for the planner stage: vocabulary, same-surface references,
    per-asset directive limits, stack sanity."""
    report = ValidationReport()
    info = {a.id: a for a in assets}
    globals_per: dict[str, int] = {}
    orients_per: dict[str, int] = {}
    stack_edges: dict[str, str] = {}

    for pos, d in enumerate(directives):
        subject = d.get("subject")
        if not isinstance(subject, str) or subject not in info:
            report.add("unknown_asset", f"directive #{pos} subject {subject!r} unknown", subject)
            continue
        kind = d.get("kind")
        if kind not in (KIND_GLOBAL, KIND_RELATIVE, KIND_DISTANCE,
                        KIND_ALIGNMENT, KIND_ORIENTATION):
            report.add("bad_vocabulary", f"directive #{pos} has unknown kind {kind!r}", subject)
            continue

        if kind == KIND_GLOBAL:
            if d.get("region") not in REGIONS:
                report.add("bad_vocabulary", f"unknown region {d.get('region')!r}", subject)
                continue
            globals_per[subject] = globals_per.get(subject, 0) + 1
            continue
        if kind == KIND_ORIENTATION:
            if d.get("direction") not in DIRECTIONS:
                report.add("bad_vocabulary", f"unknown direction {d.get('direction')!r}", subject)
                continue
            orients_per[subject] = orients_per.get(subject, 0) + 1
            continue

        # local kinds need a valid reference
        reference = d.get("reference")
        if not isinstance(reference, str) or reference not in info:
            report.add("unknown_asset", f"directive #{pos} reference {reference!r} unknown", subject)
            continue
        if reference == subject:
            report.add("self_reference", f"'{subject}' references itself", subject)
            continue
        if info[subject].surface_index != info[reference].surface_index:
            report.add("cross_surface",
                       f"'{subject}' references '{reference}' on another surface", subject)
            continue
        relation = d.get("relation")
        allowed = {KIND_RELATIVE: RELATIVE_RELATIONS, KIND_DISTANCE: DISTANCE_RELATIONS,
                   KIND_ALIGNMENT: ALIGNMENT_RELATIONS}[kind]
        if relation not in allowed:
            report.add("bad_vocabulary",
                       f"relation {relation!r} invalid for kind '{kind}'", subject)
            continue
        if kind == KIND_RELATIVE and relation == "on_top_of":
            if subject in stack_edges:
                report.add("stack_conflict", f"'{subject}' stacked on two bases", subject)
                continue
            stack_edges[subject] = reference
            s, b = info[subject], info[reference]
            if (min(s.width_cm, s.depth_cm) > min(b.width_cm, b.depth_cm) + _EPS
                    or max(s.width_cm, s.depth_cm) > max(b.width_cm, b.depth_cm) + _EPS):
                report.add("stack_oversize",
                           f"'{subject}' cannot fit on '{reference}' in any orientation",
                           subject)

    for aid, c in sorted(globals_per.items()):
        if c > 1:
            report.add("multi_global", f"'{aid}' has {c} global_region directives", aid)
    for aid, c in sorted(orients_per.items()):
        if c > 1:
            report.add("multi_orientation", f"'{aid}' has {c} orientation directives", aid)

    # stacking chains must be acyclic
    for start in sorted(stack_edges):
        slow = start
        seen = set()
        cur = start
        while cur in stack_edges:
            if cur in seen:
                report.add("stack_cycle", f"on_top_of cycle through '{cur}'", cur)
                break
            seen.add(cur)
            cur = stack_edges[cur]
        del slow
    # deduplicate cycle reports (each cycle reported once, by smallest member)
    cycles = [v for v in report.violations if v.code == "stack_cycle"]
    if len(cycles) > 1:
        keep = min(cycles, key=lambda v: str(v.item))
        report.violations = [v for v in report.violations
                             if v.code != "stack_cycle" or v is keep]
    return report


_EDIT_KINDS = ("insert", "remove", "replace", "resize", "reposition", "rotate")


def validate_edit_ops(ops: list[dict], assets: list[dict],
                      surfaces: list[dict]) -> ValidationReport:
    """Gate for the edit-interpretation stage."""
    report = ValidationReport()
    if not ops:
        report.add("empty_edit", "instruction produced no operations")
        return report
    known = {a["id"] for a in assets}
    surface_ids = {int(s["index"]) for s in surfaces}
    for pos, op in enumerate(ops):
        kind = op.get("kind")
        if kind not in _EDIT_KINDS:
            report.add("bad_vocabulary", f"op #{pos} has unknown kind {kind!r}")
            continue
        if kind != "insert":
            target = op.get("target")
            if not isinstance(target, str) or target not in known:
                report.add("unresolvable_target",
                           f"op #{pos} targets no existing asset ({target!r})", target)
                continue
        if kind in ("insert", "replace"):
            draft = op.get("asset")
            if not isinstance(draft, dict):
                report.add("bad_field", f"op #{pos} needs an 'asset' draft")
                continue
            for key in ("name", "width_cm", "depth_cm", "height_cm", "surface_index"):
                if key not in draft:
                    report.add("bad_field", f"op #{pos} draft is missing {key}")
                    break
            else:
                if kind == "insert" and int(draft["surface_index"]) not in surface_ids:
                    report.add("bad_surface",
                               f"op #{pos} inserts onto unknown surface "
                               f"{draft['surface_index']}")
        if kind == "resize":
            dims = op.get("dims")
            if not isinstance(dims, dict) or not all(
                    isinstance(dims.get(k), (int, float)) and dims.get(k) > 0
                    for k in ("width_cm", "depth_cm", "height_cm")):
                report.add("bad_field", f"op #{pos} needs positive dims")
        if kind == "rotate" and op.get("direction") not in DIRECTIONS:
            report.add("bad_vocabulary", f"op #{pos} has bad direction {op.get('direction')!r}")
        if kind == "reposition" and not isinstance(op.get("directives"), list):
            report.add("bad_field", f"op #{pos} needs a 'directives' array")
    return report
