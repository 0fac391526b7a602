"""Compile validated plan directives into an explicit constraint set.

Distance and alignment directives form the soft objective; every other
placement directive is hard.  Assets stacked on another asset are contained
by their base footprint instead of the surface and never collide with it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import CompileError
from .geometry import Surface
from .scene import (KIND_ALIGNMENT, KIND_DISTANCE, KIND_GLOBAL, KIND_ORIENTATION,
                    KIND_RELATIVE, AssetSpec, Orientation, PlanDirective)


@dataclass
class ConstraintSet:
    assets: dict[str, AssetSpec]
    soft_pairs: list[PlanDirective] = field(default_factory=list)
    hard_pairs: list[PlanDirective] = field(default_factory=list)      # incl. on_top_of
    global_directives: list[PlanDirective] = field(default_factory=list)
    fixed_orientations: dict[str, Orientation] = field(default_factory=dict)
    surface_assets: dict[int, list[str]] = field(default_factory=dict)
    stack_base: dict[str, str] = field(default_factory=dict)           # subject -> base

    def region_for(self, asset_id: str) -> str | None:
        for d in self.global_directives:
            if d.subject == asset_id:
                return d.region
        return None

    def directional_pairs(self) -> list[PlanDirective]:
        return [d for d in self.hard_pairs if d.relation != "on_top_of"]

    def to_debug_json(self) -> dict:
        return {
            "soft_pairs": [d.to_json() for d in self.soft_pairs],
            "hard_pairs": [d.to_json() for d in self.hard_pairs],
            "global_directives": [d.to_json() for d in self.global_directives],
            "fixed_orientations": {k: v.to_json()
                                   for k, v in sorted(self.fixed_orientations.items())},
            "surface_assets": {str(k): v for k, v in sorted(self.surface_assets.items())},
            "stack_base": dict(sorted(self.stack_base.items())),
        }


def compile_plan(directives: list[PlanDirective], assets: list[AssetSpec],
                 surfaces: list[Surface]) -> ConstraintSet:
    """Bucket directives into soft/hard/global/orientation sets.

    Raises CompileError for a stacked asset that also carries a global
    region (its containment target is the base footprint, so a surface
    region is meaningless for it).
    """
    known_surfaces = {s.index for s in surfaces}
    cs = ConstraintSet(assets={a.id: a for a in assets})
    for a in assets:
        if a.surface_index not in known_surfaces:
            raise CompileError("bad_surface",
                               f"asset '{a.id}' targets missing surface {a.surface_index}")
        cs.surface_assets.setdefault(a.surface_index, []).append(a.id)

    for d in directives:
        if d.kind in (KIND_DISTANCE, KIND_ALIGNMENT):
            cs.soft_pairs.append(d)
        elif d.kind == KIND_RELATIVE:
            cs.hard_pairs.append(d)
            if d.relation == "on_top_of":
                cs.stack_base[d.subject] = d.reference
        elif d.kind == KIND_GLOBAL:
            cs.global_directives.append(d)
        elif d.kind == KIND_ORIENTATION:
            cs.fixed_orientations[d.subject] = Orientation.from_direction(d.direction)
        else:
            raise CompileError("bad_kind", f"unknown directive kind '{d.kind}'")

    for subject in cs.stack_base:
        if any(g.subject == subject for g in cs.global_directives):
            raise CompileError(
                "stacked_global",
                f"asset '{subject}' is stacked and cannot carry a global region")
    return cs


def restrict_to_surfaces(cs: ConstraintSet, surface_indices: set[int]) -> ConstraintSet:
    """Sub-problem covering only the given surfaces; valid because every
    directive references assets on one surface."""
    keep = {aid for aid, a in cs.assets.items() if a.surface_index in surface_indices}
    return ConstraintSet(
        assets={aid: a for aid, a in cs.assets.items() if aid in keep},
        soft_pairs=[d for d in cs.soft_pairs if d.subject in keep],
        hard_pairs=[d for d in cs.hard_pairs if d.subject in keep],
        global_directives=[d for d in cs.global_directives if d.subject in keep],
        fixed_orientations={a: o for a, o in cs.fixed_orientations.items() if a in keep},
        surface_assets={s: ids for s, ids in cs.surface_assets.items()
                        if s in surface_indices},
        stack_base={a: b for a, b in cs.stack_base.items() if a in keep},
    )


def construction_order(cs: ConstraintSet) -> dict[int, list[str]]:
    """Per-surface placement order: stack bases and relation references come
    before their subjects; ties and reference cycles fall back to descending
    footprint area, then id."""
    order: dict[int, list[str]] = {}
    for sidx in sorted(cs.surface_assets):
        ids = cs.surface_assets[sidx]
        deps: dict[str, set[str]] = {i: set() for i in ids}
        dependents: dict[str, set[str]] = {i: set() for i in ids}
        for d in cs.hard_pairs + cs.soft_pairs:
            if d.subject in deps and d.reference in deps and d.reference != d.subject:
                deps[d.subject].add(d.reference)
                dependents[d.reference].add(d.subject)

        def rank(aid: str) -> tuple:
            a = cs.assets[aid]
            return (-a.width_cm * a.depth_cm, aid)

        remaining = set(ids)
        pending = {i: set(deps[i]) for i in ids}
        out: list[str] = []
        while remaining:
            ready = [i for i in remaining if not pending[i]]
            # cycle: emit the best-ranked remaining node regardless of deps
            pick = min(ready or remaining, key=rank)
            out.append(pick)
            remaining.discard(pick)
            for dep in dependents[pick]:
                pending.get(dep, set()).discard(pick)
        order[sidx] = out
    return order
