"""Feasibility metrics over sets of decorated scenes.

oob_rate: fraction of scenes where at least one asset sits outside its
designated support (surface for free assets, base footprint for stacked).
bbl: mean per-scene sum of pairwise 3D bounding-box intersection volumes,
in cubic meters.
"""

from __future__ import annotations

from .geometry import footprint_contained
from .scene import DecorScene, placed_footprint

CM3_PER_M3 = 100.0 ** 3


def _scene_has_oob(scene: DecorScene) -> bool:
    for asset in scene.assets:
        p = scene.layout[asset.id]
        rect = placed_footprint(asset, p)
        if p.stack_base is not None:
            base = scene.asset(p.stack_base)
            base_rect = placed_footprint(base, scene.layout[base.id])
            if not base_rect.contains_rect(rect):
                return True
        else:
            if not footprint_contained(scene.surface(asset.surface_index), rect):
                return True
    return False


def oob_rate(scenes: list[DecorScene]) -> float:
    """Fraction of scenes with at least one out-of-boundary asset (margin 0)."""
    if not scenes:
        raise ValueError("oob_rate needs at least one scene")
    return sum(1 for s in scenes if _scene_has_oob(s)) / len(scenes)


def _scene_bbl_cm3(scene: DecorScene) -> float:
    boxes = []
    for asset in scene.assets:
        p = scene.layout[asset.id]
        rect = placed_footprint(asset, p)
        boxes.append((rect, p.z_cm, p.z_cm + asset.height_cm))
    total = 0.0
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            ri, zi0, zi1 = boxes[i]
            rj, zj0, zj1 = boxes[j]
            dz = min(zi1, zj1) - max(zi0, zj0)
            if dz <= 0.0:
                continue
            total += ri.intersection_area(rj) * dz
    return total


def bbl(scenes: list[DecorScene]) -> float:
    """Mean pairwise 3D AABB intersection volume per scene, in m^3."""
    if not scenes:
        raise ValueError("bbl needs at least one scene")
    return sum(_scene_bbl_cm3(s) for s in scenes) / len(scenes) / CM3_PER_M3


def metrics_report(scenes: list[DecorScene]) -> dict:
    return {"oob_rate": oob_rate(scenes), "bbl_m3": bbl(scenes),
            "n_scenes": len(scenes)}
