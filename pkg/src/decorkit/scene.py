"""Core vocabulary shared by all stages: assets, directives, layouts, scenes.

Scene JSON (schema_version 1) is the contract between the engine, the CLI,
the HTTP service and the web client.  Field names follow the domain types
here; the canonical encoding is byte-stable for identical inputs.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import OccupancyGrid, Rect, Surface

SCHEMA_VERSION = 1

REGIONS = ("NW", "N", "NE", "W", "C", "E", "SW", "S", "SE")

KIND_GLOBAL = "global_region"
KIND_RELATIVE = "relative_position"
KIND_DISTANCE = "distance"
KIND_ALIGNMENT = "alignment"
KIND_ORIENTATION = "orientation"
DIRECTIVE_KINDS = (KIND_GLOBAL, KIND_RELATIVE, KIND_DISTANCE,
                   KIND_ALIGNMENT, KIND_ORIENTATION)

RELATIVE_RELATIONS = ("left_of", "right_of", "in_front_of", "behind", "on_top_of")
DISTANCE_RELATIONS = ("near", "far")
ALIGNMENT_RELATIONS = ("vertical_left", "vertical_mid", "vertical_right",
                       "horizontal_front", "horizontal_mid", "horizontal_back")
DIRECTIONS = ("forward", "backward", "left", "right")

_DIRECTION_TO_FLAGS = {
    "forward": (False, False),
    "left": (True, False),
    "backward": (False, True),
    "right": (True, True),
}
_FLAGS_TO_DIRECTION = {v: k for k, v in _DIRECTION_TO_FLAGS.items()}


@dataclass(frozen=True)
class Orientation:
    """Yaw encoded as two quarter/half-turn flags: yaw = 90*r90 + 180*r180."""

    r90: bool = False
    r180: bool = False

    @property
    def yaw_deg(self) -> int:
        return (90 if self.r90 else 0) + (180 if self.r180 else 0)

    @classmethod
    def from_direction(cls, name: str) -> "Orientation":
        try:
            r90, r180 = _DIRECTION_TO_FLAGS[name]
        except KeyError:
            raise ValueError(f"unknown direction '{name}'") from None
        return cls(r90, r180)

    def direction(self) -> str:
        return _FLAGS_TO_DIRECTION[(self.r90, self.r180)]

    def to_json(self) -> dict:
        return {"r90": self.r90, "r180": self.r180}

    @classmethod
    def from_json(cls, obj: dict) -> "Orientation":
        return cls(bool(obj["r90"]), bool(obj["r180"]))


@dataclass
class AssetSpec:
    """A selected asset: bounding box in cm, target surface, style binding.

    width_cm runs along the asset-local x axis and depth_cm along local y
    when yaw is 0; style/material stay empty until the stylist stage.
    """

    id: str
    name: str
    width_cm: float
    depth_cm: float
    height_cm: float
    surface_index: int
    style: str = ""
    material: str = ""

    def __post_init__(self):
        self.width_cm = float(self.width_cm)
        self.depth_cm = float(self.depth_cm)
        self.height_cm = float(self.height_cm)
        if min(self.width_cm, self.depth_cm, self.height_cm) <= 0:
            raise ValueError(f"asset '{self.id}' has non-positive dimensions")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "width_cm": self.width_cm,
            "depth_cm": self.depth_cm,
            "height_cm": self.height_cm,
            "surface_index": self.surface_index,
            "style": self.style,
            "material": self.material,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AssetSpec":
        return cls(id=obj["id"], name=obj["name"], width_cm=float(obj["width_cm"]),
                   depth_cm=float(obj["depth_cm"]), height_cm=float(obj["height_cm"]),
                   surface_index=int(obj["surface_index"]),
                   style=obj.get("style", ""), material=obj.get("material", ""))


@dataclass(frozen=True)
class PlanDirective:
    """One placement relation emitted by the planner stage."""

    subject: str
    kind: str
    region: str | None = None        # global_region only
    reference: str | None = None     # local kinds only
    relation: str | None = None      # relative/distance/alignment
    direction: str | None = None     # orientation only

    def to_json(self) -> dict:
        out: dict = {"subject": self.subject, "kind": self.kind}
        if self.region is not None:
            out["region"] = self.region
        if self.reference is not None:
            out["reference"] = self.reference
        if self.relation is not None:
            out["relation"] = self.relation
        if self.direction is not None:
            out["direction"] = self.direction
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "PlanDirective":
        return cls(subject=obj["subject"], kind=obj["kind"],
                   region=obj.get("region"), reference=obj.get("reference"),
                   relation=obj.get("relation"), direction=obj.get("direction"))


@dataclass
class Placement:
    """Per-asset layout entry; (x_cm, y_cm) is the footprint center in the
    surface frame, z_cm the resting height of the box base."""

    x_cm: float
    y_cm: float
    orientation: Orientation = field(default_factory=Orientation)
    stack_base: str | None = None
    z_cm: float = 0.0

    def __post_init__(self):
        self.x_cm = float(self.x_cm)
        self.y_cm = float(self.y_cm)
        self.z_cm = float(self.z_cm)

    def to_json(self) -> dict:
        return {
            "x_cm": self.x_cm,
            "y_cm": self.y_cm,
            "orientation": self.orientation.to_json(),
            "stack_base": self.stack_base,
            "z_cm": self.z_cm,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Placement":
        return cls(x_cm=float(obj["x_cm"]), y_cm=float(obj["y_cm"]),
                   orientation=Orientation.from_json(obj["orientation"]),
                   stack_base=obj.get("stack_base"), z_cm=float(obj.get("z_cm", 0.0)))


@dataclass
class Layout:
    placements: dict[str, Placement] = field(default_factory=dict)

    def __contains__(self, asset_id: str) -> bool:
        return asset_id in self.placements

    def __getitem__(self, asset_id: str) -> Placement:
        return self.placements[asset_id]

    def stack_level(self, asset_id: str) -> int:
        level = 0
        cur = self.placements[asset_id].stack_base
        while cur is not None:
            level += 1
            cur = self.placements[cur].stack_base
            if level > len(self.placements):
                raise ValueError("stack_base chain contains a cycle")
        return level

    def to_json(self) -> dict:
        return {aid: self.placements[aid].to_json() for aid in sorted(self.placements)}

    @classmethod
    def from_json(cls, obj: dict) -> "Layout":
        return cls({aid: Placement.from_json(p) for aid, p in obj.items()})


def footprint(asset: AssetSpec, x_cm: float, y_cm: float,
              orientation: Orientation) -> Rect:
    """Axis-aligned footprint of the asset: extents swap under r90, while a
    half turn leaves the box unchanged."""
    if orientation.r90:
        return Rect.from_center(x_cm, y_cm, asset.depth_cm, asset.width_cm)
    return Rect.from_center(x_cm, y_cm, asset.width_cm, asset.depth_cm)


def placed_footprint(asset: AssetSpec, placement: Placement) -> Rect:
    return footprint(asset, placement.x_cm, placement.y_cm, placement.orientation)


def region_of(surface: Surface, x_cm: float, y_cm: float) -> str:
    """3x3 bbox partition label; S row faces the front (-y), boundary points
    belong to the lower-index (west/south) cell."""
    return region_of_bbox(surface.bbox, x_cm, y_cm)


def region_of_bbox(bbox: Rect, x_cm: float, y_cm: float, eps: float = 1e-9) -> str:
    if not bbox.contains_point(x_cm, y_cm, eps):
        raise ValueError(f"point ({x_cm}, {y_cm}) outside surface bbox")
    col = _tercile(x_cm, bbox.min_x, bbox.max_x, eps)
    row = _tercile(y_cm, bbox.min_y, bbox.max_y, eps)   # 0 = south/front
    grid = (("SW", "S", "SE"),
            ("W", "C", "E"),
            ("NW", "N", "NE"))
    return grid[row][col]


def _tercile(v: float, lo: float, hi: float, eps: float) -> int:
    third = (hi - lo) / 3.0
    if v <= lo + third + eps:
        return 0
    if v <= lo + 2.0 * third + eps:
        return 1
    return 2


@dataclass
class Provenance:
    prompt: str = ""
    n_assets: int = 0
    seed: int = 0
    transcripts: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"prompt": self.prompt, "n_assets": self.n_assets,
                "seed": self.seed, "transcripts": self.transcripts}

    @classmethod
    def from_json(cls, obj: dict) -> "Provenance":
        return cls(prompt=obj.get("prompt", ""), n_assets=int(obj.get("n_assets", 0)),
                   seed=int(obj.get("seed", 0)), transcripts=obj.get("transcripts", []))


@dataclass
class Furniture:
    mesh_ref: str | None
    surfaces: list[Surface]

    def to_json(self) -> dict:
        return {"mesh_ref": self.mesh_ref,
                "surfaces": [_surface_to_json(s) for s in self.surfaces]}

    @classmethod
    def from_json(cls, obj: dict) -> "Furniture":
        return cls(mesh_ref=obj.get("mesh_ref"),
                   surfaces=[_surface_from_json(s) for s in obj["surfaces"]])


@dataclass
class DecorScene:
    """Furniture + assets + layout + catalog bindings; the unit of editing."""

    furniture: Furniture
    assets: list[AssetSpec]
    directives: list[PlanDirective]
    layout: Layout
    bindings: dict[str, str] = field(default_factory=dict)
    provenance: Provenance = field(default_factory=Provenance)

    def asset(self, asset_id: str) -> AssetSpec:
        for a in self.assets:
            if a.id == asset_id:
                return a
        raise KeyError(asset_id)

    def surface(self, index: int) -> Surface:
        for s in self.furniture.surfaces:
            if s.index == index:
                return s
        raise IndexError(f"no surface with index {index}")

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "furniture": self.furniture.to_json(),
            "assets": [a.to_json() for a in self.assets],
            "directives": [d.to_json() for d in self.directives],
            "layout": self.layout.to_json(),
            "bindings": {k: self.bindings[k] for k in sorted(self.bindings)},
            "provenance": self.provenance.to_json(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "DecorScene":
        version = obj.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported scene schema_version {version!r}")
        return cls(
            furniture=Furniture.from_json(obj["furniture"]),
            assets=[AssetSpec.from_json(a) for a in obj["assets"]],
            directives=[PlanDirective.from_json(d) for d in obj["directives"]],
            layout=Layout.from_json(obj["layout"]),
            bindings=dict(obj.get("bindings", {})),
            provenance=Provenance.from_json(obj.get("provenance", {})),
        )


def canonical_json(obj) -> str:
    """Stable, human-readable encoding used for all persisted artifacts."""
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def scene_to_json(scene: DecorScene) -> str:
    return canonical_json(scene.to_json_dict())


def scene_from_json(text: str) -> DecorScene:
    return DecorScene.from_json_dict(json.loads(text))


def _surface_to_json(s: Surface) -> dict:
    cells = s.grid.cells
    packed = np.packbits(cells.astype(np.uint8).ravel())
    return {
        "index": s.index,
        "height_cm": s.height_cm,
        "area_cm2": s.area_cm2,
        "boundary": [[x, y] for x, y in s.boundary],
        "bbox": {"min_x": s.bbox.min_x, "min_y": s.bbox.min_y,
                 "max_x": s.bbox.max_x, "max_y": s.bbox.max_y},
        "grid": {
            "resolution_cm": s.grid.resolution_cm,
            "origin": list(s.grid.origin),
            "shape": list(cells.shape),
            "cells_b64": base64.b64encode(packed.tobytes()).decode("ascii"),
        },
    }


def _surface_from_json(obj: dict) -> Surface:
    g = obj["grid"]
    nx, ny = (int(v) for v in g["shape"])
    raw = np.frombuffer(base64.b64decode(g["cells_b64"]), dtype=np.uint8)
    cells = np.unpackbits(raw)[: nx * ny].reshape(nx, ny).astype(bool)
    grid = OccupancyGrid(resolution_cm=float(g["resolution_cm"]),
                         origin=(float(g["origin"][0]), float(g["origin"][1])),
                         cells=cells)
    b = obj["bbox"]
    return Surface(
        index=int(obj["index"]),
        height_cm=float(obj["height_cm"]),
        boundary=tuple((float(x), float(y)) for x, y in obj["boundary"]),
        area_cm2=float(obj["area_cm2"]),
        bbox=Rect(float(b["min_x"]), float(b["min_y"]),
                  float(b["max_x"]), float(b["max_y"])),
        grid=grid,
    )


def copy_scene(scene: DecorScene) -> DecorScene:
    """Deep-enough copy for atomic edits (surfaces/grids are immutable)."""
    return DecorScene(
        furniture=Furniture(scene.furniture.mesh_ref, list(scene.furniture.surfaces)),
        assets=[replace(a) for a in scene.assets],
        directives=list(scene.directives),
        layout=Layout({aid: replace(p) for aid, p in scene.layout.placements.items()}),
        bindings=dict(scene.bindings),
        provenance=Provenance(scene.provenance.prompt, scene.provenance.n_assets,
                              scene.provenance.seed, list(scene.provenance.transcripts)),
    )
