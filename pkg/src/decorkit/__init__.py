"""decorkit: furniture decoration engine with constraint-optimal placement."""

from .geometry import (Mesh, OccupancyGrid, Rect, Surface, extract_surfaces,
                       footprint_contained, load_mesh, surfaces_to_json)
from .scene import (AssetSpec, DecorScene, Layout, Orientation, Placement,
                    PlanDirective, footprint, region_of, scene_from_json,
                    scene_to_json)
from .compiler import ConstraintSet, compile_plan, construction_order
from .optimizer import (AnchorTerm, SolverParams, Violation, brute_force_solve,
                        check_hard, soft_score, solve)
from .metrics import bbl, metrics_report, oob_rate
from .retrieval import CatalogEntry, build_query, load_catalog, retrieve

__version__ = "0.1.0"

__all__ = [
    "Mesh", "OccupancyGrid", "Rect", "Surface", "extract_surfaces",
    "footprint_contained", "load_mesh", "surfaces_to_json",
    "AssetSpec", "DecorScene", "Layout", "Orientation", "Placement",
    "PlanDirective", "footprint", "region_of", "scene_from_json", "scene_to_json",
    "ConstraintSet", "compile_plan", "construction_order",
    "AnchorTerm", "SolverParams", "Violation", "brute_force_solve",
    "check_hard", "soft_score", "solve",
    "bbl", "metrics_report", "oob_rate",
    "CatalogEntry", "build_query", "load_catalog", "retrieve",
    "__version__",
]
