"""Acceptance gate: one test per criterion, each ending in a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the criterion lines.
"""

import math
import time

import numpy as np
import pytest

from catalogs import CATALOG
from meshes import desk_obj, desk_with_shelf_obj, fixture_mesh, lipped_table_obj

from decorkit.agents import StageContext, run_stage, validate_plan, validate_styles
from decorkit.compiler import compile_plan
from decorkit.errors import InfeasibleEditError, InfeasibleLayoutError, StageExhaustedError
from decorkit.geometry import Rect, extract_surfaces, footprint_contained, load_mesh
from decorkit.llm import FaultInjectionClient, RuleStubClient
from decorkit.metrics import bbl, oob_rate
from decorkit.optimizer import (SolverParams, brute_force_solve, check_hard,
                                soft_score, solve)
from decorkit.pipeline import EditOp, JobRequest, apply_edit, decorate, export_svg
from decorkit.retrieval import CatalogEntry, retrieve, token_overlap_score
from decorkit.scene import (AssetSpec, Layout, Orientation, Placement,
                            PlanDirective, region_of_bbox, scene_to_json)

TOL = 1e-9


def _catalog():
    return [CatalogEntry(id=c["id"], name=c["name"], tags=tuple(c["tags"]),
                         dims_cm=tuple(c["dims_cm"])) for c in CATALOG]


def _passed(name: str, detail: str = ""):
    suffix = f" ({detail})" if detail else ""
    print(f"\nACCEPTANCE {name}: PASS{suffix}")


def asset(id, w, d, h=10.0, surface=0):
    return AssetSpec(id=id, name=id, width_cm=w, depth_cm=d, height_cm=h,
                     surface_index=surface)


def d(subject, kind, **kw):
    return PlanDirective(subject=subject, kind=kind, **kw)


def test_zero_infeasibility_table():
    """20 fixture meshes x N in {8, 16, 32}: OOB and BBL exactly zero."""
    t0 = time.time()
    catalog = _catalog()
    client = RuleStubClient()
    scenes = []
    for i in range(20):
        mesh_obj = fixture_mesh(i)
        for n in (8, 16, 32):
            request = JobRequest(prompt=f"decorate fixture {i}", n_assets=n,
                                 mesh_obj=mesh_obj, seed=i * 100 + n)
            scenes.append(decorate(request, client, catalog=catalog))
    elapsed = time.time() - t0
    assert len(scenes) == 60
    assert oob_rate(scenes) == 0.0
    assert bbl(scenes) == 0.0
    assert elapsed < 300.0, f"took {elapsed:.1f}s, budget is 300s"
    _passed("zero-infeasibility (60 scenes, OOB=0.0, BBL=0.0)",
            f"{elapsed:.1f}s")


def _random_instance(rng):
    side = float(rng.integers(80, 111))
    surfaces = extract_surfaces(load_mesh(desk_obj(side, side)))
    n = int(rng.integers(2, 4))
    assets = []
    for k in range(n):
        w = round(float(rng.uniform(0.18, 0.32)) * side, 1)
        dd = round(float(rng.uniform(0.18, 0.32)) * side, 1)
        assets.append(asset(f"a{k}", w, dd))
    directives = []
    if rng.random() < 0.4:
        directives.append(d("a0", "global_region",
                            region=("C", "N", "NE", "W", "S")[int(rng.integers(5))]))
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    for _ in range(int(rng.integers(1, 3))):
        i, j = pairs[int(rng.integers(len(pairs)))]
        kind = ("distance", "distance", "alignment")[int(rng.integers(3))]
        if kind == "distance":
            rel = ("near", "far")[int(rng.integers(2))]
        else:
            rel = ("vertical_left", "vertical_mid", "vertical_right",
                   "horizontal_front", "horizontal_mid",
                   "horizontal_back")[int(rng.integers(6))]
        directives.append(d(f"a{i}", kind, relation=rel, reference=f"a{j}"))
    if rng.random() < 0.5 and n >= 2:
        i, j = pairs[int(rng.integers(len(pairs)))]
        rel = ("left_of", "right_of", "in_front_of", "behind")[int(rng.integers(4))]
        directives.append(d(f"a{i}", "relative_position", relation=rel,
                            reference=f"a{j}"))
    if rng.random() < 0.3:
        directives.append(d(f"a{int(rng.integers(n))}", "orientation",
                            direction=("forward", "left", "right",
                                       "backward")[int(rng.integers(4))]))
    cs = compile_plan(directives, assets, surfaces)
    params = SolverParams(grid_step_cm=side / 5.0, seed=int(rng.integers(10000)))
    return cs, surfaces, params


def test_oracle_optimality():
    """100 random small instances: solve matches the exhaustive optimum on
    >= 95 and never violates a hard constraint."""
    t0 = time.time()
    rng = np.random.default_rng(20240817)
    matches = 0
    total = 0
    while total < 100:
        cs, surfaces, params = _random_instance(rng)
        try:
            oracle = brute_force_solve(cs, surfaces, params)
        except InfeasibleLayoutError:
            continue  # instance without a feasible assignment: not counted
        total += 1
        want = soft_score(oracle, cs, params)
        try:
            layout = solve(cs, surfaces, params)
        except InfeasibleLayoutError:
            continue  # counts as a miss
        assert check_hard(layout, cs, surfaces, params) == []
        got = soft_score(layout, cs, params)
        assert got <= want + TOL
        if got >= want - TOL:
            matches += 1
    elapsed = time.time() - t0
    assert matches >= 95, f"only {matches}/100 matched the oracle"
    assert elapsed < 120.0, f"took {elapsed:.1f}s, budget is 120s"
    _passed("oracle-optimality", f"{matches}/100 matches, {elapsed:.1f}s")


def test_predicate_unit_suite():
    """Every solver formula against hand-derived values at 1e-9."""
    surfaces = extract_surfaces(load_mesh(desk_obj(90, 90)))
    params = SolverParams()

    def pair_cs(kind, rel):
        return compile_plan([d("a", kind, relation=rel, reference="b")],
                            [asset("a", 20, 20), asset("b", 20, 20)], surfaces)

    def layout_at(bx):
        return Layout({"a": Placement(20, 45), "b": Placement(bx, 45)})

    # near ramp: 1 - g/15
    for gap, want in ((0.0, 1.0), (3.0, 0.8), (7.5, 0.5), (15.0, 0.0), (20.0, 0.0)):
        got = soft_score(layout_at(40 + gap), pair_cs("distance", "near"), params)
        assert got == pytest.approx(want, abs=TOL)
    # far ramp: min(1, g/30)
    for gap, want in ((0.0, 0.0), (7.5, 0.25), (30.0, 1.0), (45.0, 1.0)):
        got = soft_score(layout_at(40 + gap), pair_cs("distance", "far"), params)
        assert got == pytest.approx(want, abs=TOL)
    # alignment ramp: 1 - |e_i - e_j|/5 on the directive's edge coordinate
    cs = pair_cs("alignment", "vertical_left")
    layout = Layout({"a": Placement(20, 30), "b": Placement(22.5, 60)})
    assert soft_score(layout, cs, params) == pytest.approx(0.5, abs=TOL)
    cs = pair_cs("alignment", "horizontal_back")
    layout = Layout({"a": Placement(20, 30), "b": Placement(60, 31.25)})
    assert soft_score(layout, cs, params) == pytest.approx(0.75, abs=TOL)

    # directional disjoint projections: 1 cm past the bound -> 1 cm shortfall
    cs = compile_plan([d("a", "relative_position", relation="left_of",
                         reference="b")],
                      [asset("a", 20, 20), asset("b", 20, 20)], surfaces)
    bad = Layout({"a": Placement(31, 20), "b": Placement(50, 60)})
    v = [x for x in check_hard(bad, cs, surfaces, params) if x.kind == "relation"]
    assert len(v) == 1 and v[0].magnitude == pytest.approx(1.0, abs=TOL)
    ok = Layout({"a": Placement(30, 20), "b": Placement(50, 60)})
    assert [x for x in check_hard(ok, cs, surfaces, params)
            if x.kind == "relation"] == []

    # region tie-break: boundaries belong to the west/south cell
    bbox = Rect(0.0, 0.0, 90.0, 90.0)
    assert region_of_bbox(bbox, 30.0, 30.0) == "SW"
    assert region_of_bbox(bbox, 30.0 + 1e-6, 30.0 + 1e-6) == "C"
    assert region_of_bbox(bbox, 60.0, 60.0) == "C"
    assert region_of_bbox(bbox, 45.0, 60.0 + 1e-6) == "N"

    # containment margin: 1 cm inflation against the surface edge
    cs = compile_plan([], [asset("a", 20, 20)], surfaces)
    assert check_hard(Layout({"a": Placement(11.0, 45)}), cs, surfaces, params) == []
    assert check_hard(Layout({"a": Placement(11.0 - 1e-6, 45)}), cs,
                      surfaces, params) != []
    p0 = SolverParams(edge_margin_cm=0.0)
    assert check_hard(Layout({"a": Placement(10.0, 45)}), cs, surfaces, p0) == []

    # overlap magnitude: 20x20 boxes 15 cm apart overlap 5 x 20 = 100 cm2
    cs = compile_plan([], [asset("a", 20, 20), asset("b", 20, 20)], surfaces)
    v = check_hard(Layout({"a": Placement(30, 45), "b": Placement(45, 45)}),
                   cs, surfaces, params)
    assert len(v) == 1 and v[0].magnitude == pytest.approx(100.0, abs=TOL)
    _passed("predicate-unit-suite")


def test_surface_extraction_fixtures():
    """Desk+shelf: exact heights, areas within 1%; lip relief merges at
    1.5 cm and splits at 2.5 cm."""
    surfaces = extract_surfaces(load_mesh(desk_with_shelf_obj()))
    assert len(surfaces) == 2
    assert [s.height_cm for s in surfaces] == [75.0, 110.0]
    assert abs(surfaces[0].area_cm2 - 7200.0) / 7200.0 < 0.01
    assert abs(surfaces[1].area_cm2 - 1600.0) / 1600.0 < 0.01

    assert len(extract_surfaces(load_mesh(lipped_table_obj(1.5)))) == 1
    assert len(extract_surfaces(load_mesh(lipped_table_obj(2.5)))) == 2
    _passed("surface-extraction-fixtures")


def test_validator_loop_fault_injection():
    """p=0.3 malformed responses over 1000 stylist runs: the revision loop
    fires in 30% +- 5%, and nothing unvalidated is ever returned."""
    assets = [{"id": f"a{i}", "name": f"asset {i}", "width_cm": 10.0,
               "depth_cm": 10.0, "height_cm": 5.0, "surface_index": 0}
              for i in range(4)]
    surfaces = [{"index": 0, "area_cm2": 7200.0, "width_cm": 120.0,
                 "depth_cm": 60.0, "height_cm": 75.0}]
    client = FaultInjectionClient(RuleStubClient(), p=0.3, seed=20250809)
    revised = 0
    exhausted = 0
    for i in range(1000):
        ctx = StageContext(prompt="p", n_assets=4, surfaces=surfaces, seed=i,
                           assets=assets)
        try:
            result = run_stage("stylize", ctx, client)
        except StageExhaustedError:
            exhausted += 1
            revised += 1
            continue
        if result.attempts > 1:
            revised += 1
        report = validate_styles(result.output, [a["id"] for a in assets])
        assert report.ok, "an unvalidated output escaped the loop"
    fraction = revised / 1000.0
    assert abs(fraction - 0.3) <= 0.05, f"revision fraction {fraction}"

    trio = [asset("monitor", 50, 10), asset("keyboard", 35, 12),
            asset("mouse", 6, 10)]
    directives = [
        {"subject": "monitor", "kind": "global_region", "region": "C"},
        {"subject": "keyboard", "kind": "relative_position",
         "relation": "in_front_of", "reference": "monitor"},
        {"subject": "mouse", "kind": "relative_position",
         "relation": "right_of", "reference": "monitor"},
        {"subject": "mouse", "kind": "distance", "relation": "near",
         "reference": "monitor"},
    ]
    report = validate_plan(directives, trio)
    assert report.ok and not report.violations
    _passed("validator-loop", f"revision fraction {fraction:.3f}, "
            f"{exhausted} exhausted")


@pytest.fixture(scope="module")
def sixteen_asset_scene():
    request = JobRequest(prompt="a full workspace", n_assets=16,
                         mesh_obj=desk_with_shelf_obj(), seed=99)
    return decorate(request, RuleStubClient(), catalog=_catalog())


def _surface_placements(scene, sidx):
    return {aid: (p.x_cm, p.y_cm, p.orientation, p.z_cm, p.stack_base)
            for aid, p in scene.layout.placements.items()
            if scene.asset(aid).surface_index == sidx}


def _assert_feasible(scene):
    cs = compile_plan(scene.directives, scene.assets, scene.furniture.surfaces)
    assert check_hard(scene.layout, cs, scene.furniture.surfaces) == []


def test_editing_four_kinds(sixteen_asset_scene):
    """Insert/remove, replace, resize, rotate/reposition on a 16-asset scene:
    feasible results, untouched surfaces bit-identical, atomic rejection."""
    scene = sixteen_asset_scene
    catalog = _catalog()
    surface0 = {a.id for a in scene.assets if a.surface_index == 0}
    assert surface0 and any(a.surface_index == 1 for a in scene.assets)

    bound = set(scene.layout.placements[aid].stack_base for aid in surface0
                if scene.layout[aid].stack_base) | {
        aid for aid in surface0 if scene.layout[aid].stack_base}
    for di in scene.directives:
        if di.kind == "relative_position":
            bound.add(di.subject)
            bound.add(di.reference)
    free0 = sorted(surface0 - bound)

    # insert + remove
    out = apply_edit(scene, [
        EditOp(kind="insert", asset={"name": "succulent pot", "width_cm": 10.0,
                                     "depth_cm": 10.0, "height_cm": 12.0,
                                     "surface_index": 0}),
        EditOp(kind="remove", target=free0[0]),
    ], catalog=catalog)
    assert len(out.assets) == 16
    _assert_feasible(out)
    assert _surface_placements(out, 1) == _surface_placements(scene, 1)

    # replace (changing an asset)
    target = free0[1]
    spec = scene.asset(target)
    out = apply_edit(scene, [EditOp(kind="replace", target=target,
                                    asset={"name": "electric teapot",
                                           "width_cm": spec.width_cm,
                                           "depth_cm": spec.depth_cm,
                                           "height_cm": 22.0,
                                           "surface_index": 0})],
                     catalog=catalog)
    assert out.asset(target).name == "electric teapot"
    _assert_feasible(out)
    assert _surface_placements(out, 1) == _surface_placements(scene, 1)

    # resize
    out = apply_edit(scene, [EditOp(kind="resize", target=target,
                                    dims={"width_cm": spec.width_cm * 0.6,
                                          "depth_cm": spec.depth_cm * 0.6,
                                          "height_cm": spec.height_cm * 0.6})],
                     catalog=catalog)
    _assert_feasible(out)
    assert _surface_placements(out, 1) == _surface_placements(scene, 1)

    # rotate + reposition
    out = apply_edit(scene, [
        EditOp(kind="rotate", target=free0[2], direction="left"),
        EditOp(kind="reposition", target=free0[3],
               directives=[{"subject": free0[3], "kind": "global_region",
                            "region": "SE"}]),
    ], catalog=catalog)
    assert out.layout[free0[2]].orientation.yaw_deg == 90
    _assert_feasible(out)
    assert _surface_placements(out, 1) == _surface_placements(scene, 1)

    # atomic rejection of an infeasible edit
    before = scene_to_json(scene)
    with pytest.raises(InfeasibleEditError):
        apply_edit(scene, [EditOp(kind="resize", target=target,
                                  dims={"width_cm": 9000.0, "depth_cm": 9000.0,
                                        "height_cm": 5.0})], catalog=catalog)
    assert scene_to_json(scene) == before
    _passed("editing-four-kinds")


def test_determinism_byte_identical():
    """Two stub-mode runs of one request produce identical scene JSON + SVG."""
    request = JobRequest(prompt="the same request", n_assets=12,
                         mesh_obj=desk_with_shelf_obj(), seed=2024)
    catalog = _catalog()
    a = decorate(request, RuleStubClient(), catalog=catalog)
    b = decorate(request, RuleStubClient(), catalog=catalog)
    assert scene_to_json(a) == scene_to_json(b)
    for s in a.furniture.surfaces:
        assert export_svg(a, s.index) == export_svg(b, s.index)
    _passed("determinism-byte-identical")


def test_retrieval_top10_and_uniformity():
    """Top-10 membership always; uniform sampling over ties +-5%."""
    catalog = _catalog()
    query = "Scandinavian wood stack of books"
    ranked = sorted(((token_overlap_score(query, e), e.id) for e in catalog),
                    key=lambda t: (-t[0], t[1]))
    top10 = {eid for score, eid in ranked if score > 0.0}
    assert top10, "query must match something"
    for seed in range(1000):
        assert retrieve(query, catalog, k=10, seed=seed).id in top10

    tied = [CatalogEntry(id=f"t{i}", name="twin item", tags=("twin",),
                         dims_cm=(10, 10, 10)) for i in range(5)]
    counts = {e.id: 0 for e in tied}
    for seed in range(1000):
        counts[retrieve("twin item", tied, k=10, seed=seed).id] += 1
    for c in counts.values():
        assert abs(c / 1000.0 - 0.2) <= 0.05
    _passed("retrieval-top10-uniformity")
