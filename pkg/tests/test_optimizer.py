import math

import pytest

from meshes import desk_obj

from decorkit.compiler import compile_plan
from decorkit.errors import InfeasibleLayoutError
from decorkit.geometry import extract_surfaces, load_mesh
from decorkit.optimizer import (AnchorTerm, SolverParams, brute_force_solve,
                                check_hard, layout_to_json, soft_score, solve)
from decorkit.scene import (AssetSpec, Layout, Orientation, Placement,
                            PlanDirective)

TOL = 1e-9


def asset(id, w=20.0, d=20.0, h=10.0, surface=0):
    return AssetSpec(id=id, name=id, width_cm=w, depth_cm=d, height_cm=h,
                     surface_index=surface)


def d(subject, kind, **kw):
    return PlanDirective(subject=subject, kind=kind, **kw)


def place(x, y, r90=False, r180=False, stack=None, z=0.0):
    return Placement(x, y, Orientation(r90, r180), stack, z)


def square_surface(side=90.0):
    return extract_surfaces(load_mesh(desk_obj(side, side)))


@pytest.fixture(scope="module")
def surf90():
    return square_surface(90.0)


class TestSoftScore:
    def test_near_touching_scores_one(self, surf90):
        assets = [asset("a", 20, 20), asset("b", 20, 20)]
        cs = compile_plan([d("a", "distance", relation="near", reference="b")],
                          assets, surf90)
        layout = Layout({"a": place(20, 45), "b": place(40, 45)})  # touching
        assert soft_score(layout, cs) == pytest.approx(1.0, abs=TOL)

    def test_near_at_cutoff_scores_zero(self, surf90):
        assets = [asset("a", 20, 20), asset("b", 20, 20)]
        cs = compile_plan([d("a", "distance", relation="near", reference="b")],
                          assets, surf90)
        layout = Layout({"a": place(20, 45), "b": place(55, 45)})  # gap 15
        assert soft_score(layout, cs) == pytest.approx(0.0, abs=TOL)

    def test_near_midpoint(self, surf90):
        assets = [asset("a", 20, 20), asset("b", 20, 20)]
        cs = compile_plan([d("a", "distance", relation="near", reference="b")],
                          assets, surf90)
        layout = Layout({"a": place(20, 45), "b": place(47.5, 45)})  # gap 7.5
        assert soft_score(layout, cs) == pytest.approx(0.5, abs=TOL)

    def test_near_diagonal_gap(self, surf90):
        # corner-to-corner gap is the euclidean distance of the axis gaps
        assets = [asset("a", 20, 20), asset("b", 20, 20)]
        cs = compile_plan([d("a", "distance", relation="near", reference="b")],
                          assets, surf90)
        layout = Layout({"a": place(20, 20), "b": place(43, 43)})  # 3,3 gaps
        expect = 1.0 - math.hypot(3, 3) / 15.0
        assert soft_score(layout, cs) == pytest.approx(expect, abs=TOL)

    def test_far_ramp(self, surf90):
        assets = [asset("a", 10, 10), asset("b", 10, 10)]
        cs = compile_plan([d("a", "distance", relation="far", reference="b")],
                          assets, surf90)
        for gap, want in ((0.0, 0.0), (15.0, 0.5), (30.0, 1.0), (60.0, 1.0)):
            layout = Layout({"a": place(10, 45), "b": place(20 + gap, 45)})
            assert soft_score(layout, cs) == pytest.approx(want, abs=TOL)

    def test_vertical_left_alignment(self, surf90):
        assets = [asset("a", 20, 20), asset("b", 10, 10)]
        cs = compile_plan([d("a", "alignment", relation="vertical_left",
                             reference="b")], assets, surf90)
        # left edges: 20-10=10 and 40-5=35 -> 2.5 apart when b at 17.5
        layout = Layout({"a": place(20, 30), "b": place(17.5, 60)})
        assert soft_score(layout, cs) == pytest.approx(0.5, abs=TOL)

    def test_alignment_variants(self, surf90):
        assets = [asset("a", 20, 10), asset("b", 10, 20)]
        cases = {
            "vertical_mid": (place(30, 30), place(30, 60), 1.0),
            "vertical_right": (place(30, 30), place(35, 60), 1.0),
            "horizontal_front": (place(30, 30), place(60, 35), 1.0),
            "horizontal_mid": (place(30, 30), place(60, 32.5), 0.5),
            "horizontal_back": (place(30, 30), place(60, 27.5), 0.5),
        }
        for rel, (pa, pb, want) in cases.items():
            cs = compile_plan([d("a", "alignment", relation=rel, reference="b")],
                              [asset("a", 20, 10), asset("b", 10, 20)], surf90)
            layout = Layout({"a": pa, "b": pb})
            assert soft_score(layout, cs) == pytest.approx(want, abs=TOL), rel

    def test_pair_with_distance_and_alignment_sums(self, surf90):
        assets = [asset("a", 20, 20), asset("b", 20, 20)]
        cs = compile_plan([
            d("a", "distance", relation="near", reference="b"),
            d("a", "alignment", relation="horizontal_mid", reference="b"),
        ], assets, surf90)
        layout = Layout({"a": place(20, 45), "b": place(40, 45)})
        assert soft_score(layout, cs) == pytest.approx(2.0, abs=TOL)

    def test_missing_asset_error(self, surf90):
        assets = [asset("a"), asset("b")]
        cs = compile_plan([d("a", "distance", relation="near", reference="b")],
                          assets, surf90)
        with pytest.raises(KeyError):
            soft_score(Layout({"a": place(10, 10)}), cs)


class TestCheckHard:
    def test_clean_single_asset(self, surf90):
        cs = compile_plan([], [asset("a", 20, 20)], surf90)
        layout = Layout({"a": place(45, 45)})
        assert check_hard(layout, cs, surf90) == []

    def test_overlap_magnitude(self, surf90):
        cs = compile_plan([], [asset("a", 20, 20), asset("b", 20, 20)], surf90)
        layout = Layout({"a": place(30, 45), "b": place(45, 45)})
        v = check_hard(layout, cs, surf90)
        assert len(v) == 1
        assert v[0].kind == "overlap"
        assert v[0].magnitude == pytest.approx(100.0, abs=TOL)  # 5 x 20
        from decorkit.optimizer import violations_to_json
        assert violations_to_json(v) == [
            {"kind": "overlap", "subjects": ["a", "b"], "magnitude": v[0].magnitude}]

    def test_touching_is_not_overlap(self, surf90):
        cs = compile_plan([], [asset("a", 20, 20), asset("b", 20, 20)], surf90)
        layout = Layout({"a": place(30, 45), "b": place(50, 45)})
        assert check_hard(layout, cs, surf90) == []

    def test_left_of_shortfall(self, surf90):
        cs = compile_plan([d("a", "relative_position", relation="left_of",
                             reference="b")],
                          [asset("a", 20, 20), asset("b", 20, 20)], surf90)
        # a.max_x = 41, b.min_x = 40 -> 1 cm past the bound
        layout = Layout({"a": place(31, 20), "b": place(50, 60)})
        v = [x for x in check_hard(layout, cs, surf90) if x.kind == "relation"]
        assert len(v) == 1
        assert v[0].magnitude == pytest.approx(1.0, abs=TOL)

    def test_containment_margin(self, surf90):
        cs = compile_plan([], [asset("a", 20, 20)], surf90)
        # margin 1: center must stay >= 11 from the edge
        assert check_hard(Layout({"a": place(11, 45)}), cs, surf90) == []
        bad = check_hard(Layout({"a": place(10.5, 45)}), cs, surf90)
        assert bad and bad[0].kind == "containment"
        # margin 0 admits the flush placement
        assert check_hard(Layout({"a": place(10, 45)}), cs, surf90,
                          SolverParams(edge_margin_cm=0.0)) == []

    def test_global_region(self, surf90):
        cs = compile_plan([d("a", "global_region", region="NE")],
                          [asset("a", 20, 20)], surf90)
        assert check_hard(Layout({"a": place(75, 75)}), cs, surf90) == []
        v = check_hard(Layout({"a": place(45, 45)}), cs, surf90)
        assert v and v[0].kind == "global_region"

    def test_region_boundary_tie(self, surf90):
        # x=30 belongs to the west column: NE violated, NW satisfied
        cs = compile_plan([d("a", "global_region", region="N")],
                          [asset("a", 20, 20)], surf90)
        v = check_hard(Layout({"a": place(30, 75)}), cs, surf90)
        assert v and v[0].kind == "global_region"
        cs2 = compile_plan([d("a", "global_region", region="NW")],
                           [asset("a", 20, 20)], surf90)
        assert check_hard(Layout({"a": place(30, 75)}), cs2, surf90) == []

    def test_stacking_containment(self, surf90):
        assets = [asset("base", 40, 40, 10), asset("top", 10, 10, 5)]
        cs = compile_plan([d("top", "relative_position", relation="on_top_of",
                             reference="base")], assets, surf90)
        good = Layout({"base": place(45, 45),
                       "top": place(50, 50, stack="base")})
        assert check_hard(good, cs, surf90) == []
        bad = Layout({"base": place(45, 45),
                      "top": place(63, 45, stack="base")})  # 3 cm overhang
        v = check_hard(bad, cs, surf90)
        assert v and v[0].kind == "stacking"
        assert v[0].magnitude == pytest.approx(30.0, abs=TOL)

    def test_stacked_exempt_from_base_overlap(self, surf90):
        assets = [asset("base", 40, 40, 10), asset("top", 10, 10, 5)]
        cs = compile_plan([d("top", "relative_position", relation="on_top_of",
                             reference="base")], assets, surf90)
        layout = Layout({"base": place(45, 45), "top": place(45, 45, stack="base")})
        assert check_hard(layout, cs, surf90) == []

    def test_fixed_orientation(self, surf90):
        cs = compile_plan([d("a", "orientation", direction="left")],
                          [asset("a", 20, 10)], surf90)
        ok = Layout({"a": place(45, 45, r90=True)})
        assert check_hard(ok, cs, surf90) == []
        bad = Layout({"a": place(45, 45)})
        assert any(v.kind == "relation" for v in check_hard(bad, cs, surf90))


class TestSolve:
    def test_single_asset_no_directives(self, surf90):
        cs = compile_plan([], [asset("a", 20, 20)], surf90)
        layout = solve(cs, surf90, SolverParams(seed=1))
        assert check_hard(layout, cs, surf90) == []
        assert soft_score(layout, cs) == 0.0

    def test_worked_trio(self):
        surfaces = square_surface(120.0)
        assets = [asset("monitor", 50, 10, 35), asset("keyboard", 35, 12, 3),
                  asset("mouse", 6, 10, 4)]
        directives = [
            d("monitor", "global_region", region="C"),
            d("keyboard", "relative_position", relation="in_front_of",
              reference="monitor"),
            d("mouse", "relative_position", relation="right_of", reference="monitor"),
            d("mouse", "distance", relation="near", reference="monitor"),
        ]
        cs = compile_plan(directives, assets, surfaces)
        layout = solve(cs, surfaces, SolverParams(seed=3))
        assert check_hard(layout, cs, surfaces) == []
        mon, kb, mouse = layout["monitor"], layout["keyboard"], layout["mouse"]
        assert kb.y_cm < mon.y_cm
        assert mouse.x_cm > mon.x_cm
        from decorkit.scene import placed_footprint
        gap = placed_footprint(assets[2], mouse).gap(
            placed_footprint(assets[0], mon))
        assert gap < 15.0

    def test_infeasible_names_asset(self, surf90):
        # two 50-wide assets cannot sit side by side on a 90 cm surface
        assets = [asset("wide1", 50, 50), asset("wide2", 50, 50)]
        cs = compile_plan([d("wide1", "relative_position", relation="left_of",
                             reference="wide2")], assets, surf90)
        with pytest.raises(InfeasibleLayoutError) as err:
            solve(cs, surf90, SolverParams(seed=0, anneal_iters=10))
        assert err.value.asset_id in ("wide1", "wide2")

    def test_deterministic(self, surf90):
        assets = [asset("a", 20, 10), asset("b", 15, 15), asset("c", 8, 8)]
        directives = [
            d("a", "global_region", region="N"),
            d("b", "distance", relation="near", reference="a"),
            d("c", "alignment", relation="vertical_mid", reference="b"),
        ]
        cs = compile_plan(directives, assets, surf90)
        params = SolverParams(seed=42, anneal_iters=2000)
        l1 = solve(cs, surf90, params)
        l2 = solve(cs, surf90, params)
        assert layout_to_json(l1) == layout_to_json(l2)

    def test_translation_equivariance(self):
        from meshes import boxes_to_obj
        base = square_surface(90.0)
        shifted = extract_surfaces(load_mesh(
            boxes_to_obj([(500, 590, 300, 390, 0, 75)])))
        assets = [asset("a", 20, 10), asset("b", 15, 15)]
        directives = [d("a", "global_region", region="NE"),
                      d("b", "distance", relation="near", reference="a")]
        params = SolverParams(seed=5, anneal_iters=0)
        l0 = solve(compile_plan(directives, assets, base), base, params)
        l1 = solve(compile_plan(directives, assets, shifted), shifted, params)
        for aid in ("a", "b"):
            assert l1[aid].x_cm - l0[aid].x_cm == pytest.approx(500.0, abs=TOL)
            assert l1[aid].y_cm - l0[aid].y_cm == pytest.approx(300.0, abs=TOL)

    def test_score_upper_bound(self, surf90):
        assets = [asset("a", 20, 10), asset("b", 15, 15)]
        directives = [d("b", "distance", relation="near", reference="a"),
                      d("b", "alignment", relation="horizontal_mid", reference="a")]
        cs = compile_plan(directives, assets, surf90)
        layout = solve(cs, surf90, SolverParams(seed=9, anneal_iters=3000))
        score = soft_score(layout, cs)
        assert 0.0 <= score <= 2.0 + TOL

    def test_anneal_not_worse_than_constructive(self, surf90):
        assets = [asset("a", 20, 10), asset("b", 15, 15), asset("c", 10, 10)]
        directives = [
            d("a", "global_region", region="NW"),
            d("b", "distance", relation="far", reference="a"),
            d("c", "distance", relation="near", reference="b"),
        ]
        cs = compile_plan(directives, assets, surf90)
        baseline = solve(cs, surf90, SolverParams(seed=7, anneal_iters=0))
        annealed = solve(cs, surf90, SolverParams(seed=7, anneal_iters=5000))
        assert soft_score(annealed, cs) >= soft_score(baseline, cs) - TOL

    def test_anchor_keeps_asset_in_place(self, surf90):
        cs = compile_plan([], [asset("a", 20, 20)], surf90)
        anchors = {"a": AnchorTerm(70.0, 20.0)}
        layout = solve(cs, surf90, SolverParams(seed=1, anneal_iters=500),
                       anchors=anchors)
        assert (layout["a"].x_cm, layout["a"].y_cm) == (70.0, 20.0)

    def test_stacked_z_chain(self, surf90):
        assets = [asset("base", 40, 40, 12), asset("top", 10, 10, 5)]
        cs = compile_plan([d("top", "relative_position", relation="on_top_of",
                             reference="base")], assets, surf90)
        layout = solve(cs, surf90, SolverParams(seed=2, anneal_iters=100))
        assert layout["base"].z_cm == pytest.approx(75.0)
        assert layout["top"].z_cm == pytest.approx(87.0)
        assert layout["top"].stack_base == "base"


class TestBruteForce:
    def test_single_asset_global_ne(self):
        surfaces = square_surface(90.0)
        cs = compile_plan([d("a", "global_region", region="NE")],
                          [asset("a", 20, 20)], surfaces)
        params = SolverParams(grid_step_cm=18.0, seed=0)
        layout = brute_force_solve(cs, surfaces, params)
        assert layout["a"].x_cm > 60 and layout["a"].y_cm > 60
        assert check_hard(layout, cs, surfaces, params) == []

    def test_too_narrow_is_infeasible(self):
        surfaces = square_surface(90.0)
        assets = [asset("a", 50, 50), asset("b", 50, 50)]
        cs = compile_plan([d("a", "relative_position", relation="left_of",
                             reference="b")], assets, surfaces)
        with pytest.raises(InfeasibleLayoutError):
            brute_force_solve(cs, surfaces, SolverParams(grid_step_cm=18.0))

    def test_near_pair_achieves_touching(self):
        surfaces = square_surface(90.0)
        assets = [asset("a", 18, 18), asset("b", 18, 18)]
        cs = compile_plan([d("a", "distance", relation="near", reference="b")],
                          assets, surfaces)
        params = SolverParams(grid_step_cm=18.0)
        layout = brute_force_solve(cs, surfaces, params)
        assert soft_score(layout, cs, params) == pytest.approx(1.0, abs=TOL)

    def test_lattice_bound_enforced(self):
        surfaces = square_surface(90.0)
        cs = compile_plan([], [asset("a", 20, 20)], surfaces)
        with pytest.raises(ValueError):
            brute_force_solve(cs, surfaces, SolverParams(grid_step_cm=1.0))

    def test_solve_matches_oracle_small(self):
        surfaces = square_surface(90.0)
        assets = [asset("a", 30, 20), asset("b", 20, 20), asset("c", 18, 18)]
        directives = [
            d("a", "global_region", region="W"),
            d("b", "distance", relation="near", reference="a"),
            d("c", "alignment", relation="horizontal_mid", reference="b"),
        ]
        cs = compile_plan(directives, assets, surfaces)
        params = SolverParams(grid_step_cm=22.5, seed=0, anneal_iters=20000)
        got = soft_score(solve(cs, surfaces, params), cs, params)
        want = soft_score(brute_force_solve(cs, surfaces, params), cs, params)
        assert got == pytest.approx(want, abs=1e-9)
