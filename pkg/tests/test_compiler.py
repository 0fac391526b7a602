import pytest

from decorkit.compiler import compile_plan, construction_order
from decorkit.errors import CompileError
from decorkit.scene import AssetSpec, PlanDirective


def asset(id, w=20.0, d=20.0, h=10.0, surface=0):
    return AssetSpec(id=id, name=id, width_cm=w, depth_cm=d, height_cm=h,
                     surface_index=surface)


def d(subject, kind, **kw):
    return PlanDirective(subject=subject, kind=kind, **kw)


class TestCompilePlan:
    def test_distance_is_soft(self, desk_surfaces):
        assets = [asset("mouse", 6, 10), asset("monitor", 50, 10)]
        cs = compile_plan([d("mouse", "distance", relation="near", reference="monitor")],
                          assets, desk_surfaces)
        assert len(cs.soft_pairs) == 1
        assert not cs.hard_pairs

    def test_relative_is_hard(self, desk_surfaces):
        assets = [asset("keyboard", 35, 12), asset("monitor", 50, 10)]
        cs = compile_plan([d("keyboard", "relative_position",
                             relation="in_front_of", reference="monitor")],
                          assets, desk_surfaces)
        assert len(cs.hard_pairs) == 1
        assert not cs.soft_pairs

    def test_stacked_global_rejected(self, desk_surfaces):
        assets = [asset("clock", 8, 4, 6), asset("box", 20, 15, 10)]
        directives = [
            d("clock", "relative_position", relation="on_top_of", reference="box"),
            d("clock", "global_region", region="C"),
        ]
        with pytest.raises(CompileError) as err:
            compile_plan(directives, assets, desk_surfaces)
        assert err.value.code == "stacked_global"

    def test_bucket_partition(self, desk_surfaces):
        assets = [asset("a"), asset("b"), asset("c")]
        directives = [
            d("a", "global_region", region="NE"),
            d("b", "distance", relation="far", reference="a"),
            d("b", "alignment", relation="vertical_mid", reference="a"),
            d("c", "relative_position", relation="left_of", reference="a"),
            d("c", "orientation", direction="left"),
        ]
        cs = compile_plan(directives, assets, desk_surfaces)
        total = (len(cs.soft_pairs) + len(cs.hard_pairs)
                 + len(cs.global_directives) + len(cs.fixed_orientations))
        assert total == len(directives)
        assert cs.fixed_orientations["c"].yaw_deg == 90

    def test_debug_dump_round_trips_as_json(self, desk_surfaces):
        import json
        assets = [asset("a"), asset("b")]
        cs = compile_plan([d("a", "distance", relation="near", reference="b")],
                          assets, desk_surfaces)
        assert json.loads(json.dumps(cs.to_debug_json()))["soft_pairs"]


class TestConstructionOrder:
    def test_base_before_stacked(self, desk_surfaces):
        assets = [asset("lamp", 8, 8, 20), asset("base", 30, 30, 10)]
        cs = compile_plan([d("lamp", "relative_position", relation="on_top_of",
                             reference="base")], assets, desk_surfaces)
        assert construction_order(cs)[0] == ["base", "lamp"]

    def test_reference_before_subject(self, desk_surfaces):
        assets = [asset("monitor", 50, 10), asset("keyboard", 35, 12),
                  asset("mouse", 6, 10)]
        directives = [
            d("keyboard", "relative_position", relation="in_front_of",
              reference="monitor"),
            d("mouse", "relative_position", relation="right_of", reference="monitor"),
        ]
        order = construction_order(compile_plan(directives, assets, desk_surfaces))[0]
        assert order[0] == "monitor"

    def test_cycle_falls_back_to_area_order(self, desk_surfaces):
        assets = [asset("a", 10, 10), asset("b", 30, 30)]
        directives = [
            d("a", "relative_position", relation="left_of", reference="b"),
            d("b", "relative_position", relation="left_of", reference="a"),
        ]
        order = construction_order(compile_plan(directives, assets, desk_surfaces))[0]
        assert order == ["b", "a"]  # larger footprint first, no error

    def test_order_is_permutation_and_deterministic(self, desk_surfaces):
        assets = [asset(f"a{i}", 10 + i, 10) for i in range(6)]
        directives = [d("a0", "distance", relation="near", reference="a5")]
        cs = compile_plan(directives, assets, desk_surfaces)
        o1 = construction_order(cs)[0]
        o2 = construction_order(cs)[0]
        assert o1 == o2
        assert sorted(o1) == sorted(a.id for a in assets)
