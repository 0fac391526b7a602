import pytest
from fastapi.testclient import TestClient

from catalogs import write_catalog
from meshes import desk_with_shelf_obj

from decorkit.llm import RuleStubClient
from decorkit.retrieval import load_catalog
from decorkit.server import create_app


@pytest.fixture(scope="module")
def api(tmp_path_factory):
    path = tmp_path_factory.mktemp("srv") / "catalog.json"
    write_catalog(path)
    app = create_app(client=RuleStubClient(), catalog=load_catalog(path))
    return TestClient(app)


@pytest.fixture(scope="module")
def job(api):
    body = {"prompt": "a cozy desk", "n_assets": 8,
            "mesh_obj": desk_with_shelf_obj(), "seed": 5}
    resp = api.post("/jobs", json=body)
    assert resp.status_code == 200, resp.text
    return resp.json()


class TestJobs:
    def test_create_and_fetch(self, api, job):
        got = api.get(f"/jobs/{job['job_id']}")
        assert got.status_code == 200
        data = got.json()
        assert data["status"] == "done"
        assert len(data["scene"]["assets"]) == 8

    def test_unknown_job_404(self, api):
        assert api.get("/jobs/doesnotexist").status_code == 404

    def test_infeasible_job_409(self, api):
        tiny = desk_with_shelf_obj()
        body = {"prompt": "x", "n_assets": 1, "mesh_obj": tiny, "seed": 1,
                "params": {"anneal_iters": 10, "grid_step_cm": 400.0}}
        resp = api.post("/jobs", json=body)
        assert resp.status_code in (409, 422)


class TestScenes:
    def test_get_scene_and_revisions(self, api, job):
        resp = api.get(f"/scenes/{job['scene_id']}")
        data = resp.json()
        assert data["revision"] == data["revisions"] - 1
        assert "layout" in data["scene"]

    def test_structured_edit_appends_revision(self, api, job):
        scene = api.get(f"/scenes/{job['scene_id']}").json()["scene"]
        target = scene["assets"][0]["id"]
        before = api.get(f"/scenes/{job['scene_id']}").json()["revisions"]
        resp = api.post(f"/scenes/{job['scene_id']}/edits",
                        json={"ops": [{"kind": "remove", "target": target}]})
        assert resp.status_code == 200, resp.text
        data = resp.json()
        assert data["revisions"] == before + 1
        ids = [a["id"] for a in data["scene"]["assets"]]
        assert target not in ids
        # prior revision still addressable
        old = api.get(f"/scenes/{job['scene_id']}", params={"rev": before - 1})
        assert target in [a["id"] for a in old.json()["scene"]["assets"]]

    def test_freeform_edit(self, api, job):
        scene = api.get(f"/scenes/{job['scene_id']}").json()["scene"]
        name = scene["assets"][0]["name"]
        resp = api.post(f"/scenes/{job['scene_id']}/edits",
                        json={"instruction": f"remove the {name}"})
        assert resp.status_code == 200, resp.text
        assert resp.json()["ops"][0]["kind"] == "remove"

    def test_bad_edit_is_422(self, api, job):
        resp = api.post(f"/scenes/{job['scene_id']}/edits", json={})
        assert resp.status_code == 422

    def test_unresolvable_instruction_is_422(self, api, job):
        resp = api.post(f"/scenes/{job['scene_id']}/edits",
                        json={"instruction": "remove the grand piano"})
        assert resp.status_code == 422
        assert resp.json()["error"]["type"] == "UnresolvableTargetError"

    def test_infeasible_edit_is_409_and_keeps_scene(self, api, job):
        scene = api.get(f"/scenes/{job['scene_id']}").json()
        target = scene["scene"]["assets"][0]["id"]
        revisions = scene["revisions"]
        resp = api.post(
            f"/scenes/{job['scene_id']}/edits",
            json={"ops": [{"kind": "resize", "target": target,
                           "dims": {"width_cm": 5000.0, "depth_cm": 5000.0,
                                    "height_cm": 10.0}}]})
        assert resp.status_code == 409
        assert api.get(f"/scenes/{job['scene_id']}").json()["revisions"] == revisions


class TestSvgAndMetrics:
    def test_svg(self, api, job):
        resp = api.get(f"/scenes/{job['scene_id']}/svg", params={"surface": 0})
        assert resp.status_code == 200
        assert resp.headers["content-type"].startswith("image/svg+xml")
        assert resp.text.startswith("<svg")

    def test_svg_bad_surface(self, api, job):
        resp = api.get(f"/scenes/{job['scene_id']}/svg", params={"surface": 42})
        assert resp.status_code == 404

    def test_metrics(self, api, job):
        resp = api.get(f"/scenes/{job['scene_id']}/metrics")
        data = resp.json()
        assert data["oob_rate"] == 0.0
        assert data["bbl_m3"] == 0.0
        assert data["n_scenes"] == 1
