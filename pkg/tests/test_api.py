import inspect

import pytest
from fastapi.testclient import TestClient

from api import main
from core.config import RunConfig
from replay.scenario import ObstacleSpec, PoseSpec, ScenarioSpec, SensorModel


def scenario_body():
    spec = ScenarioSpec(
        scenario_id="api",
        world_max=(3.0, 2.0, 2.0),
        obstacles=[ObstacleSpec(kind="box", min_corner=(1.0, 0.6, 0.6), max_corner=(1.4, 1.4, 1.4))],
        trajectory=[PoseSpec(timestamp=0.0, position=(0.5, 1.0, 1.0))],
        sensor=SensorModel(kind="fan", max_range=2.0, rays_per_frame=400),
    )
    return spec.model_dump(mode="json")


@pytest.fixture
def client():
    config = RunConfig().with_overrides({"occupancy.voxel_size": "0.2", "occupancy.max_ray_range": "2.0"})
    main.set_service(main.MapService(config))
    yield TestClient(main.app)
    main.set_service(None)


def test_health_on_empty_map(client):
    response = client.get("/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "healthy"
    assert body["epoch"] == 0
    assert body["memory_stats"] == {"allocated_voxel_records": 0, "allocated_blocks": 0}


def test_distance_unobserved(client):
    response = client.get("/distance", params={"x": 0.1, "y": 0.1, "z": 0.1})
    assert response.json() == {"distance": None, "observed": False}


def test_build_then_query(client):
    response = client.post("/map/build", json={"scenario": scenario_body()})
    assert response.status_code == 200
    assert response.json()["stats"]["scenario_id"] == "api"

    near = client.get("/distance", params={"x": 0.7, "y": 1.0, "z": 1.0}).json()
    assert near["observed"]
    assert 0.0 < near["distance"] <= 0.4

    gradient = client.get("/gradient", params={"x": 0.5, "y": 1.0, "z": 1.0}).json()
    assert set(gradient) == {"gradient", "available"}
    assert len(gradient["gradient"]) == 3

    stats = client.get("/stats").json()
    assert stats["epochs"] >= 1
    assert client.get("/health").json()["epoch"] >= 1


def test_signed_distance_requires_signed_mode(client):
    response = client.get("/signed_distance", params={"x": 0.5, "y": 1.0, "z": 1.0})
    assert response.status_code == 409


def test_signed_distance_after_build(client):
    body = {"scenario": scenario_body(), "overrides": {"esdf.signed_mode": "true"}}
    assert client.post("/map/build", json=body).status_code == 200
    free = client.get("/signed_distance", params={"x": 0.7, "y": 1.0, "z": 1.0}).json()
    assert free["observed"]
    assert free["signed_distance"] > 0


def test_build_rejects_bad_override(client):
    body = {"scenario": scenario_body(), "overrides": {"index.block_size": "0"}}
    assert client.post("/map/build", json=body).status_code == 400


def test_build_rejects_degenerate_scenario(client):
    body = scenario_body()
    body["obstacles"][0]["max_corner"] = body["obstacles"][0]["min_corner"]
    assert client.post("/map/build", json={"scenario": body}).status_code == 422


def test_build_runs_off_the_event_loop():
    # builds run in the threadpool, queries stay on the event loop
    assert not inspect.iscoroutinefunction(main.build_map)
    assert inspect.iscoroutinefunction(main.distance)
