"""
VoxField API - read-only distance query service

Serves distance, gradient and signed-distance queries from the latest
FieldSnapshot of a map built by replaying a scenario.
"""

import os
import threading
from datetime import datetime, timezone
from typing import Any, Dict, Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from core.config import RunConfig, load_config
from core.errors import ConfigError, VoxFieldError
from mapping.esdf_map import EsdfMap, FieldSnapshot
from replay.runner import run, scenario_source
from replay.scenario import ScenarioSpec, load_scenario

API_VERSION = "1.0.0"

app = FastAPI(
    title="VoxField - Distance Field Query API",
    description="Incremental Euclidean distance field queries over a replayed map",
    version=API_VERSION,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_methods=["GET", "POST"],
    allow_headers=["*"],
)


class MapService:
    """Owns the current map; queries only ever touch its snapshot"""

    def __init__(self, config: Optional[RunConfig] = None):
        self.config = config or RunConfig()
        self._lock = threading.Lock()
        self.esdf_map = EsdfMap.from_config(self.config)
        self.snapshot: FieldSnapshot = self.esdf_map.snapshot()
        self.stats: Dict[str, Any] = {}

    def build(self, spec: ScenarioSpec, overrides: Optional[Dict[str, str]] = None) -> Dict[str, Any]:
        config = self.config.with_overrides(overrides) if overrides else self.config
        result = run(config, scenario_source(spec))
        with self._lock:
            self.config = config
            self.esdf_map = result.esdf_map
            self.snapshot = result.esdf_map.snapshot()
            self.stats = result.stats()
        return self.stats


_service: Optional[MapService] = None


def get_service() -> MapService:
    global _service
    if _service is None:
        config_path = os.getenv("VOXFIELD_API_CONFIG")
        _service = MapService(load_config(config_path) if config_path else None)
        scenario_path = os.getenv("VOXFIELD_API_SCENARIO")
        if scenario_path:
            _service.build(load_scenario(scenario_path))
    return _service


def set_service(service: Optional[MapService]) -> None:
    global _service
    _service = service


class BuildRequest(BaseModel):
    scenario: ScenarioSpec
    overrides: Dict[str, str] = Field(default_factory=dict)


@app.get("/health")
async def health():
    service = get_service()
    return {
        "status": "healthy",
        "service": "voxfield-query",
        "version": API_VERSION,
        "epoch": service.snapshot.epoch,
        "signed_mode": service.snapshot.signed_mode,
        "memory_stats": service.esdf_map.memory_stats().to_dict(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


@app.get("/distance")
async def distance(x: float, y: float, z: float, interpolate: bool = False):
    result = get_service().snapshot.query_distance((x, y, z), interpolate=interpolate)
    # JSON has no infinity
    return {
        "distance": result.distance if result.observed and result.distance != float("inf") else None,
        "observed": result.observed,
    }


@app.get("/gradient")
async def gradient(x: float, y: float, z: float):
    result = get_service().snapshot.query_gradient((x, y, z))
    return {"gradient": list(result.gradient), "available": result.available}


@app.get("/signed_distance")
async def signed_distance(x: float, y: float, z: float):
    try:
        result = get_service().snapshot.signed_distance((x, y, z))
    except ConfigError as e:
        raise HTTPException(409, str(e))
    finite = result.observed and abs(result.distance) != float("inf")
    return {"signed_distance": result.distance if finite else None, "observed": result.observed}


@app.get("/stats")
async def stats():
    return get_service().stats


@app.post("/map/build")
def build_map(request: BuildRequest):
    """Replay a scenario into a fresh map and publish its snapshot"""
    try:
        stats = get_service().build(request.scenario, request.overrides)
    except VoxFieldError as e:
        raise HTTPException(400, str(e))
    return {"success": True, "stats": stats}


if __name__ == "__main__":
    import uvicorn
    from dotenv import load_dotenv

    load_dotenv()
    uvicorn.run(app, host="0.0.0.0", port=int(os.getenv("PORT", 8000)))
