"""
Synthetic scenarios

A ScenarioSpec describes boxes and spheres in a world, a sensor
trajectory and a sensor model. generate_scenario ray-casts the world
analytically from every pose and yields SensorFrames, so runs need no
recorded data. Obstacle schedules use frame indices: an obstacle exists
in frames appear_epoch <= i < disappear_epoch.
"""

import json
import logging
import math
from pathlib import Path
from typing import Iterator, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from scipy.spatial.transform import Rotation

from core.errors import ScenarioSpecError
from mapping.occupancy import QUATERNION_TOLERANCE, SensorFrame

logger = logging.getLogger(__name__)

Vec3 = Tuple[float, float, float]

# Rays with no return are emitted this far past max_range so integration
# treats them as free-space only.
NO_RETURN_FACTOR = 1.5


class ObstacleSpec(BaseModel):
    kind: Literal["box", "sphere"] = "box"
    min_corner: Optional[Vec3] = None
    max_corner: Optional[Vec3] = None
    center: Optional[Vec3] = None
    radius: Optional[float] = None
    appear_epoch: int = Field(default=0, ge=0)
    disappear_epoch: Optional[int] = None

    @model_validator(mode="after")
    def _check_geometry(self) -> "ObstacleSpec":
        if self.kind == "box":
            if self.min_corner is None or self.max_corner is None:
                raise ValueError("box needs min_corner and max_corner")
            if any(hi <= lo for lo, hi in zip(self.min_corner, self.max_corner)):
                raise ValueError(f"zero-volume box {self.min_corner}..{self.max_corner}")
        else:
            if self.center is None or self.radius is None:
                raise ValueError("sphere needs center and radius")
            if self.radius <= 0:
                raise ValueError(f"zero-volume sphere radius {self.radius}")
        if self.disappear_epoch is not None and self.disappear_epoch <= self.appear_epoch:
            raise ValueError("disappear_epoch must be after appear_epoch")
        return self

    def present(self, frame_index: int) -> bool:
        if frame_index < self.appear_epoch:
            return False
        return self.disappear_epoch is None or frame_index < self.disappear_epoch


class PoseSpec(BaseModel):
    timestamp: float
    position: Vec3
    orientation: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 1.0)

    @field_validator("orientation")
    @classmethod
    def _check_unit(cls, value):
        norm = math.sqrt(sum(c * c for c in value))
        if abs(norm - 1.0) > QUATERNION_TOLERANCE:
            raise ValueError(f"orientation quaternion norm {norm} is not 1")
        return value


class SensorModel(BaseModel):
    """
    fan: rays_per_frame spread over a horizontal x vertical field of view
    around the sensor +x axis. sphere: a Fibonacci lattice over all
    directions, randomly rotated per frame from the scenario seed.
    """
    kind: Literal["fan", "sphere"] = "sphere"
    max_range: float = Field(default=4.0, gt=0.0)
    rays_per_frame: int = Field(default=500, ge=1)
    horizontal_fov_deg: float = Field(default=90.0, gt=0.0, le=360.0)
    vertical_fov_deg: float = Field(default=60.0, gt=0.0, le=180.0)


class ScenarioSpec(BaseModel):
    seed: int = 0
    scenario_id: str = "scenario"
    world_min: Vec3 = (0.0, 0.0, 0.0)
    world_max: Vec3 = (1.0, 1.0, 1.0)
    obstacles: List[ObstacleSpec] = Field(default_factory=list)
    trajectory: List[PoseSpec] = Field(default_factory=list)
    sensor: SensorModel = Field(default_factory=SensorModel)

    @model_validator(mode="after")
    def _check_world(self) -> "ScenarioSpec":
        if any(hi <= lo for lo, hi in zip(self.world_min, self.world_max)):
            raise ValueError(f"empty world bounds {self.world_min}..{self.world_max}")
        for pose in self.trajectory:
            if any(not lo <= c <= hi for c, lo, hi in zip(pose.position, self.world_min, self.world_max)):
                raise ValueError(f"pose at t={pose.timestamp} lies outside the world bounds")
        stamps = [p.timestamp for p in self.trajectory]
        if stamps != sorted(stamps):
            raise ValueError("trajectory timestamps must be non-decreasing")
        return self


def parse_scenario(data: Union[dict, str]) -> ScenarioSpec:
    try:
        if isinstance(data, str):
            return ScenarioSpec.model_validate_json(data)
        return ScenarioSpec.model_validate(data)
    except ValidationError as e:
        raise ScenarioSpecError(str(e)) from e


def load_scenario(path: Union[str, Path]) -> ScenarioSpec:
    path = Path(path)
    if not path.is_file():
        raise ScenarioSpecError(f"scenario file not found: {path}")
    return parse_scenario(path.read_text())


# ----------------------------------------------------------------------
# analytic ray casting
# ----------------------------------------------------------------------

def _fibonacci_directions(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def _fan_directions(sensor: SensorModel) -> np.ndarray:
    h = math.radians(sensor.horizontal_fov_deg)
    v = math.radians(sensor.vertical_fov_deg)
    rows = max(1, int(round(math.sqrt(sensor.rays_per_frame * v / h))))
    cols = max(1, sensor.rays_per_frame // rows)
    az, el = np.meshgrid(
        np.linspace(-h / 2, h / 2, cols),
        np.linspace(-v / 2, v / 2, rows),
    )
    az, el = az.ravel(), el.ravel()
    return np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=1)


def _random_rotation(rng: np.random.Generator) -> Rotation:
    q = rng.normal(size=4)
    return Rotation.from_quat(q / np.linalg.norm(q))


def ray_box_distances(origin: np.ndarray, dirs: np.ndarray, lo: Vec3, hi: Vec3) -> np.ndarray:
    """Entry distance along each unit direction (slab method); inf on a miss or from inside"""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t0 = (np.asarray(lo) - origin) * inv
        t1 = (np.asarray(hi) - origin) * inv
    t_near = np.nanmax(np.minimum(t0, t1), axis=1)
    t_far = np.nanmin(np.maximum(t0, t1), axis=1)
    hit = (t_near <= t_far) & (t_near > 0.0)
    return np.where(hit, t_near, np.inf)


def ray_sphere_distances(origin: np.ndarray, dirs: np.ndarray, center: Vec3, radius: float) -> np.ndarray:
    """Nearest positive intersection along each unit direction; inf on a miss or from inside"""
    oc = origin - np.asarray(center)
    b = dirs @ oc
    c = float(oc @ oc) - radius * radius
    disc = b * b - c
    root = np.sqrt(np.clip(disc, 0.0, None))
    t = -b - root
    return np.where((disc >= 0.0) & (t > 0.0), t, np.inf)


def generate_scenario(spec: ScenarioSpec, no_return_range: Optional[float] = None) -> Iterator[SensorFrame]:
    """
    One SensorFrame per trajectory pose.

    Each ray returns the nearest obstacle surface within max_range. Rays
    without a return are emitted at no_return_range (default
    1.5 x max_range). Identical specs yield identical frames.
    """
    sensor = spec.sensor
    far = no_return_range if no_return_range is not None else NO_RETURN_FACTOR * sensor.max_range
    rng = np.random.default_rng(spec.seed)
    base = _fibonacci_directions(sensor.rays_per_frame) if sensor.kind == "sphere" else _fan_directions(sensor)

    for index, pose in enumerate(spec.trajectory):
        local = _random_rotation(rng).apply(base) if sensor.kind == "sphere" else base
        orientation = Rotation.from_quat(pose.orientation)
        dirs = orientation.apply(local)
        origin = np.asarray(pose.position, dtype=float)

        t = np.full(len(dirs), np.inf)
        for obstacle in spec.obstacles:
            if not obstacle.present(index):
                continue
            if obstacle.kind == "box":
                d = ray_box_distances(origin, dirs, obstacle.min_corner, obstacle.max_corner)
            else:
                d = ray_sphere_distances(origin, dirs, obstacle.center, obstacle.radius)
            t = np.minimum(t, d)
        t = np.where(t <= sensor.max_range, t, far)

        yield SensorFrame(
            timestamp=pose.timestamp,
            translation=origin,
            rotation=np.asarray(pose.orientation, dtype=float),
            points=local * t[:, None],
        )


def random_scenario(
    seed: int,
    size: float = 1.6,
    obstacle_count: int = 6,
    frames: int = 6,
    churn: bool = True,
    rays_per_frame: int = 800,
) -> ScenarioSpec:
    """
    Random cube world of edge `size` meters with boxes and spheres and a
    trajectory through its middle. With churn, some obstacles appear late
    and some disappear, so the run exercises both queues.
    """
    rng = np.random.default_rng(seed)
    obstacles = []
    for _ in range(obstacle_count):
        appear, disappear = 0, None
        # schedules need a second frame to take effect in
        if churn and frames > 1:
            roll = rng.random()
            if roll < 0.25:
                appear = int(rng.integers(1, frames))
            elif roll < 0.5:
                disappear = int(rng.integers(1, frames))
        center = rng.uniform(0.15 * size, 0.85 * size, size=3)
        if rng.random() < 0.5:
            half = rng.uniform(0.04 * size, 0.12 * size, size=3)
            obstacles.append(ObstacleSpec(
                kind="box",
                min_corner=tuple((center - half).tolist()),
                max_corner=tuple((center + half).tolist()),
                appear_epoch=appear,
                disappear_epoch=disappear,
            ))
        else:
            obstacles.append(ObstacleSpec(
                kind="sphere",
                center=tuple(center.tolist()),
                radius=float(rng.uniform(0.05 * size, 0.12 * size)),
                appear_epoch=appear,
                disappear_epoch=disappear,
            ))

    trajectory = []
    for i in range(frames):
        position = rng.uniform(0.35 * size, 0.65 * size, size=3)
        yaw = rng.uniform(-math.pi, math.pi)
        quat = Rotation.from_euler("z", yaw).as_quat()
        trajectory.append(PoseSpec(
            timestamp=0.25 * i,
            position=tuple(position.tolist()),
            orientation=tuple(quat.tolist()),
        ))

    return ScenarioSpec(
        seed=seed,
        scenario_id=f"random-{seed}",
        world_min=(0.0, 0.0, 0.0),
        world_max=(size, size, size),
        obstacles=obstacles,
        trajectory=trajectory,
        sensor=SensorModel(kind="sphere", max_range=size, rays_per_frame=rays_per_frame),
    )


def save_scenario(spec: ScenarioSpec, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(spec.model_dump(mode="json"), indent=2))
