"""
VoxField configuration

Pydantic models for every configurable layer plus the flat key=value
loader used by the replay CLI and the query API.

File format (read with python-dotenv):

    index.backend=HashedBlocks
    index.block_size=8
    occupancy.voxel_size=0.1
    esdf.connectivity=C24
    run.update_period=0.5

Precedence: file < VOXFIELD_<SECTION>_<KEY> environment < --section.key flags.
"""

import math
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .types import Connectivity

ENV_PREFIX = "VOXFIELD_"
SECTIONS = ("index", "occupancy", "esdf", "run")


class IndexBackend(Enum):
    DENSE_ARRAY = "DenseArray"
    HASHED_BLOCKS = "HashedBlocks"


class QueueDiscipline(Enum):
    FIFO = "FIFO"
    PRIORITY_BY_DISTANCE = "PriorityByDistance"


class UpdateRule(Enum):
    EUCLIDEAN_CLOSEST_OBSTACLE = "EuclideanClosestObstacle"
    QUASI_EUCLIDEAN = "QuasiEuclidean"


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


class VoxelBox(BaseModel):
    """Axis-aligned voxel box, min inclusive, max exclusive"""
    model_config = ConfigDict(frozen=True)

    min_key: Tuple[int, int, int]
    max_key: Tuple[int, int, int]

    @model_validator(mode="after")
    def _check_extent(self) -> "VoxelBox":
        if any(hi <= lo for lo, hi in zip(self.min_key, self.max_key)):
            raise ValueError(f"empty voxel box {self.min_key}..{self.max_key}")
        return self

    @property
    def shape(self) -> Tuple[int, int, int]:
        return tuple(hi - lo for lo, hi in zip(self.min_key, self.max_key))

    def contains(self, key: Tuple[int, int, int]) -> bool:
        return all(lo <= c < hi for c, lo, hi in zip(key, self.min_key, self.max_key))

    @classmethod
    def parse(cls, text: str) -> "VoxelBox":
        """Parse 'x0,y0,z0:x1,y1,z1'"""
        try:
            lo, hi = text.split(":")
            return cls(
                min_key=tuple(int(v) for v in lo.split(",")),
                max_key=tuple(int(v) for v in hi.split(",")),
            )
        except ValueError as e:
            raise ConfigError(f"invalid voxel box '{text}': {e}") from e


class IndexConfig(BaseModel):
    backend: IndexBackend = IndexBackend.HASHED_BLOCKS
    bounds: Optional[VoxelBox] = None
    block_size: int = 8

    @field_validator("bounds", mode="before")
    @classmethod
    def _parse_bounds(cls, value: Any) -> Any:
        if isinstance(value, str):
            return VoxelBox.parse(value) if value.strip() else None
        return value

    @model_validator(mode="after")
    def _check_backend(self) -> "IndexConfig":
        if self.backend is IndexBackend.DENSE_ARRAY and self.bounds is None:
            raise ValueError("DenseArray backend requires bounds")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        return self


class OccupancyConfig(BaseModel):
    voxel_size: float = Field(default=0.1, gt=0.0)
    log_odds_hit: float = Field(default=0.85, gt=0.0)
    log_odds_miss: float = Field(default=-0.40, lt=0.0)
    log_odds_min: float = -2.0
    log_odds_max: float = 3.5
    occupied_threshold: float = logit(0.7)
    max_ray_range: float = Field(default=5.0, gt=0.0)
    deterministic: bool = False

    @model_validator(mode="after")
    def _check_thresholds(self) -> "OccupancyConfig":
        if not self.log_odds_min < self.occupied_threshold < self.log_odds_max:
            raise ValueError("require log_odds_min < occupied_threshold < log_odds_max")
        return self


class EsdfConfig(BaseModel):
    connectivity: Connectivity = Connectivity.C24
    queue_discipline: QueueDiscipline = QueueDiscipline.FIFO
    update_rule: UpdateRule = UpdateRule.EUCLIDEAN_CLOSEST_OBSTACLE
    signed_mode: bool = False


class SliceRequest(BaseModel):
    model_config = ConfigDict(frozen=True)

    axis: str = "z"
    index: int = 0
    max_distance: float = 10.0

    @field_validator("axis")
    @classmethod
    def _check_axis(cls, value: str) -> str:
        if value not in ("x", "y", "z"):
            raise ValueError(f"slice axis must be x, y or z, got '{value}'")
        return value

    @classmethod
    def parse(cls, text: str) -> "SliceRequest":
        """Parse 'axis=z,index=K[,max=D]'"""
        fields: Dict[str, Any] = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            name, _, value = part.partition("=")
            if name == "max":
                name = "max_distance"
            fields[name] = value
        try:
            return cls(**fields)
        except ValidationError as e:
            raise ConfigError(f"invalid slice request '{text}': {e}") from e


class RunSettings(BaseModel):
    update_period: float = Field(default=0.5, gt=0.0)
    output_dir: Path = Path("out")
    slices: List[SliceRequest] = Field(default_factory=list)
    verify: bool = False
    error_per_epoch: bool = False

    @field_validator("slices", mode="before")
    @classmethod
    def _parse_slices(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [SliceRequest.parse(v) for v in value.split(";") if v.strip()]
        return value


class RunConfig(BaseModel):
    index: IndexConfig = Field(default_factory=IndexConfig)
    occupancy: OccupancyConfig = Field(default_factory=OccupancyConfig)
    esdf: EsdfConfig = Field(default_factory=EsdfConfig)
    run: RunSettings = Field(default_factory=RunSettings)

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        """Return a copy with flat 'section.key' overrides applied"""
        data = self.model_dump()
        _apply_flat(data, overrides)
        return _validate(data)


def _apply_flat(data: Dict[str, Dict[str, Any]], flat: Mapping[str, Any]) -> None:
    for dotted, value in flat.items():
        section, _, key = dotted.partition(".")
        if section not in SECTIONS or not key:
            raise ConfigError(f"unknown config key '{dotted}'")
        fields = RunConfig.model_fields[section].annotation.model_fields
        if key not in fields:
            raise ConfigError(f"unknown config key '{dotted}'")
        if value == "" and fields[key].default is None:
            value = None
        data[section][key] = value


def _validate(data: Dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, str]:
    """Collect VOXFIELD_<SECTION>_<KEY> variables as flat 'section.key' overrides"""
    environ = os.environ if environ is None else environ
    flat = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):].lower()
        section, _, key = rest.partition("_")
        if section in SECTIONS and key:
            flat[f"{section}.{key}"] = value
    return flat


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Load a RunConfig from a key=value file, environment and explicit overrides"""
    flat: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        flat.update({k: v for k, v in dotenv_values(path).items() if v is not None})
    flat.update(env_overrides(environ))
    flat.update(overrides or {})

    data = RunConfig().model_dump()
    _apply_flat(data, flat)
    return _validate(data)
