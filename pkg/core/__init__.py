"""VoxField Core Module"""
from .config import (
    EsdfConfig, IndexBackend, IndexConfig, OccupancyConfig, QueueDiscipline,
    RunConfig, SliceRequest, UpdateRule, VoxelBox, load_config,
)
from .errors import (
    BoundsError, ConfigError, CorruptionError, DataError, DllError, ParseError,
    ResourceError, ScenarioSpecError, VoxFieldError,
)
from .types import IDEAL_POINT, BlockKey, Connectivity, IdealPoint, OccupancyState, VoxelKey
from .voxel_index import MemoryStats, VoxelIndex, block_of, create_index
from .voxel_store import VoxelInfo, VoxelStore
