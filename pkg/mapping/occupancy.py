"""
Occupancy integration

Raycasts posed point clouds into the log-odds grid, links newly observed
voxels under the Ideal Point and records which voxels changed state, so
the ESDF layer only ever sees occupancy crossings.
"""

import logging
import math
from collections import OrderedDict, deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from core.config import OccupancyConfig
from core.errors import DataError
from core.types import IDEAL_POINT, OccupancyState, VoxelKey
from core.voxel_store import VoxelInfo, VoxelStore

logger = logging.getLogger(__name__)

QUATERNION_TOLERANCE = 1e-6


@dataclass
class SensorFrame:
    """
    One posed depth measurement.

    translation in meters, rotation as a unit quaternion (qx, qy, qz, qw),
    points as an (N, 3) array in the sensor frame, meters.
    """
    timestamp: float
    translation: np.ndarray
    rotation: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(4)
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)

    def validate(self) -> None:
        if not math.isfinite(self.timestamp):
            raise DataError(f"non-finite timestamp {self.timestamp}")
        if not np.all(np.isfinite(self.translation)):
            raise DataError(f"frame {self.timestamp}: non-finite translation")
        norm = float(np.linalg.norm(self.rotation))
        if abs(norm - 1.0) > QUATERNION_TOLERANCE:
            raise DataError(f"frame {self.timestamp}: quaternion norm {norm:.9f} is not 1")
        if not np.all(np.isfinite(self.points)):
            raise DataError(f"frame {self.timestamp}: non-finite point coordinates")

    def world_points(self) -> np.ndarray:
        if len(self.points) == 0:
            return self.points.copy()
        return Rotation.from_quat(self.rotation).apply(self.points) + self.translation


@dataclass
class EpochCounters:
    """k, n and m of the complexity analysis"""
    k_initialized: int = 0
    n_expanded: int = 0
    m_observed_total: int = 0


class KeyQueue:
    """FIFO of distinct voxel keys; append of a queued key moves it to the back"""

    __slots__ = ("_keys",)

    def __init__(self, keys: Iterable[VoxelKey] = ()):
        self._keys: "OrderedDict[VoxelKey, None]" = OrderedDict.fromkeys(keys)

    def append(self, key: VoxelKey) -> None:
        self._keys[key] = None
        self._keys.move_to_end(key)

    def extend(self, keys: Iterable[VoxelKey]) -> None:
        for key in keys:
            self.append(key)

    def discard(self, key: VoxelKey) -> None:
        self._keys.pop(key, None)

    def popleft(self) -> VoxelKey:
        return self._keys.popitem(last=False)[0]

    def __len__(self) -> int:
        return len(self._keys)

    def __iter__(self) -> Iterator[VoxelKey]:
        return iter(self._keys)

    def __contains__(self, key: object) -> bool:
        return key in self._keys

    def __repr__(self) -> str:
        return f"KeyQueue({list(self._keys)})"


class UpdateQueues:
    """
    insertQueue / deleteQueue / updateQueue of one integration epoch.

    State changes are tracked against the state each voxel had when the
    epoch started, so a voxel sits in at most one of insert/delete and only
    when its net state crossed; a later crossing moves it to the back.
    """

    def __init__(self):
        self.insert_queue = KeyQueue()
        self.delete_queue = KeyQueue()
        self.update_queue: Deque[VoxelKey] = deque()
        self.newly_observed: List[VoxelKey] = []
        self.stats = EpochCounters()
        # key -> (state at epoch start, current state), ordered by last change
        self._transitions: Dict[VoxelKey, Tuple[OccupancyState, OccupancyState]] = {}

    def record_transition(self, key: VoxelKey, before: OccupancyState, after: OccupancyState) -> None:
        start = self._transitions.pop(key, (before, before))[0]
        self._transitions[key] = (start, after)

        was_occupied = start is OccupancyState.OCCUPIED
        now_occupied = after is OccupancyState.OCCUPIED
        self.insert_queue.discard(key)
        self.delete_queue.discard(key)
        if now_occupied and not was_occupied:
            self.insert_queue.append(key)
        elif was_occupied and not now_occupied:
            self.delete_queue.append(key)

    def crossings(self, obstacle_state: OccupancyState) -> Tuple[List[VoxelKey], List[VoxelKey]]:
        """(became obstacle, stopped being obstacle) for an arbitrary obstacle state"""
        inserts, deletes = [], []
        for key, (start, now) in self._transitions.items():
            if now is obstacle_state and start is not obstacle_state:
                inserts.append(key)
            elif start is obstacle_state and now is not obstacle_state:
                deletes.append(key)
        return inserts, deletes

    def for_complement(self) -> "UpdateQueues":
        """Queues of the Free-as-obstacle field used for signed distances"""
        queues = UpdateQueues()
        inserts, deletes = self.crossings(OccupancyState.FREE)
        queues.insert_queue.extend(inserts)
        queues.delete_queue.extend(deletes)
        queues.newly_observed = list(self.newly_observed)
        queues.stats.m_observed_total = self.stats.m_observed_total
        return queues

    def is_empty(self) -> bool:
        return not (self.insert_queue or self.delete_queue or self.update_queue or self.newly_observed)


def _voxel_of(point: Sequence[float]) -> VoxelKey:
    return VoxelKey(math.floor(point[0]), math.floor(point[1]), math.floor(point[2]))


def traverse_ray(start: Sequence[float], end: Sequence[float], voxel_size: float) -> List[VoxelKey]:
    """
    Incremental grid walk (Amanatides-Woo) from start to end, both in meters.

    Yields every voxel the segment passes through, in order, each once,
    including both endpoint voxels. The walk takes exactly one step per
    voxel boundary between the endpoint voxels, so it always lands on the
    end voxel even with floating-point ties.
    """
    p0 = [c / voxel_size for c in start]
    p1 = [c / voxel_size for c in end]
    current = list(_voxel_of(p0))
    target = _voxel_of(p1)
    keys = [VoxelKey(*current)]

    step = [0, 0, 0]
    t_max = [math.inf] * 3
    t_delta = [math.inf] * 3
    remaining = [0, 0, 0]
    for axis in range(3):
        d = p1[axis] - p0[axis]
        remaining[axis] = abs(target[axis] - current[axis])
        if remaining[axis] == 0:
            continue
        step[axis] = 1 if target[axis] > current[axis] else -1
        if d != 0.0:
            boundary = current[axis] + (1 if step[axis] > 0 else 0)
            t_max[axis] = (boundary - p0[axis]) / d
            t_delta[axis] = abs(1.0 / d)
        else:
            t_max[axis] = 0.0

    for _ in range(sum(remaining)):
        axis = min((a for a in range(3) if remaining[a] > 0), key=lambda a: t_max[a])
        current[axis] += step[axis]
        t_max[axis] += t_delta[axis]
        remaining[axis] -= 1
        keys.append(VoxelKey(*current))
    return keys


class OccupancyIntegrator:
    """
    Log-odds occupancy fusion.

    Per frame, every voxel gets at most one update: a voxel hit by any ray
    is not also missed by other rays of the same frame.
    """

    def __init__(self, store: VoxelStore, config: Optional[OccupancyConfig] = None):
        self.store = store
        self.config = config or OccupancyConfig()
        self.observed_count = 0
        self.last_timestamp: Optional[float] = None

    def state_of(self, record: Optional[VoxelInfo]) -> OccupancyState:
        if record is None or not record.obs:
            return OccupancyState.UNKNOWN
        if record.occ >= self.config.occupied_threshold:
            return OccupancyState.OCCUPIED
        return OccupancyState.FREE

    def occupancy_state(self, key: VoxelKey) -> OccupancyState:
        return self.state_of(self.store.index.lookup_unchecked(VoxelKey(*key)))

    def _ray_effects(self, frame: SensorFrame) -> Tuple[Dict[VoxelKey, None], Dict[VoxelKey, None]]:
        cfg = self.config
        origin = frame.translation
        hits: Dict[VoxelKey, None] = {}
        misses: Dict[VoxelKey, None] = {}
        for point in frame.world_points():
            ray = point - origin
            length = float(np.linalg.norm(ray))
            if length > cfg.max_ray_range:
                end = origin + ray * (cfg.max_ray_range / length)
                for key in traverse_ray(origin, end, cfg.voxel_size):
                    misses[key] = None
                continue
            keys = traverse_ray(origin, point, cfg.voxel_size)
            for key in keys[:-1]:
                misses[key] = None
            hits[keys[-1]] = None
        for key in hits:
            misses.pop(key, None)
        return hits, misses

    def _apply(self, record: VoxelInfo, hit: bool) -> None:
        cfg = self.config
        if cfg.deterministic:
            if hit:
                record.occ = cfg.log_odds_max
            elif record.occ < cfg.occupied_threshold:
                record.occ = cfg.log_odds_min
            return
        delta = cfg.log_odds_hit if hit else cfg.log_odds_miss
        record.occ = min(cfg.log_odds_max, max(cfg.log_odds_min, record.occ + delta))

    def _observe(self, record: VoxelInfo, queues: UpdateQueues) -> int:
        """First observation links the record under the Ideal Point"""
        if record.obs:
            return 0
        record.obs = True
        self.store.insert_into_dll(IDEAL_POINT, record.pos)
        queues.newly_observed.append(record.pos)
        self.observed_count += 1
        return 1

    def _record(self, record: VoxelInfo, before: OccupancyState, queues: UpdateQueues) -> None:
        after = self.state_of(record)
        if after is not before:
            queues.record_transition(record.pos, before, after)

    def set_occupancy(self, key: VoxelKey, occupied: bool, queues: UpdateQueues) -> None:
        """Observe key and force it to the clamped occupied or free log-odds"""
        record = self.store.allocate(VoxelKey(*key))
        before = self.state_of(record)
        self._observe(record, queues)
        record.occ = self.config.log_odds_max if occupied else self.config.log_odds_min
        self._record(record, before, queues)
        queues.stats.m_observed_total = self.observed_count

    def integrate_frame(self, frame: SensorFrame, queues: Optional[UpdateQueues] = None) -> UpdateQueues:
        """Raycast one frame into the grid and record state crossings in queues"""
        frame.validate()
        if self.last_timestamp is not None and frame.timestamp < self.last_timestamp:
            raise DataError(
                f"timestamp regression: {frame.timestamp} after {self.last_timestamp}"
            )
        self.last_timestamp = frame.timestamp
        queues = queues if queues is not None else UpdateQueues()

        hits, misses = self._ray_effects(frame)
        updates = [(key, False) for key in misses] + [(key, True) for key in hits]
        newly = 0
        for key, hit in updates:
            record = self.store.allocate(key)
            before = self.state_of(record)
            newly += self._observe(record, queues)
            self._apply(record, hit)
            self._record(record, before, queues)

        queues.stats.m_observed_total = self.observed_count
        logger.debug(
            "Frame t=%.3f: %d points, %d hits, %d misses, %d newly observed",
            frame.timestamp, len(frame.points), len(hits), len(misses), newly,
        )
        return queues
