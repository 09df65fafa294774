"""
EsdfMap - the mapping facade

Binds the voxel index, occupancy integration and one or two ESDF layers:

    frames -> integrate_frame -> UpdateQueues -> run_epoch -> field

With signed mode on, a second layer treats Free voxels as obstacles; the
signed distance is the difference of the two fields.
"""

import logging
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.config import (
    EsdfConfig, IndexConfig, OccupancyConfig, RunConfig, UpdateRule,
)
from core.errors import ConfigError
from core.types import IDEAL_POINT, OccupancyState, VoxelKey, squared_distance
from core.voxel_index import MemoryStats, create_index
from core.voxel_store import INF, VoxelInfo, VoxelStore
from .esdf_updater import EpochReport, EsdfUpdater
from .occupancy import OccupancyIntegrator, SensorFrame, UpdateQueues

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DistanceResult:
    distance: float
    observed: bool


@dataclass(frozen=True)
class GradientResult:
    gradient: Tuple[float, float, float]
    available: bool


UNAVAILABLE_GRADIENT = GradientResult(gradient=(0.0, 0.0, 0.0), available=False)


class DistanceQueries:
    """
    Point queries shared by live maps and snapshots.

    Subclasses provide voxel_size and _voxel_distance (voxel units, None when
    the voxel was never observed).
    """

    voxel_size: float

    def _voxel_distance(self, key: VoxelKey) -> Optional[float]:
        raise NotImplementedError

    def key_of(self, point: Sequence[float]) -> VoxelKey:
        vs = self.voxel_size
        return VoxelKey(*(math.floor(c / vs) for c in point))

    def _interpolated(self, point: Sequence[float]) -> Optional[float]:
        """Trilinear blend over the 8 surrounding voxel centers, voxel units"""
        u = [c / self.voxel_size - 0.5 for c in point]
        base = [math.floor(c) for c in u]
        frac = [c - b for c, b in zip(u, base)]
        total = 0.0
        for i in (0, 1):
            for j in (0, 1):
                for k in (0, 1):
                    d = self._voxel_distance(VoxelKey(base[0] + i, base[1] + j, base[2] + k))
                    if d is None or math.isinf(d):
                        return None
                    w = (frac[0] if i else 1 - frac[0]) * (frac[1] if j else 1 - frac[1]) * (frac[2] if k else 1 - frac[2])
                    total += w * d
        return total

    def query_distance(self, point: Sequence[float], interpolate: bool = False) -> DistanceResult:
        """Distance in meters at point; unobserved space reports observed=False and +inf"""
        if interpolate:
            blended = self._interpolated(point)
            if blended is not None:
                return DistanceResult(distance=blended * self.voxel_size, observed=True)
        d = self._voxel_distance(self.key_of(point))
        if d is None:
            return DistanceResult(distance=INF, observed=False)
        return DistanceResult(distance=d * self.voxel_size, observed=True)

    def query_gradient(self, point: Sequence[float]) -> GradientResult:
        """Central differences of the interpolated field, step = voxel_size"""
        h = self.voxel_size
        gradient = []
        for axis in range(3):
            ahead = list(point)
            behind = list(point)
            ahead[axis] += h
            behind[axis] -= h
            d_ahead = self._interpolated(ahead)
            d_behind = self._interpolated(behind)
            if d_ahead is None or d_behind is None:
                return UNAVAILABLE_GRADIENT
            # voxel units per voxel == meters per meter
            gradient.append((d_ahead - d_behind) / 2.0)
        return GradientResult(gradient=tuple(gradient), available=True)


class FieldSnapshot(DistanceQueries):
    """Immutable copy of the field taken between epochs"""

    def __init__(
        self,
        voxel_size: float,
        distances: Dict[VoxelKey, float],
        occupied: frozenset,
        complement: Optional[Dict[VoxelKey, float]] = None,
        epoch: int = 0,
    ):
        self.voxel_size = voxel_size
        self.distances: Mapping[VoxelKey, float] = MappingProxyType(dict(distances))
        self.occupied = occupied
        self._complement = MappingProxyType(dict(complement)) if complement is not None else None
        self.epoch = epoch

    def _voxel_distance(self, key: VoxelKey) -> Optional[float]:
        return self.distances.get(key)

    @property
    def signed_mode(self) -> bool:
        return self._complement is not None

    def signed_distance(self, point: Sequence[float]) -> DistanceResult:
        if self._complement is None:
            raise ConfigError("signed distances need esdf.signed_mode=true")
        key = self.key_of(point)
        d = self.distances.get(key)
        if d is None:
            return DistanceResult(distance=INF, observed=False)
        return DistanceResult(distance=(d - self._complement.get(key, 0.0)) * self.voxel_size, observed=True)

    def distance_map(self) -> Dict[VoxelKey, float]:
        return dict(self.distances)

    def occupied_keys(self) -> List[VoxelKey]:
        return sorted(self.occupied)


class EsdfLayer:
    """One distance field: its own records, DLLs and updater"""

    def __init__(self, name: str, index_config: IndexConfig, esdf_config: EsdfConfig, is_obstacle):
        self.name = name
        self.store = VoxelStore(create_index(index_config))
        self.updater = EsdfUpdater(self.store, is_obstacle, esdf_config)


class EsdfMap(DistanceQueries):
    """
    Occupancy grid plus incrementally maintained ESDF.

    Single mutator: integrate_frame/run_epoch must not overlap queries;
    take a snapshot() to read concurrently with later epochs.
    """

    def __init__(
        self,
        index: Optional[IndexConfig] = None,
        occupancy: Optional[OccupancyConfig] = None,
        esdf: Optional[EsdfConfig] = None,
    ):
        self.index_config = index or IndexConfig()
        self.occupancy_config = occupancy or OccupancyConfig()
        self.esdf_config = esdf or EsdfConfig()
        self.voxel_size = self.occupancy_config.voxel_size

        self.layer = EsdfLayer("distance", self.index_config, self.esdf_config, self._is_occupied)
        self.store = self.layer.store
        self.index = self.store.index
        self.integrator = OccupancyIntegrator(self.store, self.occupancy_config)
        self.updater = self.layer.updater

        self.complement: Optional[EsdfLayer] = None
        if self.esdf_config.signed_mode:
            self.complement = EsdfLayer("complement", self.index_config, self.esdf_config, self._mirror_is_free)

        self.pending = UpdateQueues()
        # newly observed keys of the pending epoch already mirrored into the complement
        self._mirrored = 0
        self.epoch = 0
        self.epoch_reports: List[EpochReport] = []

    @classmethod
    def from_config(cls, config: RunConfig) -> "EsdfMap":
        return cls(index=config.index, occupancy=config.occupancy, esdf=config.esdf)

    # ------------------------------------------------------------------
    # obstacle predicates
    # ------------------------------------------------------------------

    def _is_occupied(self, record: VoxelInfo) -> bool:
        return self.integrator.state_of(record) is OccupancyState.OCCUPIED

    def _mirror_is_free(self, mirror: VoxelInfo) -> bool:
        return self.integrator.occupancy_state(mirror.pos) is OccupancyState.FREE

    # ------------------------------------------------------------------
    # updates
    # ------------------------------------------------------------------

    def integrate_frame(self, frame: SensorFrame) -> UpdateQueues:
        """Raycast a frame; crossings accumulate until the next run_epoch"""
        queues = self.integrator.integrate_frame(frame, self.pending)
        self._mirror_new(queues)
        return queues

    def set_occupancy(self, keys: Iterable[Sequence[int]], occupied: bool) -> UpdateQueues:
        """Observe keys directly as occupied or free, bypassing raycasting"""
        for key in keys:
            self.integrator.set_occupancy(VoxelKey(*key), occupied, self.pending)
        self._mirror_new(self.pending)
        return self.pending

    def _mirror_new(self, queues: UpdateQueues) -> None:
        if self.complement is None:
            return
        for key in queues.newly_observed[self._mirrored:]:
            mirror = self.complement.store.allocate(key)
            if not mirror.obs:
                mirror.obs = True
                self.complement.store.insert_into_dll(IDEAL_POINT, mirror.pos)
        self._mirrored = len(queues.newly_observed)

    def run_epoch(self) -> EpochReport:
        """ESDF update for everything integrated since the last epoch"""
        queues, self.pending = self.pending, UpdateQueues()
        complement_queues = queues.for_complement() if self.complement is not None else None
        self._mirrored = 0

        report = self.updater.run_epoch(queues)
        if complement_queues is not None:
            report = report.merge(self.complement.updater.run_epoch(complement_queues))
        self.epoch += 1
        self.epoch_reports.append(report)
        logger.info(
            "Epoch %d: k=%d n=%d m=%d pushes=%d (+%d/-%d) in %.2f ms",
            self.epoch, report.k_initialized, report.n_expanded, report.m_observed_total,
            report.pushes, report.inserted, report.deleted, report.wall_time * 1e3,
        )
        return report

    def update(self, frame: SensorFrame) -> EpochReport:
        self.integrate_frame(frame)
        return self.run_epoch()

    def batch_rebuild(self) -> EpochReport:
        """
        Recompute the field from scratch over the current occupancy: every
        observed voxel restarts at the Ideal Point and every obstacle is
        inserted again.
        """
        if self.pending.insert_queue or self.pending.delete_queue or self.pending.newly_observed:
            self.run_epoch()
        report = self._rebuild_layer(self.layer, self._is_occupied)
        if self.complement is not None:
            report = report.merge(self._rebuild_layer(self.complement, self._mirror_is_free))
        self.epoch += 1
        self.epoch_reports.append(report)
        return report

    def _rebuild_layer(self, layer: EsdfLayer, is_obstacle) -> EpochReport:
        store = layer.store
        store.clear_links()
        queues = UpdateQueues()
        for record in sorted(store.index.records(), key=lambda r: r.pos):
            if not record.obs:
                continue
            record.coc = IDEAL_POINT
            record.dis = INF
            store.insert_into_dll(IDEAL_POINT, record.pos)
            if is_obstacle(record):
                queues.insert_queue.append(record.pos)
        queues.stats.m_observed_total = self.integrator.observed_count
        return layer.updater.run_epoch(queues)

    # ------------------------------------------------------------------
    # read access
    # ------------------------------------------------------------------

    def occupancy_state(self, key: Sequence[int]) -> OccupancyState:
        return self.integrator.occupancy_state(VoxelKey(*key))

    def voxel(self, key: Sequence[int]) -> Optional[VoxelInfo]:
        return self.index.lookup_unchecked(VoxelKey(*key))

    def _voxel_distance(self, key: VoxelKey) -> Optional[float]:
        record = self.index.lookup_unchecked(key)
        if record is None or not record.obs:
            return None
        return record.dis

    def observed_records(self) -> List[VoxelInfo]:
        return sorted((r for r in self.index.records() if r.obs), key=lambda r: r.pos)

    def observed_keys(self) -> List[VoxelKey]:
        return [r.pos for r in self.observed_records()]

    def occupied_keys(self) -> List[VoxelKey]:
        return [r.pos for r in self.observed_records() if self._is_occupied(r)]

    def distance_map(self) -> Dict[VoxelKey, float]:
        """Observed voxel -> dis (voxel units)"""
        return {r.pos: r.dis for r in self.observed_records()}

    def memory_stats(self) -> MemoryStats:
        return self.index.memory_stats()

    def signed_distance(self, point: Sequence[float]) -> DistanceResult:
        """
        Distance to occupied minus distance to free, meters: positive in free
        space, negative inside obstacles.
        """
        if self.complement is None:
            raise ConfigError("signed distances need esdf.signed_mode=true")
        key = self.key_of(point)
        record = self.index.lookup_unchecked(key)
        if record is None or not record.obs:
            return DistanceResult(distance=INF, observed=False)
        mirror = self.complement.store.get(key)
        to_free = mirror.dis if mirror is not None else INF
        return DistanceResult(distance=(record.dis - to_free) * self.voxel_size, observed=True)

    def snapshot(self) -> FieldSnapshot:
        records = self.observed_records()
        complement = None
        if self.complement is not None:
            complement = {}
            for r in records:
                mirror = self.complement.store.get(r.pos)
                complement[r.pos] = mirror.dis if mirror is not None else INF
        return FieldSnapshot(
            voxel_size=self.voxel_size,
            distances={r.pos: r.dis for r in records},
            occupied=frozenset(r.pos for r in records if self._is_occupied(r)),
            complement=complement,
            epoch=self.epoch,
        )

    # ------------------------------------------------------------------
    # verification scans
    # ------------------------------------------------------------------

    def check_fixed_point(self, layer: Optional[EsdfLayer] = None) -> List[Tuple[VoxelKey, VoxelKey]]:
        """(v, u) neighbor pairs where v's closest obstacle would still improve u"""
        layer = layer or self.layer
        updater = layer.updater
        connectivity = self.esdf_config.connectivity
        violations = []
        for v in layer.store.index.records():
            if not v.obs or v.coc is IDEAL_POINT:
                continue
            for u in layer.store.neighbors(v.pos, connectivity):
                if updater.candidate(v, u) < updater.cost(u):
                    violations.append((v.pos, u.pos))
        return violations

    def check_upper_bound(self, layer: Optional[EsdfLayer] = None) -> List[VoxelKey]:
        """Voxels whose coc is not an obstacle or whose dis disagrees with it"""
        layer = layer or self.layer
        is_obstacle = layer.updater.is_obstacle
        euclidean = self.esdf_config.update_rule is UpdateRule.EUCLIDEAN_CLOSEST_OBSTACLE
        bad = []
        for v in layer.store.index.records():
            if not v.obs:
                continue
            if v.coc is IDEAL_POINT:
                if not math.isinf(v.dis):
                    bad.append(v.pos)
                continue
            owner = layer.store.get(v.coc)
            if owner is None or not owner.obs or not is_obstacle(owner):
                bad.append(v.pos)
                continue
            exact = math.sqrt(squared_distance(v.coc, v.pos))
            if euclidean and v.dis != exact:
                bad.append(v.pos)
            elif not euclidean and v.dis < exact - 1e-9:
                bad.append(v.pos)
        return bad

    def check_dll_partition(self, layer: Optional[EsdfLayer] = None) -> List[str]:
        """Every observed voxel linked exactly once, under its own coc"""
        layer = layer or self.layer
        store = layer.store
        problems = []
        seen: Dict[VoxelKey, object] = {}
        owners = [IDEAL_POINT] + [r.pos for r in store.index.records() if r.head is not None]
        for owner in owners:
            for key in store.iterate_dll(owner):
                if key in seen:
                    problems.append(f"{tuple(key)} linked twice")
                seen[key] = owner
                record = store.require(key)
                if record.coc != owner:
                    problems.append(f"{tuple(key)} linked under {owner!r} but coc is {record.coc!r}")
        observed = {r.pos for r in store.index.records() if r.obs}
        for key in observed - seen.keys():
            problems.append(f"{tuple(key)} observed but unlinked")
        for key in seen.keys() - observed:
            problems.append(f"{tuple(key)} linked but unobserved")
        return problems

    def slice_grid(self, axis: str, index: int) -> Tuple[np.ndarray, Tuple[int, int], Tuple[int, int]]:
        """
        2D array of dis over the observed extent of one axis-aligned plane.

        Rows run along the second remaining axis, columns along the first;
        unobserved cells are NaN. Returns (grid, row origin, column origin).
        """
        a = "xyz".index(axis)
        others = [i for i in range(3) if i != a]
        cells = [r for r in self.observed_records() if r.pos[a] == index]
        if not cells:
            return np.full((0, 0), np.nan), (0, 0), (0, 0)
        cols = [r.pos[others[0]] for r in cells]
        rows = [r.pos[others[1]] for r in cells]
        c0, r0 = min(cols), min(rows)
        grid = np.full((max(rows) - r0 + 1, max(cols) - c0 + 1), np.nan)
        for r, row, col in zip(cells, rows, cols):
            grid[row - r0, col - c0] = r.dis
        return grid, (r0, max(rows)), (c0, max(cols))
