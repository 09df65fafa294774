"""
ESDF updating

Turns an epoch's insertQueue/deleteQueue into an updateQueue
(initialize) and propagates closest obstacles breadth-first until no
voxel can be improved by a neighbor's closest obstacle (propagate).

Distances are compared as exact squared lattice distances; dis holds the
square root. Updates require strict improvement, so equidistant
candidates keep the incumbent.
"""

import heapq
import logging
import math
import time
from collections import deque
from dataclasses import asdict, dataclass
from typing import Callable, Dict, Iterable, List, Optional, Tuple

from core.config import EsdfConfig, QueueDiscipline, UpdateRule
from core.errors import CorruptionError
from core.types import IDEAL_POINT, Owner, VoxelKey, squared_distance
from core.voxel_store import INF, VoxelInfo, VoxelStore
from .occupancy import UpdateQueues

logger = logging.getLogger(__name__)

# Slack on the queue-length guard for tiny maps
GUARD_MARGIN = 64


@dataclass
class EpochReport:
    """Counters of one run_epoch call"""
    k_initialized: int = 0
    n_expanded: int = 0
    pushes: int = 0
    patch_adoptions: int = 0
    inserted: int = 0
    deleted: int = 0
    newly_observed: int = 0
    m_observed_total: int = 0
    wall_time: float = 0.0

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    def merge(self, other: "EpochReport") -> "EpochReport":
        """Sum of two reports (signed mode runs two fields per epoch)"""
        merged = EpochReport()
        for name in asdict(self):
            setattr(merged, name, getattr(self, name) + getattr(other, name))
        merged.m_observed_total = max(self.m_observed_total, other.m_observed_total)
        return merged


class UpdateQueue:
    """FIFO or min-distance queue over voxel records"""

    def __init__(self, discipline: QueueDiscipline):
        self.discipline = discipline
        self._fifo: deque = deque()
        self._heap: List[Tuple[float, VoxelKey, int, VoxelInfo]] = []
        self._seq = 0

    def push(self, record: VoxelInfo, priority: float) -> None:
        if self.discipline is QueueDiscipline.FIFO:
            self._fifo.append(record)
        else:
            # ties break on VoxelKey order, then push order
            self._seq += 1
            heapq.heappush(self._heap, (priority, record.pos, self._seq, record))

    def pop(self) -> Tuple[VoxelInfo, Optional[float]]:
        if self.discipline is QueueDiscipline.FIFO:
            return self._fifo.popleft(), None
        priority, _, _, record = heapq.heappop(self._heap)
        return record, priority

    def __len__(self) -> int:
        return len(self._fifo) if self.discipline is QueueDiscipline.FIFO else len(self._heap)

    def keys(self) -> List[VoxelKey]:
        """Pending voxel keys in pop order"""
        if self.discipline is QueueDiscipline.FIFO:
            return [record.pos for record in self._fifo]
        return [entry[1] for entry in sorted(self._heap)]


class EsdfUpdater:
    """
    Incremental distance propagation over one VoxelStore.

    is_obstacle decides which records act as obstacles: Occupied voxels for
    the distance field, Free voxels for the complement field of signed mode.
    """

    def __init__(
        self,
        store: VoxelStore,
        is_obstacle: Callable[[VoxelInfo], bool],
        config: Optional[EsdfConfig] = None,
    ):
        self.store = store
        self.config = config or EsdfConfig()
        self.is_obstacle = is_obstacle
        self.quasi = self.config.update_rule is UpdateRule.QUASI_EUCLIDEAN
        self._step_length = {
            off: math.sqrt(squared_distance(off, (0, 0, 0)))
            for off in self.config.connectivity.offsets
        }
        # Limited-observation patch; switched off only by regression tests
        self._patch_enabled = True

    # ------------------------------------------------------------------
    # cost model
    # ------------------------------------------------------------------

    def cost(self, record: VoxelInfo) -> float:
        """Comparable distance of a record: squared for Euclidean, dis for quasi"""
        if record.coc is IDEAL_POINT:
            return INF
        if self.quasi:
            return record.dis
        return squared_distance(record.coc, record.pos)

    def candidate(self, source: VoxelInfo, target: VoxelInfo) -> float:
        """Cost target would get from source's closest obstacle"""
        if self.quasi:
            off = (target.pos[0] - source.pos[0], target.pos[1] - source.pos[1], target.pos[2] - source.pos[2])
            step = self._step_length.get(off)
            if step is None:
                step = math.sqrt(squared_distance(off, (0, 0, 0)))
            return source.dis + step
        return squared_distance(source.coc, target.pos)

    def _distance(self, cost: float) -> float:
        return cost if self.quasi else math.sqrt(cost)

    def _assign(self, record: VoxelInfo, coc: Owner, cost: float) -> None:
        """deleteFromDLL / set coc and dis / insertIntoDLL"""
        if record.dll_owner is not None:
            self.store.delete_from_dll(record.dll_owner, record.pos)
        record.coc = coc
        record.dis = INF if coc is IDEAL_POINT else self._distance(cost)
        self.store.insert_into_dll(coc, record.pos)

    def _push(self, queue: UpdateQueue, record: VoxelInfo, report: EpochReport) -> None:
        queue.push(record, self.cost(record))
        report.pushes += 1

    # ------------------------------------------------------------------
    # initialization
    # ------------------------------------------------------------------

    def initialize(self, queues: UpdateQueues, report: Optional[EpochReport] = None) -> EpochReport:
        """
        Merge insertQueue and deleteQueue into the updateQueue.

        Inserted voxels become their own closest obstacle. Every voxel whose
        closest obstacle was deleted falls back to the Ideal Point, then
        adopts the best still-existing closest obstacle among its observed
        neighbors. Newly observed voxels are queued last so they can pick up
        obstacles known from earlier epochs.
        """
        report = report or EpochReport()
        queue = UpdateQueue(self.config.queue_discipline)
        queues.update_queue = queue
        connectivity = self.config.connectivity

        while queues.insert_queue:
            cur = self.store.require(queues.insert_queue.popleft())
            self._assign(cur, cur.pos, 0)
            self._push(queue, cur, report)
            report.inserted += 1
            report.k_initialized += 1

        while queues.delete_queue:
            cur = self.store.require(queues.delete_queue.popleft())
            report.deleted += 1
            for key in self.store.dll_members(cur.pos):
                vox = self.store.require(key)
                report.k_initialized += 1
                self.store.delete_from_dll(vox.coc, vox.pos)
                vox.coc = IDEAL_POINT
                vox.dis = INF
                best_cost, best_coc = INF, None
                for nbr in self.store.neighbors(vox.pos, connectivity):
                    if nbr.coc is IDEAL_POINT or not self._coc_exists(nbr.coc):
                        continue
                    cost = self.candidate(nbr, vox)
                    if cost < best_cost:
                        best_cost, best_coc = cost, nbr.coc
                if best_coc is None:
                    self.store.insert_into_dll(IDEAL_POINT, vox.pos)
                else:
                    vox.coc = best_coc
                    vox.dis = self._distance(best_cost)
                    self.store.insert_into_dll(best_coc, vox.pos)
                    self._push(queue, vox, report)

        for key in queues.newly_observed:
            record = self.store.require(key)
            if record.coc is IDEAL_POINT:
                self._push(queue, record, report)
            report.newly_observed += 1
        queues.newly_observed = []
        return report

    def _coc_exists(self, coc: VoxelKey) -> bool:
        record = self.store.get(coc)
        return record is not None and record.obs and self.is_obstacle(record)

    # ------------------------------------------------------------------
    # propagation
    # ------------------------------------------------------------------

    def _guard_limit(self) -> int:
        records = self.store.index.memory_stats().allocated_voxel_records
        return records * self.config.connectivity.degree + GUARD_MARGIN

    def propagate(self, queues: UpdateQueues, report: Optional[EpochReport] = None) -> EpochReport:
        """
        BFS over the updateQueue.

        Each popped voxel first tries to improve itself from its neighbors'
        closest obstacles; if that succeeds it is re-queued and not expanded
        this round. Otherwise it offers its own closest obstacle to every
        observed neighbor.
        """
        report = report or EpochReport()
        queue = queues.update_queue
        if not isinstance(queue, UpdateQueue):
            queue = UpdateQueue(self.config.queue_discipline)
            for key in queues.update_queue:
                self._push(queue, self.store.require(key), report)
            queues.update_queue = queue
        connectivity = self.config.connectivity
        neighbors = self.store.neighbors
        limit = self._guard_limit()
        priority_mode = self.config.queue_discipline is QueueDiscipline.PRIORITY_BY_DISTANCE

        while len(queue):
            if len(queue) > limit:
                raise CorruptionError(
                    f"update queue grew to {len(queue)} entries (limit {limit}); propagation is not terminating"
                )
            cur, priority = queue.pop()
            if priority_mode and priority != self.cost(cur):
                continue
            nbrs = neighbors(cur.pos, connectivity)

            if self._patch_enabled and self._improve_from_neighbors(cur, nbrs):
                report.patch_adoptions += 1
                self._push(queue, cur, report)
                continue

            if cur.coc is IDEAL_POINT:
                continue
            report.n_expanded += 1
            for nbr in nbrs:
                cost = self.candidate(cur, nbr)
                if cost < self.cost(nbr):
                    self._assign(nbr, cur.coc, cost)
                    self._push(queue, nbr, report)

        return report

    def _improve_from_neighbors(self, cur: VoxelInfo, nbrs: Iterable[VoxelInfo]) -> bool:
        best_cost = self.cost(cur)
        best_coc = None
        for nbr in nbrs:
            if nbr.coc is IDEAL_POINT:
                continue
            cost = self.candidate(nbr, cur)
            if cost < best_cost:
                best_cost, best_coc = cost, nbr.coc
        if best_coc is None:
            return False
        self._assign(cur, best_coc, best_cost)
        return True

    # ------------------------------------------------------------------
    # full epoch
    # ------------------------------------------------------------------

    def run_epoch(self, queues: UpdateQueues) -> EpochReport:
        """initialize + propagate; leaves the field at a fixed point"""
        start = time.perf_counter()
        report = self.initialize(queues)
        self.propagate(queues, report)
        report.wall_time = time.perf_counter() - start
        report.m_observed_total = queues.stats.m_observed_total
        queues.stats.k_initialized = report.k_initialized
        queues.stats.n_expanded = report.n_expanded
        return report
